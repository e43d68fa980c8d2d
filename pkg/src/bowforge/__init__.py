"""Numerics for bow varieties.

Spectral curves and factorization of quadratic matrix polynomials
(:mod:`.matpoly`, :mod:`.factor`), Nahm flows with bow boundary data
(:mod:`.nahm`), the asymptotic Gibbons-Hawking metric (:mod:`.ghmetric`) and
Kaehler potentials by the generalized Legendre transform (:mod:`.glt`).
"""

from .errors import BowforgeError
from .factor import FactorPair, factorize, moment_mu, moment_nu, random_pair, scan_splits
from .ghmetric import PointConfig, assemble_phi, connection_oneform, metric_eval, validity_threshold
from .glt import Multiplet, build_F, gh_frame_metric, kahler_potential, metric_from_K, shift_section
from .matpoly import QuadMatPoly, SpectralCurve, char_curve, is_real_curve, sigma
from .nahm import BowConfig, NahmTriple, assemble_T, complex_reduce, integrate, verify_bow

__version__ = "0.1.0"

__all__ = [
    "BowConfig",
    "BowforgeError",
    "FactorPair",
    "Multiplet",
    "NahmTriple",
    "PointConfig",
    "QuadMatPoly",
    "SpectralCurve",
    "__version__",
    "assemble_T",
    "assemble_phi",
    "build_F",
    "char_curve",
    "complex_reduce",
    "connection_oneform",
    "factorize",
    "gh_frame_metric",
    "integrate",
    "is_real_curve",
    "kahler_potential",
    "metric_eval",
    "metric_from_K",
    "moment_mu",
    "moment_nu",
    "random_pair",
    "scan_splits",
    "shift_section",
    "sigma",
    "validity_threshold",
    "verify_bow",
]
