"""Quadratic matrix polynomials on the twistor line and their spectral curves.

A :class:`QuadMatPoly` is ``A(zeta) = A0 + A1 zeta + A2 zeta**2`` with ``k x k``
complex coefficients.  Its characteristic polynomial
``det(eta I - A(zeta)) = eta**k + sum_i p_i(zeta) eta**(k-i)`` defines a
:class:`SpectralCurve` in the total space of O(2) over P^1, with coordinates
``(zeta, eta)`` and the antiholomorphic involution
``sigma(zeta, eta) = (-1/conj(zeta), -conj(eta)/conj(zeta)**2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial as P1D
from scipy.optimize import linear_sum_assignment

from .errors import IdenticallySingular

DEFAULT_TOL = 1e-9
CLUSTER_TOL = 1e-6

# Rotation parameters tried in order when a root sits too close to infinity.
_ROTATION_STEP = 0.3
_MAX_ROOT_MODULUS = 1.0 / 0.05


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


def _unit_nodes(n: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(n) / n)


def _interp_unit_circle(values: np.ndarray) -> np.ndarray:
    """Ascending coefficients of the degree < n polynomial through n roots of unity."""
    return np.fft.fft(values, axis=0) / values.shape[0]


@dataclass(frozen=True)
class QuadMatPoly:
    """``A0 + A1 zeta + A2 zeta**2`` with square complex coefficients."""

    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray

    def __post_init__(self):
        coeffs = [np.atleast_2d(_frozen(a)) for a in (self.A0, self.A1, self.A2)]
        shape = coeffs[0].shape
        if shape[0] != shape[1] or any(c.shape != shape for c in coeffs):
            raise ValueError(f"coefficients must share one square shape, got {[c.shape for c in coeffs]}")
        for name, c in zip(("A0", "A1", "A2"), coeffs):
            object.__setattr__(self, name, c)

    @classmethod
    def from_coeffs(cls, coeffs: Sequence) -> "QuadMatPoly":
        """Build from ``[A0, A1, A2]``; missing trailing coefficients are zero."""
        coeffs = [np.atleast_2d(np.asarray(c, dtype=complex)) for c in coeffs]
        if not 1 <= len(coeffs) <= 3:
            raise ValueError("a quadratic polynomial has at most three coefficients")
        zero = np.zeros_like(coeffs[0])
        coeffs = coeffs + [zero] * (3 - len(coeffs))
        return cls(*coeffs)

    @classmethod
    def scalar(cls, c0, c1=0.0, c2=0.0, k: int = 1) -> "QuadMatPoly":
        """The scalar quadratic ``c0 + c1 zeta + c2 zeta**2`` times the identity."""
        eye = np.eye(k)
        return cls(c0 * eye, c1 * eye, c2 * eye)

    @property
    def k(self) -> int:
        return self.A0.shape[0]

    @property
    def coeffs(self) -> np.ndarray:
        """Stacked coefficients, shape ``(3, k, k)``."""
        return np.stack([self.A0, self.A1, self.A2])

    def __call__(self, zeta) -> np.ndarray:
        return evaluate(self, zeta)

    def __add__(self, other: "QuadMatPoly") -> "QuadMatPoly":
        return QuadMatPoly(*(self.coeffs + other.coeffs))

    def __sub__(self, other: "QuadMatPoly") -> "QuadMatPoly":
        return QuadMatPoly(*(self.coeffs - other.coeffs))

    def __neg__(self) -> "QuadMatPoly":
        return QuadMatPoly(*(-self.coeffs))

    def scale(self) -> float:
        """Largest coefficient magnitude (entrywise max norm), at least 1."""
        return max(1.0, float(np.max(np.abs(self.coeffs))))

    def distance(self, other: "QuadMatPoly") -> float:
        """Entrywise max-norm distance between coefficient stacks."""
        return float(np.max(np.abs(self.coeffs - other.coeffs)))

    def derivative_at(self, zeta) -> np.ndarray:
        return self.A1 + 2 * zeta * self.A2


def evaluate(P: QuadMatPoly, zeta) -> np.ndarray:
    """Horner evaluation ``(A2 zeta + A1) zeta + A0``."""
    return (P.A2 * zeta + P.A1) * zeta + P.A0


@dataclass(frozen=True)
class SpectralCurve:
    """``eta**k + sum_i p_i(zeta) eta**(k-i) = 0``.

    ``p[i-1]`` holds the ascending coefficients of ``p_i``, padded to length
    ``2i + 1``.
    """

    k: int
    p: tuple

    def __post_init__(self):
        if len(self.p) != self.k:
            raise ValueError(f"expected {self.k} coefficient polynomials, got {len(self.p)}")
        padded = []
        for i, coeffs in enumerate(self.p, start=1):
            c = np.trim_zeros(np.atleast_1d(np.asarray(coeffs, dtype=complex)), "b")
            if c.size > 2 * i + 1:
                raise ValueError(f"p_{i} has degree {c.size - 1} > {2 * i}")
            out = np.zeros(2 * i + 1, dtype=complex)
            out[: c.size] = c
            padded.append(_frozen(out))
        object.__setattr__(self, "p", tuple(padded))

    @property
    def genus(self) -> int:
        return (self.k - 1) ** 2

    def coefficients_at(self, zeta) -> np.ndarray:
        """Coefficients of ``P(zeta, .)`` in descending powers of eta."""
        return np.concatenate([[1.0 + 0j], [np.polyval(c[::-1], zeta) for c in self.p]])

    def __call__(self, zeta, eta):
        return np.polyval(self.coefficients_at(zeta), eta)

    def fiber(self, zeta) -> np.ndarray:
        """The k eta-roots over ``zeta``."""
        return np.roots(self.coefficients_at(zeta)) if self.k > 1 else -np.array(
            [np.polyval(self.p[0][::-1], zeta)]
        )

    def to_array(self) -> np.ndarray:
        """Coefficient grid ``C[m, j]`` of ``zeta**m eta**j``, shape ``(2k+1, k+1)``."""
        k = self.k
        C = np.zeros((2 * k + 1, k + 1), dtype=complex)
        C[0, k] = 1.0
        for i, c in enumerate(self.p, start=1):
            C[: c.size, k - i] = c
        return C

    def shifted(self, c) -> "SpectralCurve":
        """Curve of ``P(zeta, eta + c(zeta))`` for a scalar quadratic ``c``."""
        k = self.k
        C = self.to_array()
        cpoly = P1D(np.zeros(3, dtype=complex) + np.asarray(c, dtype=complex))
        out = np.zeros_like(C)
        for j in range(k + 1):
            # C_j(zeta) (eta + c)^j = sum_l binom(j, l) C_j c^(j-l) eta^l
            Cj = P1D(C[:, j])
            for l in range(j + 1):
                term = (Cj * cpoly ** (j - l)).coef * comb(j, l)
                out[: min(term.size, 2 * k + 1), l] += term[: 2 * k + 1]
        return SpectralCurve(k, tuple(out[: 2 * i + 1, k - i] for i in range(1, k + 1)))

    def max_deviation(self, other: "SpectralCurve") -> float:
        return float(max(np.max(np.abs(a - b)) for a, b in zip(self.p, other.p)))


def _truncate(coeffs: np.ndarray, degree: int) -> np.ndarray:
    return np.asarray(coeffs[: degree + 1])


def char_coefficient_grid(coeffs) -> np.ndarray:
    """Coefficient grids of ``det(eta I - P(zeta))`` for a batch of polynomials.

    ``coeffs`` has shape ``(N, 3, k, k)``; the result has shape
    ``(N, 2k + 1, k + 1)`` with entry ``[n, m, j]`` the coefficient of
    ``zeta**m eta**j``.  Determinants are sampled on ``2k + 1`` unit-circle
    nodes in zeta and ``k + 1`` nodes on a circle of radius ``rho >= 1`` in eta,
    then interpolated by FFT.
    """
    C = np.asarray(coeffs, dtype=complex)
    k = C.shape[-1]
    zn = _unit_nodes(2 * k + 1)
    M = C[:, None, 0] + zn[None, :, None, None] * C[:, None, 1] + zn[None, :, None, None] ** 2 * C[:, None, 2]
    rho = max(1.0, float(np.max(np.linalg.norm(M, 2, axis=(-2, -1)))))
    etas = rho * _unit_nodes(k + 1)
    dets = np.linalg.det(etas[:, None, None] * np.eye(k) - M[:, :, None])  # (N, nodes, k+1)
    eta_coeffs = _interp_unit_circle(np.moveaxis(dets, 2, 0)) / (rho ** np.arange(k + 1))[:, None, None]
    eta_coeffs[k] = 1.0
    return np.moveaxis(_interp_unit_circle(np.moveaxis(eta_coeffs, 2, 0)), 1, 2).swapaxes(0, 1)


def _curve_from_grid(k: int, grid: np.ndarray) -> "SpectralCurve":
    return SpectralCurve(k, tuple(_truncate(grid[:, k - i], 2 * i) for i in range(1, k + 1)))


def char_curve(P: QuadMatPoly) -> SpectralCurve:
    """Spectral curve ``det(eta I - P(zeta)) = 0``.

    Each ``p_i`` is interpolated from ``2k + 1`` samples on the unit circle;
    coefficients above degree ``2i`` are numerical noise and are dropped.
    """
    return _curve_from_grid(P.k, char_coefficient_grid(P.coeffs[None])[0])


@dataclass(frozen=True)
class TwistorPoint:
    """A point of T P^1.  When ``infinite`` is set, ``eta`` holds the fiber
    coordinate ``eta * zeta**-2`` of the chart at ``zeta = infinity``."""

    zeta: complex
    eta: complex = 0j
    infinite: bool = False

    def __post_init__(self):
        object.__setattr__(self, "zeta", complex(self.zeta) if not self.infinite else complex(np.inf))
        object.__setattr__(self, "eta", complex(self.eta))


def sigma(pt: TwistorPoint) -> TwistorPoint:
    """The real structure ``(zeta, eta) -> (-1/conj(zeta), -conj(eta)/conj(zeta)**2)``."""
    if pt.infinite:
        return TwistorPoint(0j, -np.conj(pt.eta))
    if pt.zeta == 0:
        return TwistorPoint(np.inf, -np.conj(pt.eta), infinite=True)
    zb = np.conj(pt.zeta)
    return TwistorPoint(-1.0 / zb, -np.conj(pt.eta) / zb**2)


def sigma_zeta(zeta):
    """Action of sigma on the base P^1, vectorized over finite nonzero zeta."""
    return -1.0 / np.conj(zeta)


@dataclass(frozen=True)
class Divisor:
    """Finite multiset of points with positive integer multiplicities."""

    points: tuple = ()
    multiplicities: tuple = ()

    def __post_init__(self):
        mult = tuple(self.multiplicities) or (1,) * len(self.points)
        if len(mult) != len(self.points) or any(m < 1 for m in mult):
            raise ValueError("multiplicities must be positive and match the points")
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "multiplicities", mult)

    @classmethod
    def from_points(cls, points) -> "Divisor":
        """Collect points, merging exact repeats (notably repeated points at infinity)."""
        merged: dict = {}
        for pt in points:
            merged[pt] = merged.get(pt, 0) + 1
        return cls(tuple(merged), tuple(merged.values()))

    @property
    def degree(self) -> int:
        return int(sum(self.multiplicities))

    def expanded(self) -> list:
        return [pt for pt, m in zip(self.points, self.multiplicities) for _ in range(m)]

    def __add__(self, other: "Divisor") -> "Divisor":
        return Divisor.from_points(self.expanded() + other.expanded())

    def matches(self, other: "Divisor", tol: float = 1e-8) -> bool:
        """Multiset equality up to ``tol`` in chordal distance on (zeta, eta)."""
        a, b = self.expanded(), other.expanded()
        if len(a) != len(b):
            return False
        if not a:
            return True
        cost = np.array([[_point_distance(p, q) for q in b] for p in a])
        rows, cols = linear_sum_assignment(cost)
        return bool(np.all(cost[rows, cols] <= tol))


def _chordal(z1: complex, z2: complex) -> float:
    if np.isinf(z1) and np.isinf(z2):
        return 0.0
    if np.isinf(z1) or np.isinf(z2):
        z = z2 if np.isinf(z1) else z1
        return 1.0 / np.sqrt(1.0 + abs(z) ** 2)
    return abs(z1 - z2) / np.sqrt((1.0 + abs(z1) ** 2) * (1.0 + abs(z2) ** 2))


def _point_distance(p: TwistorPoint, q: TwistorPoint) -> float:
    return _chordal(p.zeta, q.zeta) + abs(p.eta - q.eta)


def is_real_curve(S: SpectralCurve, tol: float = DEFAULT_TOL) -> bool:
    """Check ``p_i(zeta) == (-1)**i zeta**(2i) conj(p_i(-1/conj(zeta)))`` on unit-circle nodes."""
    nodes = _unit_nodes(2 * S.k + 3) * np.exp(0.1j)
    for i, c in enumerate(S.p, start=1):
        lhs = np.polyval(c[::-1], nodes)
        rhs = (-1) ** i * nodes ** (2 * i) * np.conj(np.polyval(c[::-1], sigma_zeta(nodes)))
        scale = max(1.0, float(np.max(np.abs(c))))
        if np.max(np.abs(lhs - rhs)) > tol * scale:
            return False
    return True


def is_reality_form(T: QuadMatPoly, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``A1`` is Hermitian and ``A2 = -A0^*``."""
    return check_signature_conditions(T, np.eye(T.k), tol)


def check_signature_conditions(T: QuadMatPoly, q, tol: float = DEFAULT_TOL) -> bool:
    """The signature-``q`` reality conditions

    ``q A0 q^-1 = -A2^*``, ``q A1 q^-1 = A1^*``, ``q A2 q^-1 = -A0^*``.
    """
    q = np.asarray(q)
    if q.ndim == 1:
        q = np.diag(q)
    diag = np.diag(q)
    if not (np.allclose(q, np.diag(diag)) and np.allclose(np.abs(diag), 1.0) and np.allclose(diag.imag, 0)):
        raise ValueError("q must be a diagonal matrix with entries +-1")
    qinv = np.diag(1.0 / diag)
    checks = (
        q @ T.A0 @ qinv + T.A2.conj().T,
        q @ T.A1 @ qinv - T.A1.conj().T,
        q @ T.A2 @ qinv + T.A0.conj().T,
    )
    return all(float(np.max(np.abs(c), initial=0.0)) <= tol for c in checks)


@dataclass(frozen=True)
class RootSet:
    """Roots of a scalar polynomial of nominal degree ``n`` on P^1.

    ``finite`` holds the finite roots; the degree deficit is ``n_infinite``.
    ``clusters`` lists index pairs of finite roots closer than ``CLUSTER_TOL``.
    """

    finite: np.ndarray
    n_infinite: int = 0
    clusters: tuple = field(default=())

    @property
    def degree(self) -> int:
        return len(self.finite) + self.n_infinite

    def as_divisor(self) -> Divisor:
        pts = [TwistorPoint(z) for z in self.finite]
        pts += [TwistorPoint(np.inf, infinite=True)] * self.n_infinite
        return Divisor.from_points(pts)


def _find_clusters(roots: np.ndarray, tol: float = CLUSTER_TOL) -> tuple:
    pairs = []
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if abs(roots[i] - roots[j]) < tol * max(1.0, abs(roots[i])):
                pairs.append((i, j))
    return tuple(pairs)


def scalar_roots(coeffs, nominal_degree: int, tol: float = DEFAULT_TOL) -> RootSet:
    """Roots of an ascending coefficient vector with the top-degree deficit sent to infinity."""
    c = np.asarray(coeffs, dtype=complex)[: nominal_degree + 1]
    scale = float(np.max(np.abs(c), initial=0.0))
    if scale == 0.0:
        raise IdenticallySingular("polynomial vanishes identically")
    top = len(c) - 1
    while top > 0 and abs(c[top]) <= tol * scale:
        top -= 1
    finite = np.roots(c[: top + 1][::-1]) if top > 0 else np.array([], dtype=complex)
    finite = np.asarray(finite, dtype=complex)
    return RootSet(finite, nominal_degree - top, _find_clusters(finite))


def det_coeffs(P: QuadMatPoly) -> np.ndarray:
    """Ascending coefficients of the degree ``<= 2k`` polynomial ``det P(zeta)``."""
    nodes = _unit_nodes(2 * P.k + 1)
    return _interp_unit_circle(np.array([np.linalg.det(evaluate(P, z)) for z in nodes]))


def det_roots(P: QuadMatPoly, tol: float = DEFAULT_TOL) -> RootSet:
    """Roots of ``det P(zeta)`` counted on P^1 (nominal degree ``2k``).

    Raises
    ------
    IdenticallySingular
        If every coefficient of ``det P`` is below ``tol`` relative to the
        natural scale ``max|A_j| ** k``.
    """
    c = det_coeffs(P)
    norm_scale = float(max(np.linalg.norm(A, 2) for A in (P.A0, P.A1, P.A2)))
    if norm_scale == 0.0 or np.max(np.abs(c)) <= tol * max(norm_scale, 1.0) ** P.k:
        raise IdenticallySingular("det P(zeta) vanishes identically")
    return scalar_roots(c, 2 * P.k, tol)


def eta_zero_points(S: SpectralCurve, tol: float = DEFAULT_TOL) -> Divisor:
    """The 2k points where the curve meets ``eta = 0``, i.e. the roots of ``p_k``."""
    pk = S.p[-1]
    if np.max(np.abs(pk)) <= tol * max(1.0, max(float(np.max(np.abs(c))) for c in S.p)):
        raise IdenticallySingular("p_k vanishes identically")
    return scalar_roots(pk, 2 * S.k, tol).as_divisor()


def mobius_rotate(P: QuadMatPoly, delta: complex) -> QuadMatPoly:
    """Pull ``P`` back along the rotation ``zeta -> (zeta + delta)/(1 - conj(delta) zeta)``.

    The result is ``(1 - conj(delta) zeta)**2 P(m(zeta)) / (1 + |delta|**2)``;
    this is the SU(2) action on O(2)-valued sections, so reality forms stay
    reality forms.  A root ``z0`` of ``det P`` moves to ``(z0 - delta)/(1 + conj(delta) z0)``.
    """
    d = complex(delta)
    db = d.conjugate()
    norm = 1.0 + abs(d) ** 2
    A0 = P.A0 + d * P.A1 + d**2 * P.A2
    A1 = -2 * db * P.A0 + (1 - abs(d) ** 2) * P.A1 + 2 * d * P.A2
    A2 = db**2 * P.A0 - db * P.A1 + P.A2
    return QuadMatPoly(A0 / norm, A1 / norm, A2 / norm)


def mobius_inverse_point(zeta, delta: complex):
    """Image of a root under the rotation used by :func:`mobius_rotate`."""
    d = complex(delta)
    if np.isinf(zeta):
        return 1.0 / d.conjugate() if d != 0 else complex(np.inf)
    return (zeta - d) / (1 + d.conjugate() * zeta)


def rotation_candidates(limit: int = 40):
    """0, then 0.3, 0.3i, 0.6, 0.6i, ..."""
    yield 0j
    for n in range(1, limit + 1):
        yield complex(_ROTATION_STEP * n)
        yield 1j * _ROTATION_STEP * n


def choose_rotation(P: QuadMatPoly, tol: float = DEFAULT_TOL) -> complex:
    """Smallest rotation keeping every root of ``det P`` within modulus 20."""
    roots = det_roots(P, tol)
    pts = list(roots.finite) + [complex(np.inf)] * roots.n_infinite
    for delta in rotation_candidates():
        moved = [mobius_inverse_point(z, delta) for z in pts]
        if all(np.isfinite(z) and abs(z) <= _MAX_ROOT_MODULUS for z in moved):
            return delta
    raise IdenticallySingular("no rotation moves the roots away from infinity")
