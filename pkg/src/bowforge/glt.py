"""Generalized Legendre transform for bow varieties.

Real sections of O(2k) are :class:`Multiplet` objects, coefficients
``w_0..w_2k`` with ``w_{2k-a} = (-1)^(a+k) conj(w_a)``.  A k = 1 multiplet is
a point ``x`` of R^3 through ``(x2 + i x3) + 2 x1 zeta - (x2 - i x3) zeta**2``.

The function

    F = sum over legs of  int eta / (2 zeta^2) dzeta
        - sum_i L_i Res_{zeta=0} eta^2 / (2 zeta^3)

is built from contour legs between intersection divisors and residue terms
weighted by interval lengths ``L_i``.  Its Legendre transform
``K = F - 2 sum Re(u_i w_i1)``, with ``u_i + conj(u_i) = dF/dw_i1``, is the
Kaehler potential in the complex coordinates ``(w_i0, u_i)``.

For k = 1 every leg runs along one section, or along a difference of
adjacent sections, from the root ``(|x| + x1)/conj(w0)`` to the root
``-(|x| - x1)/conj(w0)`` of that polynomial.  The straight segment between
them passes through zero; it is detoured by a small semicircle and the two
detour sides are averaged.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import (
    BranchAtZero,
    CoincidentSections,
    ConstraintSolveFailed,
    IndefiniteMetric,
    PathThroughPole,
    SheetCollision,
)
from .factor import r3_quadratic
from .matpoly import Divisor, SpectralCurve, TwistorPoint
from .nahm import BowConfig

logger = logging.getLogger(__name__)

QUAD_EPSABS = 1e-13
QUAD_EPSREL = 1e-12
DETOUR_FRACTION = 0.1
COLLISION_DISTANCE = 1e-8
FD_STEP = 1e-5


# --- multiplets --------------------------------------------------------------------


@dataclass(frozen=True)
class Multiplet:
    """Real section ``sum_a w_a zeta**a`` of O(2k)."""

    k: int
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=complex).ravel()
        if w.size != 2 * self.k + 1:
            raise ValueError(f"O({2 * self.k}) multiplet needs {2 * self.k + 1} coefficients")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "_horner", tuple(complex(c) for c in w[::-1]))

    @classmethod
    def from_r3(cls, x) -> "Multiplet":
        return cls(1, r3_quadratic(x))

    def to_r3(self) -> np.ndarray:
        if self.k != 1:
            raise ValueError("only O(2) multiplets correspond to points of R^3")
        return np.array([self.w[1].real / 2, self.w[0].real, self.w[0].imag])

    def __call__(self, zeta):
        acc = 0j
        for c in self._horner:
            acc = acc * zeta + c
        return acc

    def reality_defect(self) -> float:
        k = self.k
        a = np.arange(2 * k + 1)
        mirrored = (-1.0) ** (a + k) * np.conj(self.w)
        return float(np.max(np.abs(self.w[::-1] - mirrored)))

    def is_real(self, tol: float = 1e-9) -> bool:
        return self.reality_defect() <= tol * max(1.0, float(np.max(np.abs(self.w))))

    def __add__(self, other: "Multiplet") -> "Multiplet":
        return Multiplet(self.k, self.w + other.w)

    def __sub__(self, other: "Multiplet") -> "Multiplet":
        return Multiplet(self.k, self.w - other.w)

    # Independent real parameters of the constrained coefficients w_2..w_k
    # (w_{k+1}..w_{2k-2} follow by reality).

    def constrained_params(self) -> np.ndarray:
        k = self.k
        out = []
        for a in range(2, k):
            out += [self.w[a].real, self.w[a].imag]
        if k >= 2:
            out.append(self.w[k].real)
        return np.array(out)

    def with_constrained(self, params) -> "Multiplet":
        k = self.k
        w = self.w.copy()
        p = list(params)
        for a in range(2, k):
            w[a] = p.pop(0) + 1j * p.pop(0)
            w[2 * k - a] = (-1.0) ** (a + k) * np.conj(w[a])
        if k >= 2:
            w[k] = p.pop(0)
        return Multiplet(k, w)


def shift_section(s: Multiplet, c) -> Multiplet:
    """``eta -> eta + c(zeta)`` for ``c`` a point of R^3 or an O(2) multiplet."""
    if s.k != 1:
        raise ValueError("shift_section acts on O(2) multiplets")
    cm = c if isinstance(c, Multiplet) else Multiplet.from_r3(c)
    return s + cm


def _quadratic_roots(w: np.ndarray):
    """Roots of ``w0 + w1 z + w2 z^2`` on P^1 (``inf`` when the degree drops)."""
    if abs(w[2]) < 1e-300:
        if abs(w[1]) < 1e-300:
            return [np.inf, np.inf]
        return [-w[0] / w[1], np.inf]
    return list(np.roots(w[::-1]))


def intersection_divisor(s1: Multiplet, s2: Multiplet) -> Divisor:
    """The sigma-pair where two O(2) sections meet.

    The first point has ``Im zeta >= 0`` (ties broken by ``Re zeta >= 0``).

    Raises
    ------
    CoincidentSections
        The sections are equal.
    """
    if s1.k != 1 or s2.k != 1:
        raise ValueError("intersection_divisor needs O(2) sections")
    d = s1.w - s2.w
    if np.max(np.abs(d)) <= 1e-14 * max(1.0, float(np.max(np.abs(s1.w)))):
        raise CoincidentSections("sections coincide")
    roots = _quadratic_roots(d)

    def key(z):
        if not np.isfinite(z):
            return (1, 0.0)
        return (0 if (z.imag > 0 or (z.imag == 0 and z.real >= 0)) else 1, 0.0)

    roots.sort(key=key)
    pts = [TwistorPoint(np.inf, infinite=True) if not np.isfinite(z) else TwistorPoint(z, s1(z))
           for z in roots]
    return Divisor(tuple(pts), (1, 1))


def delta_endpoints(s: Multiplet):
    """``(zeta_A, zeta_B)``: the roots ``(|x| + x1)/conj(w0)`` and ``-(|x| - x1)/conj(w0)``.

    Raises
    ------
    PathThroughPole
        ``w0 = 0``, so a root sits at zero.
    """
    x = s.to_r3()
    w0 = s.w[0]
    if abs(w0) <= 1e-14 * max(1.0, float(np.linalg.norm(x))):
        raise PathThroughPole("section vanishes at zeta = 0")
    rr = float(np.linalg.norm(x))
    return (rr + x[0]) / np.conj(w0), -(rr - x[0]) / np.conj(w0)


# --- residues ----------------------------------------------------------------------


def residue_term(s) -> float:
    """Sum over the points above ``zeta = 0`` of ``Res eta^2 / (2 zeta^3)``.

    For an O(2) multiplet this is ``(w1^2 + 2 w0 w2)/2``.  For a spectral curve
    it is the ``zeta^2`` coefficient of ``(p1^2 - 2 p2)/2``, the power sum of
    the sheets.

    Raises
    ------
    BranchAtZero
        The curve is singular above ``zeta = 0``.
    """
    if isinstance(s, Multiplet):
        if s.k != 1:
            raise ValueError("use the spectral curve of a higher-order multiplet")
        w = s.w
        return float(((w[1] ** 2 + 2 * w[0] * w[2]) / 2).real)
    curve: SpectralCurve = s
    _check_smooth_over_zero(curve)
    p1 = np.zeros(5, dtype=complex)
    p1[:3] = curve.p[0]
    power2 = np.convolve(p1, p1)[:5]
    if curve.k >= 2:
        power2[: curve.p[1].size] -= 2 * curve.p[1]
    return float((power2[2] / 2).real)


def _check_smooth_over_zero(curve: SpectralCurve):
    c0 = np.array([1.0] + [p[0] for p in curve.p], dtype=complex)
    c1 = np.array([0.0] + [p[1] for p in curve.p], dtype=complex)
    scale = max(1.0, float(np.max(np.abs(c0))))
    for eta in np.roots(c0) if curve.k > 1 else [-c0[1]]:
        d_eta = np.polyval(np.polyder(c0), eta) if curve.k > 1 else 1.0
        d_zeta = np.polyval(c1, eta)
        if abs(d_eta) < 1e-10 * scale and abs(d_zeta) < 1e-10 * scale:
            raise BranchAtZero(f"spectral curve singular at (0, {eta:.6g})")


# --- paths -------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    a: complex
    b: complex

    def point(self, t):
        return self.a + (self.b - self.a) * t

    def velocity(self, t):
        return self.b - self.a


@dataclass(frozen=True)
class Arc:
    """Arc of ``|zeta| = radius`` from angle ``theta0`` sweeping ``sweep`` radians."""

    radius: float
    theta0: float
    sweep: float

    def point(self, t):
        return self.radius * np.exp(1j * (self.theta0 + self.sweep * t))

    def velocity(self, t):
        return 1j * self.sweep * self.point(t)


def principal_path(start: complex, end: complex, side: int = 1, windings: int = 0,
                   radius: float | None = None) -> list:
    """Straight segment from ``start`` to ``end``, detoured around zero when it passes close.

    The detour is an arc of radius ``0.1 min(|start|, |end|)``, traversed
    counterclockwise for ``side = 1`` and clockwise for ``side = -1``.
    ``windings`` extra counterclockwise turns around zero are inserted.

    Raises
    ------
    PathThroughPole
        An endpoint is zero or infinite.
    """
    start, end = complex(start), complex(end)
    if not (np.isfinite(start) and np.isfinite(end)) or min(abs(start), abs(end)) < 1e-14:
        raise PathThroughPole(f"endpoint at a pole: {start}, {end}")
    rho = DETOUR_FRACTION * min(abs(start), abs(end)) if radius is None else radius
    d = end - start
    t_star = float(np.clip(-(np.conj(d) * start).real / abs(d) ** 2, 0.0, 1.0)) if abs(d) else 0.0
    closest = start + t_star * d
    if abs(closest) >= rho:
        if windings == 0:
            return [Segment(start, end)]
        loop = Arc(abs(closest), float(np.angle(closest)), 2 * np.pi * windings)
        return [Segment(start, closest), loop, Segment(closest, end)]
    # |start + t d| = rho
    A = abs(d) ** 2
    B = 2 * (np.conj(d) * start).real
    C = abs(start) ** 2 - rho ** 2
    disc = np.sqrt(max(B * B - 4 * A * C, 0.0))
    t_in, t_out = (-B - disc) / (2 * A), (-B + disc) / (2 * A)
    p_in, p_out = start + t_in * d, start + t_out * d
    th_in, th_out = float(np.angle(p_in)), float(np.angle(p_out))
    ccw = (th_out - th_in) % (2 * np.pi)
    sweep = ccw if side > 0 else ccw - 2 * np.pi
    sweep += 2 * np.pi * windings
    arc = Arc(rho, th_in, sweep)
    # join the pieces at the arc's own endpoints so the path is continuous to rounding
    return [Segment(start, complex(arc.point(0.0))), arc, Segment(complex(arc.point(1.0)), end)]


INTEGRANDS = {
    "eta": lambda eta, z: eta / (2 * z * z),
    "eta2": lambda eta, z: eta * eta / (2 * z ** 3),
}


def _integrate_piece(piece, eta_fn, kernel) -> complex:
    def f(t):
        z = piece.point(t)
        return kernel(eta_fn(z), z) * piece.velocity(t)

    with warnings.catch_warnings():
        # parts that vanish identically trip the roundoff detector
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(f, 0.0, 1.0, complex_func=True, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    return complex(val)


def path_integral(s: Multiplet, start: complex, end: complex, integrand: str = "eta",
                  side: int = 1, windings: int = 0) -> complex:
    """``int eta/(2 zeta^2) dzeta`` (or ``eta^2/(2 zeta^3)``) along the principal path on a section.

    Adaptive Gauss-Kronrod quadrature on each straight or circular piece.
    """
    kernel = INTEGRANDS[integrand]
    return sum(_integrate_piece(p, s, kernel) for p in principal_path(start, end, side, windings))


def continue_sheet(curve: SpectralCurve, path, eta_start: complex, max_depth: int = 12) -> np.ndarray:
    """Track one root ``eta`` of ``P(zeta, eta) = 0`` along the samples ``path``.

    Each step Newton-polishes the previous value on the new fiber and checks
    that it lands on the root nearest to the previous value.  Steps are halved
    when the root moves by more than a third of the gap to its neighbours.

    Raises
    ------
    SheetCollision
        Two roots come within ``1e-8`` of each other.
    """
    path = np.asarray(path, dtype=complex)
    if curve.k == 1:
        return np.array([curve.fiber(z)[0] for z in path])
    out = [complex(eta_start)]

    def step(z0, z1, eta0, depth):
        roots = curve.fiber(z1)
        dist = np.abs(roots - eta0)
        order = np.argsort(dist)
        gaps = np.abs(roots[order[0]] - np.delete(roots, order[0]))
        gap = float(np.min(gaps))
        if gap < COLLISION_DISTANCE:
            raise SheetCollision(f"sheets meet near zeta = {z1:.6g}")
        if dist[order[0]] > gap / 3:
            if depth >= max_depth:
                raise SheetCollision(f"cannot separate sheets near zeta = {z1:.6g}")
            zm = (z0 + z1) / 2
            em = step(z0, zm, eta0, depth + 1)
            return step(zm, z1, em, depth + 1)
        eta = _newton_fiber(curve, z1, eta0)
        if np.argmin(np.abs(roots - eta)) != order[0]:
            raise SheetCollision(f"Newton left the tracked sheet near zeta = {z1:.6g}")
        return eta

    for z0, z1 in zip(path[:-1], path[1:]):
        out.append(step(z0, z1, out[-1], 0))
    return np.array(out)


def _newton_fiber(curve: SpectralCurve, zeta, eta, steps: int = 3) -> complex:
    c = curve.coefficients_at(zeta)
    dc = np.polyder(c)
    for _ in range(steps):
        d = np.polyval(dc, eta)
        if d == 0:
            break
        eta = eta - np.polyval(c, eta) / d
    return complex(eta)


def curve_path_integral(curve: SpectralCurve, start: complex, end: complex, eta_start: complex,
                        integrand: str = "eta", side: int = 1, windings: int = 0,
                        panels: int = 64, order: int = 8) -> complex:
    """Line integral on a tracked sheet of a spectral curve.

    Composite Gauss-Legendre on each path piece, with ``eta`` carried by
    :func:`continue_sheet` through the ordered nodes.
    """
    kernel = INTEGRANDS[integrand]
    x, wts = np.polynomial.legendre.leggauss(order)
    x, wts = (x + 1) / 2, wts / 2
    total = 0j
    eta = eta_start
    z_prev = complex(start)
    for piece in principal_path(start, end, side, windings):
        edges = np.linspace(0.0, 1.0, panels + 1)
        ts = np.concatenate([a + (b - a) * x for a, b in zip(edges[:-1], edges[1:])])
        ws = np.concatenate([(b - a) * wts for a, b in zip(edges[:-1], edges[1:])])
        zs = piece.point(ts)
        etas = continue_sheet(curve, np.concatenate([[z_prev], zs, [piece.point(1.0)]]), eta)
        total += np.sum(ws * kernel(etas[1:-1], zs) * piece.velocity(ts))
        eta, z_prev = etas[-1], piece.point(1.0)
    return complex(total)


# --- contour plans -----------------------------------------------------------------


@dataclass(frozen=True)
class Leg:
    """One piece of the chain ``gamma``.

    ``kind`` is ``"delta"`` (section ``a`` between its own roots), ``"pair"``
    (the difference of extended sections ``a - b`` between its roots),
    ``"eta0"`` (a leg on the line ``eta = 0``, contributing nothing) or
    ``"curve"`` (explicit endpoints on a tracked sheet of curve ``a``).
    ``side`` 0 averages both detour sides.
    """

    kind: str
    a: int = 0
    b: int = 0
    side: int = 0
    windings: int = 0
    weight: float = 1.0
    start: complex | None = None
    end: complex | None = None
    eta_start: complex | None = None


@dataclass(frozen=True)
class ContourPlan:
    """Legs of ``gamma`` and residue weights ``(section index, interval length)``."""

    legs: tuple
    residues: tuple

    def windings(self) -> list:
        return [leg.windings for leg in self.legs]


def extended_sections(config: BowConfig, sections: Sequence[Multiplet]) -> list:
    """``[S_c + c_L, S_1, .., S_{r-1}, S_c + c_R]`` for O(2) sections ``[S_c, S_1, .., S_{r-1}]``."""
    Sc = sections[0]
    return [shift_section(Sc, config.cL), *sections[1:], shift_section(Sc, config.cR)]


def default_plan(config: BowConfig, sections: Sequence[Multiplet]) -> ContourPlan:
    """Standard chain for rank one.

    One leg on ``S_c`` from ``Delta_A`` to ``Delta_B``, a zero leg back along
    ``eta = 0``, and for ``r >= 2`` one leg per adjacent pair of extended
    sections.  For ``r = 1`` the two pair legs on ``S_c`` cancel.
    """
    if config.k != 1 or any(s.k != 1 for s in sections):
        raise NotImplementedError("automatic contour plans exist only for rank one; pass a plan")
    if len(sections) != config.r:
        raise ValueError(f"expected r = {config.r} sections (S_c, S_1..S_r-1)")
    legs = [Leg("delta", a=0), Leg("eta0")]
    if config.r >= 2:
        legs += [Leg("pair", a=i, b=i + 1) for i in range(config.r)]
    mu = config.mu
    residues = [(0, float(mu[-1] - mu[-2] + mu[1] - mu[0]))]
    residues += [(i, float(mu[i + 1] - mu[i])) for i in range(1, config.r)]
    return ContourPlan(tuple(legs), tuple(residues))


def _section_leg(s: Multiplet, leg: Leg) -> complex:
    za, zb = delta_endpoints(s)
    if leg.side:
        return path_integral(s, za, zb, "eta", leg.side, leg.windings)
    # averaging the detour sides: shared straight pieces, two arcs
    pieces_p = principal_path(za, zb, 1, leg.windings)
    pieces_m = principal_path(za, zb, -1, leg.windings)
    kernel = INTEGRANDS["eta"]
    if len(pieces_p) == 1:
        return _integrate_piece(pieces_p[0], s, kernel)
    straight = _integrate_piece(pieces_p[0], s, kernel) + _integrate_piece(pieces_p[2], s, kernel)
    arcs = _integrate_piece(pieces_p[1], s, kernel) + _integrate_piece(pieces_m[1], s, kernel)
    return straight + arcs / 2


def leg_value(config: BowConfig, sections, leg: Leg) -> complex:
    if leg.kind == "eta0":
        return 0j
    if leg.kind == "delta":
        return _section_leg(sections[leg.a], leg)
    if leg.kind == "pair":
        ext = extended_sections(config, sections)
        diff = ext[leg.a] - ext[leg.b]
        if np.max(np.abs(diff.w)) <= 1e-14:
            raise CoincidentSections(f"extended sections {leg.a} and {leg.b} coincide")
        return _section_leg(diff, leg)
    if leg.kind == "curve":
        curve = sections[leg.a]
        sides = (leg.side,) if leg.side else (1, -1)
        return sum(curve_path_integral(curve, leg.start, leg.end, leg.eta_start, "eta", s, leg.windings)
                   for s in sides) / len(sides)
    raise ValueError(f"unknown leg kind {leg.kind!r}")


def build_F(config: BowConfig, sections, plan: ContourPlan | None = None, imag_tol: float = 1e-8) -> float:
    """Sum of the weighted leg integrals minus interval-weighted residue terms.

    Raises
    ------
    ValueError
        The total has an imaginary part above ``imag_tol``.
    """
    plan = default_plan(config, sections) if plan is None else plan
    total = sum(leg.weight * leg_value(config, sections, leg) for leg in plan.legs)
    total -= sum(weight * residue_term(sections[i]) for i, weight in plan.residues)
    total = complex(total)
    if abs(total.imag) > imag_tol * max(1.0, abs(total.real)):
        raise ValueError(f"F has imaginary part {total.imag:.3g}; contour plan is not sigma-symmetric")
    return total.real


# --- constraints and Legendre transform --------------------------------------------


@dataclass
class ConstraintResult:
    multiplets: list
    iterations: int
    residual: float


def solve_constraints(Fnum: Callable, multiplets: Sequence[Multiplet], tol: float = 1e-9,
                      max_iter: int = 50) -> ConstraintResult:
    """Newton on ``dF/dw_a = 0`` for ``a = 2..2k-2`` of every multiplet.

    Unknowns are the independent real parts of ``w_2..w_k``; gradient and
    Hessian are central differences with step ``1e-5 * scale``.

    Raises
    ------
    ConstraintSolveFailed
        No convergence within ``max_iter`` iterations.
    """
    multiplets = list(multiplets)
    sizes = [m.constrained_params().size for m in multiplets]
    if sum(sizes) == 0:
        return ConstraintResult(multiplets, 0, 0.0)

    def unpack(p):
        out, i = [], 0
        for m, n in zip(multiplets, sizes):
            out.append(m.with_constrained(p[i:i + n]) if n else m)
            i += n
        return out

    def f(p):
        return Fnum(unpack(p))

    p = np.concatenate([m.constrained_params() for m in multiplets])
    scale = max(1.0, float(max(np.max(np.abs(m.w)) for m in multiplets)))
    h = FD_STEP * scale
    n = p.size
    E = np.eye(n) * h

    def grad(p):
        return np.array([(f(p + E[i]) - f(p - E[i])) / (2 * h) for i in range(n)])

    for it in range(1, max_iter + 1):
        g = grad(p)
        res = float(np.max(np.abs(g)))
        if res < tol and it > 1:
            return ConstraintResult(unpack(p), it - 1, res)
        H = np.empty((n, n))
        f0 = f(p)
        for i in range(n):
            H[i, i] = (f(p + E[i]) - 2 * f0 + f(p - E[i])) / h ** 2
            for j in range(i + 1, n):
                H[i, j] = H[j, i] = (f(p + E[i] + E[j]) - f(p + E[i] - E[j])
                                     - f(p - E[i] + E[j]) + f(p - E[i] - E[j])) / (4 * h * h)
        try:
            p = p - np.linalg.solve(H, g)
        except np.linalg.LinAlgError as exc:
            raise ConstraintSolveFailed(f"singular constraint Hessian at iteration {it}") from exc
        if res < tol:
            return ConstraintResult(unpack(p), it, res)
    raise ConstraintSolveFailed(f"constraints not solved after {max_iter} iterations (residual {res:.3g})")


@dataclass(frozen=True)
class GLTResult:
    """``F``, ``u``, ``K`` and the sections at which they were evaluated."""

    F: float
    u: np.ndarray
    K: float
    sections: tuple
    z: np.ndarray
    windings: tuple = ()


def _dF_dw1(Fnum: Callable, sections: list, i: int, h: float) -> float:
    def moved(t):
        s = list(sections)
        w = s[i].w.copy()
        w[1] += t
        s[i] = Multiplet(s[i].k, w)
        return s

    return (Fnum(moved(h)) - Fnum(moved(-h))) / (2 * h)


def kahler_potential(config: BowConfig, sections, plan: ContourPlan | None = None,
                     Fnum: Callable | None = None) -> GLTResult:
    """Solve the constraints, then ``K = F - 2 sum Re(u_i w_i1)`` with ``Re u_i = F_{w_i1}/2``.

    ``Im u_i`` is a fiber coordinate and is set to zero.
    """
    if Fnum is None:
        Fnum = lambda s: build_F(config, s, plan)  # noqa: E731
    sections = solve_constraints(Fnum, sections).multiplets
    F = Fnum(sections)
    scale = max(1.0, float(max(np.max(np.abs(m.w)) for m in sections)))
    u = np.array([_dF_dw1(Fnum, sections, i, FD_STEP * scale) / 2 for i in range(len(sections))],
                 dtype=complex)
    K = F - 2 * sum((ui * s.w[1]).real for ui, s in zip(u, sections))
    windings = tuple(plan.windings()) if plan is not None else ()
    return GLTResult(F, u, K, tuple(sections), np.array([s.w[0] for s in sections]), windings)


class KSampler:
    """``K`` as a function of the complex coordinates ``(z_1..z_n, u_1..u_n)`` for O(2) multiplets.

    For given ``z`` the real ``w_i1`` solve ``dF/dw_i1 = u_i + conj(u_i)``
    (Newton, central-difference derivatives, warm-started from the previous
    call).  Values are cached on ``(z, Re u)`` since ``K`` does not depend on
    ``Im u``.
    """

    def __init__(self, Fnum: Callable, n: int, w1_guess=None, tol: float = 1e-8, max_iter: int = 50):
        self.Fnum = Fnum
        self.n = n
        self.w1 = np.zeros(n) if w1_guess is None else np.array(w1_guess, dtype=float)
        self.tol = tol
        self.max_iter = max_iter
        self._hess = None
        self._cache = {}
        self.evaluations = 0

    def sections(self, z, w1) -> list:
        return [Multiplet(1, [zi, wi, -np.conj(zi)]) for zi, wi in zip(z, w1)]

    def F(self, z, w1) -> float:
        self.evaluations += 1
        return self.Fnum(self.sections(z, w1))

    def gradient(self, z, w1, h=FD_STEP) -> np.ndarray:
        E = np.eye(self.n) * h
        return np.array([(self.F(z, w1 + E[i]) - self.F(z, w1 - E[i])) / (2 * h) for i in range(self.n)])

    def hessian(self, z, w1, h=1e-4) -> np.ndarray:
        n = self.n
        E = np.eye(n) * h
        H = np.empty((n, n))
        f0 = self.F(z, w1)
        for i in range(n):
            H[i, i] = (self.F(z, w1 + E[i]) - 2 * f0 + self.F(z, w1 - E[i])) / h ** 2
            for j in range(i + 1, n):
                H[i, j] = H[j, i] = (self.F(z, w1 + E[i] + E[j]) - self.F(z, w1 + E[i] - E[j])
                                     - self.F(z, w1 - E[i] + E[j]) + self.F(z, w1 - E[i] - E[j])) / (4 * h * h)
        return H

    def solve_w1(self, z, rho) -> np.ndarray:
        """Real ``w_i1`` with ``dF/dw_i1 = rho_i``."""
        w1 = self.w1.copy()
        if self._hess is None:
            self._hess = self.hessian(z, w1)
        for it in range(self.max_iter):
            g = self.gradient(z, w1) - rho
            if np.max(np.abs(g)) < self.tol * max(1.0, float(np.max(np.abs(rho)))):
                self.w1 = w1
                return w1
            step = np.linalg.solve(self._hess, g)
            w1 = w1 - step
            if it == 5:  # slow chord convergence: refresh the slope
                self._hess = self.hessian(z, w1)
        raise ConstraintSolveFailed("Legendre condition dF/dw1 = u + conj(u) not solved")

    def __call__(self, coords) -> float:
        coords = np.asarray(coords, dtype=complex)
        z, u = coords[: self.n], coords[self.n:]
        rho = 2 * u.real
        key = tuple(np.concatenate([z.real, z.imag, rho]).tolist())
        if key not in self._cache:
            w1 = self.solve_w1(z, rho)
            self._cache[key] = self.F(z, w1) - float(rho @ w1)
        return self._cache[key]


def real_hessian(f: Callable, x0, h: float = 1e-3, richardson: bool = True) -> np.ndarray:
    """Central-difference Hessian of a real function of real variables, optionally Richardson-refined."""
    x0 = np.asarray(x0, dtype=float)

    def hess(h):
        n = x0.size
        E = np.eye(n) * h
        f0 = f(x0)
        H = np.empty((n, n))
        for i in range(n):
            H[i, i] = (f(x0 + E[i]) - 2 * f0 + f(x0 - E[i])) / h ** 2
            for j in range(i + 1, n):
                H[i, j] = H[j, i] = (f(x0 + E[i] + E[j]) - f(x0 + E[i] - E[j])
                                     - f(x0 - E[i] + E[j]) + f(x0 - E[i] - E[j])) / (4 * h * h)
        return H

    if not richardson:
        return hess(h)
    return (4 * hess(h / 2) - hess(h)) / 3


def metric_from_K(Ksampler: Callable, point, h: float = 1e-3, check: bool = True) -> np.ndarray:
    """``g_{i jbar} = d^2 K / dz_i dconj(z_j)`` by finite differences.

    With ``z = x + i y``,
    ``g = (K_xx + K_yy + i (K_xy - K_yx)) / 4``; Hermiticity is enforced by
    averaging.

    Raises
    ------
    IndefiniteMetric
        ``check`` is set and an eigenvalue is not positive.
    """
    point = np.asarray(point, dtype=complex)
    n = point.size
    H = real_hessian(lambda v: Ksampler(v[:n] + 1j * v[n:]), np.concatenate([point.real, point.imag]), h)
    Hxx, Hxy, Hyx, Hyy = H[:n, :n], H[:n, n:], H[n:, :n], H[n:, n:]
    g = (Hxx + Hyy + 1j * (Hxy - Hyx)) / 4
    g = (g + g.conj().T) / 2
    if check:
        ev = np.linalg.eigvalsh(g)
        if ev[0] <= 0:
            raise IndefiniteMetric(f"Kaehler metric has eigenvalue {ev[0]:.3g}")
    return g


# --- Gibbons-Hawking frame ---------------------------------------------------------


def gh_config(config: BowConfig) -> BowConfig:
    """Configuration whose Gibbons-Hawking points match the rank-one sections: ``c_L``, ``c_R`` doubled."""
    return BowConfig(config.k, config.r, config.mu, 2 * config.cL, 2 * config.cR)


@dataclass(frozen=True)
class GHFrameMetric:
    """Rank-one GLT metric split as ``base + (dt + A)^T killing (dt + A)``.

    ``killing`` is the ``r x r`` metric on the fiber directions ``t = 2 Im u``;
    ``base`` the ``3r x 3r`` horizontal metric in the coordinates ``y = 2 x``
    of the sections, ordered point by point.
    """

    killing: np.ndarray
    base: np.ndarray
    metric: np.ndarray
    K: float


def gh_frame_metric(config: BowConfig, y, plan: ContourPlan | None = None, h: float = 1e-3,
                    jac_step: float = 1e-4) -> GHFrameMetric:
    """Evaluate the GLT metric of a rank-one configuration at Gibbons-Hawking points ``y`` (r x 3).

    The Kaehler metric ``g`` in ``(z, u)`` is turned into the real metric
    ``2 [[Re g, Im g], [-Im g, Re g]]``; the ``Im u`` block is the Killing
    block and its Schur complement, pulled back along
    ``y -> (Re z, Im z, Re u)``, is the base metric.
    """
    y = np.asarray(y, dtype=float).reshape(config.r, 3)
    n = config.r
    Fnum = lambda s: build_F(config, s, plan)  # noqa: E731
    sections = [Multiplet.from_r3(p / 2) for p in y]
    res = kahler_potential(config, sections, plan, Fnum)
    sampler = KSampler(Fnum, n, [s.w[1].real for s in sections])
    g = metric_from_K(sampler, np.concatenate([res.z, res.u]), h)
    G = 2 * np.block([[g.real, g.imag], [-g.imag, g.real]])
    # real coordinates: Re z (n), Re u (n), Im z (n), Im u (n)
    kill_idx = list(range(3 * n, 4 * n))
    base_idx = [j for i in range(n) for j in (i, 2 * n + i)] + list(range(n, 2 * n))
    Gkk = G[np.ix_(kill_idx, kill_idx)]
    Gbk = G[np.ix_(base_idx, kill_idx)]
    schur = G[np.ix_(base_idx, base_idx)] - Gbk @ np.linalg.solve(Gkk, Gbk.T)

    def chart(Y):
        secs = [Multiplet.from_r3(p / 2) for p in Y.reshape(n, 3)]
        zs = [v for s in secs for v in (s.w[0].real, s.w[0].imag)]
        return np.array(zs + [_dF_dw1(Fnum, secs, i, FD_STEP) / 2 for i in range(n)])

    Y0 = y.ravel()
    E = np.eye(3 * n) * jac_step
    J = np.array([(chart(Y0 + e) - chart(Y0 - e)) / (2 * jac_step) for e in E]).T
    # fiber t = 2 Im u rescales the Killing block by 1/4
    return GHFrameMetric(Gkk / 4, J.T @ schur @ J, g, res.K)
