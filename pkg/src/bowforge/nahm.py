"""Nahm's equations as an isospectral flow, with bow jump and boundary data.

Triples ``(T1, T2, T3)`` are stored as skew-Hermitian matrices.  They assemble
into the reality-form polynomial
``T(zeta) = (T2 + i T3) + 2 i T1 zeta + (T2 - i T3) zeta**2``, whose spectral
curve is conserved by the flow ``T1' = -[T2, T3]`` (and cyclic).

At a lambda-point the complex part ``beta = T2 + i T3`` jumps by ``I J`` and
``T1`` by ``-(i/2)(I I^* - J^* J)``, so that ``T(zeta)`` jumps by
``(I - J^* zeta)(J + I^* zeta)``, a rank-one matrix for every ``zeta``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NonConstantBeta, StepOverflow
from .factor import FactorPair, moment_mu, moment_nu, r3_quadratic
from .matpoly import QuadMatPoly, char_coefficient_grid, char_curve

logger = logging.getLogger(__name__)

OVERFLOW_NORM = 1e12


def _skew(X: np.ndarray) -> np.ndarray:
    return (X - np.swapaxes(X.conj(), -1, -2)) / 2


@dataclass(frozen=True)
class NahmTriple:
    """Three ``k x k`` skew-Hermitian matrices."""

    T1: np.ndarray
    T2: np.ndarray
    T3: np.ndarray

    def __post_init__(self):
        mats = [np.atleast_2d(np.array(m, dtype=complex)) for m in (self.T1, self.T2, self.T3)]
        shape = mats[0].shape
        if shape[0] != shape[1] or any(m.shape != shape for m in mats):
            raise ValueError("T1, T2, T3 must be square of equal size")
        for name, m in zip(("T1", "T2", "T3"), mats):
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def k(self) -> int:
        return self.T1.shape[0]

    def as_array(self) -> np.ndarray:
        return np.stack([self.T1, self.T2, self.T3])

    @classmethod
    def from_array(cls, arr) -> "NahmTriple":
        return cls(arr[0], arr[1], arr[2])

    def hermitian_part(self) -> float:
        """Largest entry of ``(T_i + T_i^*)/2`` over the three matrices."""
        X = self.as_array()
        return float(np.max(np.abs(X + np.swapaxes(X.conj(), -1, -2)))) / 2

    def conjugated(self, h: np.ndarray) -> "NahmTriple":
        """``T_i -> h T_i h^{-1}``."""
        hinv = np.linalg.inv(h)
        return NahmTriple(*(h @ T @ hinv for T in (self.T1, self.T2, self.T3)))


def _rhs_array(X: np.ndarray) -> np.ndarray:
    T1, T2, T3 = X
    return np.stack([-(T2 @ T3 - T3 @ T2), -(T3 @ T1 - T1 @ T3), -(T1 @ T2 - T2 @ T1)])


def nahm_rhs(t: NahmTriple) -> NahmTriple:
    """``(-[T2, T3], -[T3, T1], -[T1, T2])``."""
    return NahmTriple.from_array(_rhs_array(t.as_array()))


@dataclass(frozen=True)
class Trajectory:
    """Samples of a Nahm flow on a uniform grid."""

    t: np.ndarray
    samples: np.ndarray  # (n + 1, 3, k, k)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> NahmTriple:
        return NahmTriple.from_array(self.samples[i])

    @property
    def first(self) -> NahmTriple:
        return self[0]

    @property
    def last(self) -> NahmTriple:
        return self[-1]

    def curve_drift(self) -> float:
        """Max deviation of the spectral-curve coefficients from those of the first sample."""
        X = self.samples
        coeffs = np.stack([X[:, 1] + 1j * X[:, 2], 2j * X[:, 0], X[:, 1] - 1j * X[:, 2]], axis=1)
        grid = char_coefficient_grid(coeffs)
        k = X.shape[-1]
        m, j = np.indices(grid.shape[1:])
        valid = (j < k) & (m <= 2 * (k - j))
        return float(np.max(np.abs(grid - grid[0])[:, valid]))


def integrate(t0: NahmTriple, t_span, steps: int) -> Trajectory:
    """Classical RK4 with fixed step, skew-Hermitizing after every step.

    Raises
    ------
    StepOverflow
        A sample norm exceeds ``1e12`` (finite-time blow-up).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    a, b = map(float, t_span)
    h = (b - a) / steps
    X = t0.as_array().copy()
    out = np.empty((steps + 1,) + X.shape, dtype=complex)
    out[0] = X
    for n in range(steps):
        k1 = _rhs_array(X)
        k2 = _rhs_array(X + h / 2 * k1)
        k3 = _rhs_array(X + h / 2 * k2)
        k4 = _rhs_array(X + h * k3)
        X = _skew(X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
        norm = np.max(np.abs(X))
        if not np.isfinite(norm) or norm > OVERFLOW_NORM:
            raise StepOverflow(f"solution norm {norm:.3g} at t = {a + (n + 1) * h:.6g}")
        out[n + 1] = X
    return Trajectory(np.linspace(a, b, steps + 1), out)


def assemble_T(t: NahmTriple) -> QuadMatPoly:
    """``(T2 + i T3) + 2 i T1 zeta + (T2 - i T3) zeta**2``."""
    return QuadMatPoly(t.T2 + 1j * t.T3, 2j * t.T1, t.T2 - 1j * t.T3)


def disassemble_T(P: QuadMatPoly) -> NahmTriple:
    """Inverse of :func:`assemble_T` on reality-form polynomials."""
    return NahmTriple(P.A1 / 2j, (P.A0 + P.A2) / 2, (P.A0 - P.A2) / 2j)


def jump_polynomial(I, J) -> QuadMatPoly:
    """``(I - J^* zeta)(J + I^* zeta)`` for a column ``I`` and a row ``J``."""
    I = np.asarray(I, dtype=complex).reshape(-1, 1)
    J = np.asarray(J, dtype=complex).reshape(1, -1)
    Is, Js = I.conj().T, J.conj().T
    return QuadMatPoly(I @ J, I @ Is - Js @ J, -Js @ Is)


def apply_jump(left: NahmTriple, I, J) -> NahmTriple:
    """Right limit at a lambda-point carrying the vector ``I`` and covector ``J``."""
    I = np.asarray(I, dtype=complex).reshape(-1, 1)
    J = np.asarray(J, dtype=complex).reshape(1, -1)
    dbeta = I @ J
    dT1 = -0.5j * (I @ I.conj().T - J.conj().T @ J)
    # beta = T2 + i T3 with T2, T3 skew  =>  T2 = (beta - beta^*)/2, T3 = (beta + beta^*)/(2i)
    dT2 = (dbeta - dbeta.conj().T) / 2
    dT3 = (dbeta + dbeta.conj().T) / 2j
    return NahmTriple(left.T1 + dT1, left.T2 + dT2, left.T3 + dT3)


def pencil_rank_ratio(P: QuadMatPoly, nodes: int = 7) -> float:
    """Max over unit-circle nodes of ``s2/s1`` for ``P(zeta)``; zero for ``k = 1``."""
    if P.k == 1:
        return 0.0
    worst = 0.0
    for z in np.exp(2j * np.pi * (np.arange(nodes) + 0.25) / nodes):
        s = np.linalg.svd(P(z), compute_uv=False)
        worst = max(worst, s[1] / s[0] if s[0] > 0 else 0.0)
    return float(worst)


# --- bow data ----------------------------------------------------------------------


@dataclass(frozen=True)
class BowConfig:
    """Rank ``k``, ``r`` lambda-points ``mu[1..r]`` inside ``[mu[0], mu[r+1]]``, end points ``cL``, ``cR``."""

    k: int
    r: int
    mu: np.ndarray
    cL: np.ndarray = field(default_factory=lambda: np.zeros(3))
    cR: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).ravel()
        if self.k < 1 or self.r < 1:
            raise ValueError("need k >= 1 and r >= 1")
        if mu.size != self.r + 2:
            raise ValueError(f"mu must have r + 2 = {self.r + 2} entries, got {mu.size}")
        if np.any(np.diff(mu) < 0):
            raise ValueError("mu must be nondecreasing")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "cL", np.asarray(self.cL, dtype=float).reshape(3))
        object.__setattr__(self, "cR", np.asarray(self.cR, dtype=float).reshape(3))

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.mu)

    def c_poly(self, which: str) -> QuadMatPoly:
        """``c_L(zeta) Id`` or ``c_R(zeta) Id``."""
        x = self.cL if which == "L" else self.cR
        return QuadMatPoly.scalar(*r3_quadratic(x), k=self.k)


@dataclass(frozen=True)
class PiecewiseNahmSolution:
    """Samples on each of the ``r + 1`` intervals, end pair ``(A, B)`` and jump data.

    ``intervals[i]`` is a :class:`Trajectory` covering ``[mu[i], mu[i+1]]``;
    ``I[i]``, ``J[i]`` belong to the lambda-point ``mu[i+1]``.
    """

    config: BowConfig
    intervals: tuple
    pair: FactorPair
    I: np.ndarray
    J: np.ndarray

    def __post_init__(self):
        c = self.config
        if len(self.intervals) != c.r + 1:
            raise ValueError(f"need r + 1 = {c.r + 1} intervals")
        for i, tr in enumerate(self.intervals):
            if abs(tr.t[0] - c.mu[i]) > 1e-12 or abs(tr.t[-1] - c.mu[i + 1]) > 1e-12:
                raise ValueError(f"interval {i} grid does not cover [mu_{i}, mu_{i + 1}]")
        object.__setattr__(self, "intervals", tuple(self.intervals))
        object.__setattr__(self, "I", np.asarray(self.I, dtype=complex).reshape(c.r, c.k))
        object.__setattr__(self, "J", np.asarray(self.J, dtype=complex).reshape(c.r, c.k))


def shoot(config: BowConfig, start: NahmTriple, I, J, steps: int) -> list:
    """Integrate forward from ``start`` at ``mu[0]``, applying the jumps at each lambda-point.

    Returns one :class:`Trajectory` per interval.
    """
    I = np.asarray(I, dtype=complex).reshape(config.r, config.k)
    J = np.asarray(J, dtype=complex).reshape(config.r, config.k)
    out = []
    current = start
    for i in range(config.r + 1):
        tr = integrate(current, (config.mu[i], config.mu[i + 1]), steps)
        out.append(tr)
        if i < config.r:
            current = apply_jump(tr.last, I[i], J[i])
    return out


@dataclass
class BowReport:
    """Residuals of a candidate bow solution; all are max-entry norms."""

    nahm_residual: list
    jump_rank: list
    jump_data_residual: list
    left_end_residual: float
    right_end_residual: float
    curve_drift: list
    shift_residual: float

    def ok(self, tol: float) -> bool:
        vals = (self.nahm_residual + self.jump_rank + self.jump_data_residual + self.curve_drift
                + [self.left_end_residual, self.right_end_residual, self.shift_residual])
        return bool(max(vals) < tol)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def _nahm_residual(tr: Trajectory) -> float:
    if len(tr) < 3:
        return 0.0
    dX = np.gradient(tr.samples, tr.t, axis=0, edge_order=2)
    rhs = np.stack([_rhs_array(X) for X in tr.samples])
    return float(np.max(np.abs(dX - rhs)))


def verify_bow(sol: PiecewiseNahmSolution, tol: float = 1e-8) -> BowReport:
    """Check Nahm's equations, the jumps, the end conditions and the end-curve shift."""
    c = sol.config
    nahm_res = [_nahm_residual(tr) for tr in sol.intervals]
    drift = [tr.curve_drift() for tr in sol.intervals]
    ranks, data_res = [], []
    for i in range(c.r):
        left, right = sol.intervals[i].last, sol.intervals[i + 1].first
        dP = assemble_T(right) - assemble_T(left)
        ranks.append(pencil_rank_ratio(dP))
        data_res.append(float(np.max(np.abs((dP - jump_polynomial(sol.I[i], sol.J[i])).coeffs))))
    T_first = assemble_T(sol.intervals[0].first)
    T_last = assemble_T(sol.intervals[-1].last)
    left_target = -moment_nu(sol.pair) + c.c_poly("L")
    right_target = moment_mu(sol.pair) + c.c_poly("R")
    shift = QuadMatPoly.scalar(*r3_quadratic(c.cL - c.cR), k=c.k)
    shift_res = char_curve(T_last).max_deviation(char_curve(T_first - shift))
    report = BowReport(nahm_res, ranks, data_res, T_first.distance(left_target),
                       T_last.distance(right_target), drift, shift_res)
    if not report.ok(tol):
        logger.info("bow verification above tolerance %g: %s", tol, report)
    return report


# --- complex reduction -------------------------------------------------------------


@dataclass(frozen=True)
class ComplexReduction:
    """Constant ``beta_1..beta_{r+1}``, rank-one jump factors and the end gauge."""

    beta: tuple
    I: np.ndarray  # k x r
    J: np.ndarray  # r x k
    g_end: np.ndarray
    variation: float


def _transport(t: np.ndarray, alpha: np.ndarray, g0: np.ndarray) -> np.ndarray:
    """RK4 for ``g' = g alpha`` on the sample grid, ``alpha`` spline-interpolated at midpoints."""
    spline = CubicSpline(t, alpha, axis=0) if len(t) >= 4 else None
    g = np.empty((len(t),) + g0.shape, dtype=complex)
    g[0] = g0
    for n in range(len(t) - 1):
        h = t[n + 1] - t[n]
        a0, a1 = alpha[n], alpha[n + 1]
        am = spline(t[n] + h / 2) if spline is not None else (a0 + a1) / 2
        G = g[n]
        k1 = G @ a0
        k2 = (G + h / 2 * k1) @ am
        k3 = (G + h / 2 * k2) @ am
        k4 = (G + h * k3) @ a1
        g[n + 1] = G + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return g


def complex_reduce(sol: PiecewiseNahmSolution) -> ComplexReduction:
    """Gauge ``alpha = i T1`` away and read off constant ``beta`` per interval.

    Raises
    ------
    NonConstantBeta
        ``g beta g^{-1}`` varies within an interval by more than 100 times the
        Nahm residual bound of that interval.
    """
    c = sol.config
    k = c.k
    g = np.eye(k, dtype=complex)
    betas, worst = [], 0.0
    for i, tr in enumerate(sol.intervals):
        X = tr.samples
        alpha = 1j * X[:, 0]
        beta = X[:, 1] + 1j * X[:, 2]
        gs = _transport(tr.t, alpha, g)
        vals = np.stack([G @ b @ np.linalg.inv(G) for G, b in zip(gs, beta)])
        mean = vals.mean(axis=0)
        variation = float(np.max(np.abs(vals - mean)))
        scale = max(1.0, float(np.max(np.abs(mean))))
        bound = 100 * max(_nahm_residual(tr) * (tr.t[-1] - tr.t[0]), 1e-10 * scale)
        if variation > bound:
            raise NonConstantBeta(
                f"g beta g^-1 varies by {variation:.3g} on interval {i} (bound {bound:.3g})"
            )
        worst = max(worst, variation)
        betas.append(vals[-1] if len(vals) == 1 else mean)
        g = gs[-1]
    I = np.zeros((k, c.r), dtype=complex)
    J = np.zeros((c.r, k), dtype=complex)
    for i in range(c.r):
        u, s, vh = np.linalg.svd(betas[i + 1] - betas[i])
        I[:, i] = u[:, 0] * np.sqrt(s[0])
        J[i] = np.sqrt(s[0]) * vh[0]
    return ComplexReduction(tuple(betas), I, J, g, worst)
