"""Asymptotic Gibbons-Hawking-type metric assembled from building blocks.

Each lambda-point ``i = 1..r`` carries a building block with ``k`` points on
its left interval and ``k`` on its right one.  Its ``2k x 2k`` potential is

    Phi_ii = a_sgn(i) + sum_{m != i} s_im / |x_i - x_m|,   Phi_ij = -s_ij / |x_i - x_j|,

with ``s_ij = -sgn(i) sgn(j)``.  The blocks are summed into an ``rk x rk``
matrix indexed by slots of ``k`` points each: slot 1 holds ``y_1..y_k`` (the
points of the two end intervals, glued through ``c_L`` and ``c_R``) and slot
``s >= 2`` holds the points ``x_{s-1, j}`` of interior interval ``s - 1``.
The ``y`` slot also receives ``diag(1/|y_j|)``.

Every pairwise term has the form ``s * l l^T / |u|`` where ``l`` is a
difference of slot-point unit vectors (zero when both ends share a slot
point) and ``u = l . X + const``.  Writing ``Phi`` this way gives the
connection directly: ``A = sum s l w(u) . du`` with ``w`` a Dirac potential,
``curl w = grad(1/|u|)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoincidentPoints, OnDiracString, SingularPhi
from .nahm import BowConfig

MIN_DISTANCE = 1e-12


@dataclass(frozen=True)
class PointConfig:
    """Points ``y`` (k x 3) and ``x`` ((r-1) x k x 3) with the a-split of each interval.

    ``a_minus[i-1]``, ``a_plus[i-1]`` belong to building block ``i``.  When
    omitted, the end intervals go wholly to their single block and interior
    intervals are split in half.
    """

    config: BowConfig
    y: np.ndarray
    x: np.ndarray | None = None
    a_minus: np.ndarray | None = None
    a_plus: np.ndarray | None = None

    def __post_init__(self):
        c = self.config
        y = np.asarray(self.y, dtype=float).reshape(c.k, 3)
        x = np.zeros((c.r - 1, c.k, 3)) if self.x is None else np.asarray(self.x, dtype=float)
        x = x.reshape(c.r - 1, c.k, 3)
        L = c.lengths
        if self.a_minus is None or self.a_plus is None:
            am = np.empty(c.r)
            ap = np.empty(c.r)
            am[0] = L[0]
            ap[-1] = L[-1]
            am[1:] = L[1:-1] / 2
            ap[:-1] = L[1:-1] / 2
        else:
            am = np.asarray(self.a_minus, dtype=float).reshape(c.r)
            ap = np.asarray(self.a_plus, dtype=float).reshape(c.r)
        if np.any(am < 0) or np.any(ap < 0):
            raise ValueError("a_minus and a_plus must be nonnegative")
        # a_+^i + a_-^{i+1} = mu_{i+1} - mu_i with a_+^0 = a_-^{r+1} = 0
        sums = np.concatenate([[am[0]], ap[:-1] + am[1:], [ap[-1]]])
        if not np.allclose(sums, L, rtol=1e-12, atol=1e-12):
            raise ValueError("a-split does not match the interval lengths")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a_minus", am)
        object.__setattr__(self, "a_plus", ap)

    @property
    def k(self) -> int:
        return self.config.k

    @property
    def r(self) -> int:
        return self.config.r

    def base_points(self) -> np.ndarray:
        """Slot-ordered ``(rk, 3)`` array: ``y`` first, then each interior interval."""
        return np.concatenate([self.y, self.x.reshape(-1, 3)])

    def with_base_points(self, X) -> "PointConfig":
        X = np.asarray(X, dtype=float).reshape(self.r * self.k, 3)
        return PointConfig(self.config, X[: self.k], X[self.k:].reshape(self.r - 1, self.k, 3),
                           self.a_minus, self.a_plus)


# --- building blocks ---------------------------------------------------------------


def _pair_sign(i: int, j: int, k: int) -> int:
    """``s_ij = -sgn(i) sgn(j)`` with indices ``0..k-1`` negative and ``k..2k-1`` positive."""
    si = -1 if i < k else 1
    sj = -1 if j < k else 1
    return -si * sj


def phi_block(a_minus: float, a_plus: float, xm, xp) -> np.ndarray:
    """Potential matrix of one building block, indices ordered ``(-k..-1, +1..+k)``.

    Raises
    ------
    CoincidentPoints
        Two of the ``2k`` points are closer than ``1e-12``.
    """
    pts = np.concatenate([np.asarray(xm, dtype=float).reshape(-1, 3),
                          np.asarray(xp, dtype=float).reshape(-1, 3)])
    k = len(pts) // 2
    Phi = np.diag(np.concatenate([np.full(k, float(a_minus)), np.full(k, float(a_plus))]))
    for i in range(2 * k):
        for j in range(i + 1, 2 * k):
            d = float(np.linalg.norm(pts[i] - pts[j]))
            if d < MIN_DISTANCE:
                raise CoincidentPoints(f"block points {i} and {j} coincide (distance {d:.3g})")
            s = _pair_sign(i, j, k)
            Phi[i, i] += s / d
            Phi[j, j] += s / d
            Phi[i, j] -= s / d
            Phi[j, i] -= s / d
    return Phi


def _slot(i: int, side: int, r: int) -> int:
    """0-based slot of side ``side`` (0 = minus, 1 = plus) of block ``i`` (1-based)."""
    return (i - 1 + side) % r


def assemble_psi(i: int, phi_i: np.ndarray, r: int, k: int) -> np.ndarray:
    """Place the four ``k x k`` blocks of ``phi_i`` into an ``rk x rk`` matrix.

    Side ``s`` of block ``i`` lands in slot ``i + s - 1`` (1-based, ``s = 1``
    minus, ``s = 2`` plus), with slot ``r + 1`` wrapping to the ``y`` slot.
    """
    Psi = np.zeros((r * k, r * k))
    for s in range(2):
        for t in range(2):
            m, n = _slot(i, s, r), _slot(i, t, r)
            Psi[m * k:(m + 1) * k, n * k:(n + 1) * k] += phi_i[s * k:(s + 1) * k, t * k:(t + 1) * k]
    return Psi


# --- assembled potential -----------------------------------------------------------


@dataclass(frozen=True)
class PairTerm:
    """``sign * l l^T / |u|`` with ``l`` over slot points and ``u = X[a] - X[b] + offset``.

    ``b = -1`` means ``u = X[a] + offset`` and ``l = e_a``.
    """

    sign: int
    a: int
    b: int
    offset: np.ndarray

    def lvec(self, n: int) -> np.ndarray:
        l = np.zeros(n)
        l[self.a] += 1.0
        if self.b >= 0:
            l[self.b] -= 1.0
        return l

    def separation(self, X: np.ndarray) -> np.ndarray:
        u = X[self.a] + self.offset
        return u - X[self.b] if self.b >= 0 else u


def _block_labels(pc: PointConfig, i: int):
    """Slot-point index and constant offset for each of the ``2k`` points of block ``i``."""
    k, r, c = pc.k, pc.r, pc.config
    out = []
    for side in range(2):
        slot = _slot(i, side, r)
        if side == 0 and i == 1:
            off = c.cL
        elif side == 1 and i == r:
            off = c.cR
        else:
            off = np.zeros(3)
        out.extend((slot * k + j, off) for j in range(k))
    return out


def potential_terms(pc: PointConfig):
    """Constant diagonal and the list of :class:`PairTerm` making up the total potential."""
    k, r = pc.k, pc.r
    const = np.zeros(r * k)
    terms = []
    for i in range(1, r + 1):
        labels = _block_labels(pc, i)
        for side, a in ((0, pc.a_minus[i - 1]), (1, pc.a_plus[i - 1])):
            for j in range(k):
                const[labels[side * k + j][0]] += a
        for p in range(2 * k):
            for q in range(p + 1, 2 * k):
                (ia, oa), (ib, ob) = labels[p], labels[q]
                terms.append(PairTerm(_pair_sign(p, q, k), ia, ib, oa - ob))
    for j in range(k):
        terms.append(PairTerm(1, j, -1, np.zeros(3)))
    return const, terms


@dataclass(frozen=True)
class GHMetricData:
    """Total potential ``Phi`` at a point configuration, with its pair terms."""

    Phi: np.ndarray
    points: PointConfig
    const: np.ndarray = field(repr=False)
    terms: tuple = field(repr=False)


def assemble_phi(pc: PointConfig) -> GHMetricData:
    """Sum of the placed building blocks plus ``diag(1/|y_j|)`` in the ``y`` slot.

    Raises
    ------
    CoincidentPoints
        A pair entering the potential is closer than ``1e-12``.
    """
    const, terms = potential_terms(pc)
    X = pc.base_points()
    n = len(const)
    Phi = np.diag(const)
    for t in terms:
        d = float(np.linalg.norm(t.separation(X)))
        l = t.lvec(n)
        if not l.any():
            continue  # both ends on one slot point: the term cancels identically
        if d < MIN_DISTANCE:
            raise CoincidentPoints(f"slot points {t.a} and {t.b} coincide (distance {d:.3g})")
        Phi += t.sign / d * np.outer(l, l)
    return GHMetricData(Phi, pc, const, tuple(terms))


def dense_phi(pc: PointConfig) -> np.ndarray:
    """The same potential, built block by block through :func:`phi_block` and :func:`assemble_psi`."""
    k, r, c = pc.k, pc.r, pc.config
    y, x = pc.y, pc.x
    Phi = np.zeros((r * k, r * k))
    for i in range(1, r + 1):
        xm = y + c.cL if i == 1 else x[i - 2]
        xp = y + c.cR if i == r else x[i - 1]
        Phi += assemble_psi(i, phi_block(pc.a_minus[i - 1], pc.a_plus[i - 1], xm, xp), r, k)
    Phi[:k, :k] += np.diag(1.0 / np.linalg.norm(y, axis=1))
    return Phi


# --- connection and metric ---------------------------------------------------------


def dirac_potential(u) -> np.ndarray:
    """``w(u) = (u_y, -u_x, 0) / (|u| (|u| + u_z))``, with ``curl w = grad(1/|u|)``.

    The string lies on the negative z-axis.

    Raises
    ------
    OnDiracString
        ``u`` lies on the string (or is zero).
    """
    u = np.asarray(u, dtype=float)
    rr = float(np.linalg.norm(u))
    if rr < MIN_DISTANCE or rr + u[2] <= 1e-12 * rr:
        raise OnDiracString(f"point {u} is on the Dirac string")
    return np.array([u[1], -u[0], 0.0]) / (rr * (rr + u[2]))


def connection_oneform(m: GHMetricData, X=None) -> np.ndarray:
    """Coefficients ``W[a, b, mu]`` of ``A_a = sum_{b, mu} W[a, b, mu] dx_b^mu``.

    Each pair term ``s l l^T / |u|`` contributes ``s l_a l_b w(u)^mu``, so that
    ``dA = *dPhi`` holds for every term separately.  Constant parts give zero.
    """
    X = m.points.base_points() if X is None else np.asarray(X, dtype=float)
    n = len(m.const)
    W = np.zeros((n, n, 3))
    for t in m.terms:
        l = t.lvec(n)
        if not l.any():
            continue
        W += t.sign * np.einsum("a,b,m->abm", l, l, dirac_potential(t.separation(X)))
    return W


def metric_eval(m: GHMetricData, base_tangent, fiber_tangent, W=None) -> float:
    """``sum_nu dx_nu^T Phi dx_nu + (dt + A)^T Phi^{-1} (dt + A)`` on one tangent vector.

    ``base_tangent`` has shape ``(rk, 3)`` (row ``b`` is ``dx_b``) and
    ``fiber_tangent`` has length ``rk``.  ``W`` overrides the connection.

    Raises
    ------
    SingularPhi
        ``Phi`` is numerically singular.
    """
    v = np.asarray(base_tangent, dtype=float).reshape(len(m.const), 3)
    tau = np.asarray(fiber_tangent, dtype=float).ravel()
    W = connection_oneform(m) if W is None else W
    if np.linalg.cond(m.Phi) > 1e14:
        raise SingularPhi(f"Phi has condition number {np.linalg.cond(m.Phi):.3g}")
    base = float(np.einsum("bm,bc,cm->", v, m.Phi, v))
    f = tau + np.einsum("abm,bm->a", W, v)
    return base + float(f @ np.linalg.solve(m.Phi, f))


def separation(pc: PointConfig) -> float:
    """Smallest distance between two points of one slot; ``inf`` for ``k = 1``."""
    best = np.inf
    for group in [pc.y, *pc.x]:
        for m in range(len(group)):
            for n in range(m + 1, len(group)):
                best = min(best, float(np.linalg.norm(group[m] - group[n])))
    return best


def validity_threshold(config: BowConfig) -> float:
    """Separation beyond which ``Phi`` is guaranteed positive definite.

    Same-slot pairs are the only negative contributions, each bounded by
    ``2/R``; ``10 k r / min(interval length)`` leaves a wide margin.
    """
    L = float(np.min(config.lengths))
    return np.inf if L <= 0 else 10.0 * config.k * config.r / L


def is_positive_definite(Phi: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(Phi)
    except np.linalg.LinAlgError:
        return False
    return True
