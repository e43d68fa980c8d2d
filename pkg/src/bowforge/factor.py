"""Hyperkaehler moment maps of T*Mat(k, C) and their inverse factorization.

``mu(zeta) = (A - B^* zeta)(B + A^* zeta)`` and
``nu(zeta) = -(B + A^* zeta)(A - B^* zeta)`` share one spectral curve.  A
definite reality-form polynomial ``T`` is factorized back into a pair
``(A, B)`` by choosing, among the ``2**k`` ways of taking one root from each
sigma-pair of roots of ``det T``, a split whose right divisor produces a
positive definite Hermitian form.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DegenerateSpectrum,
    FactorizationFailed,
    GeneralPositionViolated,
)
from .matpoly import (
    CLUSTER_TOL,
    DEFAULT_TOL,
    Divisor,
    QuadMatPoly,
    TwistorPoint,
    char_curve,
    choose_rotation,
    eta_zero_points,
    evaluate,
    is_reality_form,
    mobius_rotate,
)

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e8
PIVOT_THRESHOLD = 1e-10


@dataclass(frozen=True)
class FactorPair:
    """A point ``(A, B)`` of ``T*Mat(k, C)``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.array(self.A, dtype=complex))
        B = np.atleast_2d(np.array(self.B, dtype=complex))
        if A.shape != B.shape or A.shape[0] != A.shape[1]:
            raise ValueError("A and B must be square of equal size")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def k(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class AdhmLimitData:
    """``(A, B)`` with framing vectors ``v_i, w_i`` and the difference ``c_L - c_R`` in R^3."""

    pair: FactorPair
    v: np.ndarray
    w: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        v = np.array(self.v, dtype=complex).reshape(-1, self.pair.k)
        w = np.array(self.w, dtype=complex).reshape(-1, self.pair.k)
        if v.shape != w.shape or v.shape[0] < 1:
            raise ValueError("need r >= 1 pairs of framing vectors of length k")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float).reshape(3))


def moment_mu(p: FactorPair) -> QuadMatPoly:
    """``(A - B^* zeta)(B + A^* zeta)``."""
    A, B = p.A, p.B
    As, Bs = A.conj().T, B.conj().T
    return QuadMatPoly(A @ B, A @ As - Bs @ B, -Bs @ As)


def moment_nu(p: FactorPair) -> QuadMatPoly:
    """``-(B + A^* zeta)(A - B^* zeta)``."""
    A, B = p.A, p.B
    As, Bs = A.conj().T, B.conj().T
    return QuadMatPoly(-B @ A, B @ Bs - As @ A, As @ Bs)


def random_pair(k: int, rng: np.random.Generator) -> FactorPair:
    """Ginibre pair: iid complex normal entries of variance 1."""
    def ginibre():
        return (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / np.sqrt(2)

    return FactorPair(ginibre(), ginibre())


# --- factorization -----------------------------------------------------------------


def _null_vector(M: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(M)
    return vh[-1].conj()


def _polish_eigenpair(T: QuadMatPoly, zeta: complex, v: np.ndarray, steps: int = 2):
    """Newton refinement of ``T(zeta) v = 0`` with ``c^* v = 1``."""
    k = T.k
    c = v / np.vdot(v, v)
    for _ in range(steps):
        J = np.zeros((k + 1, k + 1), dtype=complex)
        J[:k, :k] = evaluate(T, zeta)
        J[:k, k] = T.derivative_at(zeta) @ v
        J[k, :k] = c.conj()
        rhs = np.concatenate([evaluate(T, zeta) @ v, [np.vdot(c, v) - 1.0]])
        try:
            step = np.linalg.solve(J, rhs)
        except np.linalg.LinAlgError:
            break
        v = v - step[:k]
        zeta = zeta - step[k]
    return zeta, v / np.linalg.norm(v)


def _quadratic_eigenpairs(T: QuadMatPoly):
    """Roots of ``det T`` with kernel vectors, via the companion linearization."""
    k = T.k
    Z, I = np.zeros((k, k)), np.eye(k)
    L0 = np.block([[Z, I], [-T.A0, -T.A1]])
    L1 = np.block([[I, Z], [Z, T.A2]])
    vals = sla.eigvals(L0, L1)
    pairs = []
    for z in vals:
        v = _null_vector(evaluate(T, z))
        pairs.append(_polish_eigenpair(T, z, v))
    return np.array([z for z, _ in pairs]), np.array([v for _, v in pairs]).T


def _sigma_pairs(roots: np.ndarray):
    """Group roots into pairs ``(z, -1/conj(z))``; each pair sorted by argument.

    Pairs are ordered by the argument of their first member, which is the root
    of larger modulus.
    """
    n = len(roots)
    partner = -1.0 / np.conj(roots)
    cost = np.abs(roots[:, None] - partner[None, :]) / (1 + np.abs(roots[:, None]))
    np.fill_diagonal(cost, np.inf)
    unused = set(range(n))
    pairs = []
    for i in np.argsort(-np.abs(roots), kind="stable"):
        if i not in unused:
            continue
        unused.discard(i)
        j = min(unused, key=lambda m: cost[i, m])
        unused.discard(j)
        pairs.append((i, j))
    pairs.sort(key=lambda ij: np.angle(roots[ij[0]]))
    return pairs


@dataclass(frozen=True)
class SplitResult:
    """Outcome of one of the ``2**k`` sigma-splits."""

    mask: tuple
    indices: tuple
    condition: float
    remainder: float
    hermiticity: float
    eigenvalues: np.ndarray
    definite: bool
    g: np.ndarray | None = None
    C1: np.ndarray | None = None
    D1: np.ndarray | None = None


def _try_split(T: QuadMatPoly, roots, vecs, mask, indices, tol) -> SplitResult:
    V = vecs[:, indices]
    cond = float(np.linalg.cond(V))
    if cond > MAX_CONDITION:
        return SplitResult(mask, indices, cond, np.inf, np.inf, np.array([]), False)
    X = V @ np.diag(roots[list(indices)]) @ np.linalg.inv(V)
    remainder = float(np.max(np.abs(T.A0 + T.A1 @ X + T.A2 @ X @ X))) / T.scale()
    C1 = T.A1 + T.A2 @ X
    D1 = T.A2
    H = np.linalg.solve(D1, X.conj().T)  # -D1^{-1} C2^*, with C2 = -X
    hnorm = max(float(np.max(np.abs(H))), 1e-300)
    herm = float(np.max(np.abs(H - H.conj().T))) / hnorm
    Hh = (H + H.conj().T) / 2
    eig = np.linalg.eigvalsh(Hh)
    definite = bool(eig[0] > PIVOT_THRESHOLD * np.max(np.abs(eig)))
    g = None
    if definite:
        try:
            g = np.linalg.cholesky(Hh)
        except np.linalg.LinAlgError:
            definite = False
    return SplitResult(mask, indices, cond, remainder, herm, eig, definite, g, C1, D1)


def scan_splits(T: QuadMatPoly, tol: float = DEFAULT_TOL) -> list:
    """Evaluate every sigma-split of the roots of ``det T`` (after rotation).

    Returns the list of :class:`SplitResult` in binary-counter order over the
    sigma-pairs; bit ``j`` of the mask selects the second member of pair ``j``.
    """
    delta = choose_rotation(T, tol)
    Tr = mobius_rotate(T, delta) if delta else T
    roots, vecs = _quadratic_eigenpairs(Tr)
    return _scan(Tr, roots, vecs, tol)


def _scan(Tr, roots, vecs, tol):
    k = Tr.k
    pairs = _sigma_pairs(roots)
    results = []
    for mask in itertools.product((0, 1), repeat=k):
        indices = tuple(pair[b] for pair, b in zip(pairs, mask))
        results.append(_try_split(Tr, roots, vecs, mask, indices, tol))
    return results


def definite_splits(results, tol: float = DEFAULT_TOL) -> list:
    """Splits whose form is Hermitian to ``1e4 * tol`` and positive definite."""
    return [r for r in results if r.definite and r.hermiticity <= 1e4 * tol]


def _unrotate(A: np.ndarray, B: np.ndarray, delta: complex):
    """Map a factorization of the rotated polynomial back to the original one."""
    s = 1.0 / np.sqrt(1.0 + abs(delta) ** 2)
    a, b = s, delta * s
    A0 = a * A + b * B.conj().T
    B0 = a * B - b * A.conj().T
    return A0, B0


def canonical_gauge(A: np.ndarray, B: np.ndarray):
    """Fix the residual ``U(k)`` freedom ``(A, B) -> (A h^-1, h B)``.

    ``A h^-1`` is made upper triangular with nonnegative real diagonal (RQ
    decomposition), which leaves ``mu`` unchanged.
    """
    R, Q = sla.rq(A)
    d = np.diag(R)
    phase = np.where(np.abs(d) > 0, np.abs(d) / np.where(d == 0, 1, d), 1.0)
    D = np.diag(phase)
    hinv = Q.conj().T @ D
    return A @ hinv, np.linalg.inv(hinv) @ B


def _gauss_newton_polish(T: QuadMatPoly, A: np.ndarray, B: np.ndarray, iterations: int = 2):
    """Least-squares refinement of ``mu(A, B) = T`` over the real entries of ``(A, B)``.

    ``mu`` is quadratic in those entries, so central differences give its
    Jacobian exactly up to rounding.
    """
    k = T.k
    target = T.coeffs.ravel()

    def unpack(x):
        z = x[: 2 * k * k] + 1j * x[2 * k * k :]
        return z[: k * k].reshape(k, k), z[k * k :].reshape(k, k)

    def residual(x):
        r = moment_mu(FactorPair(*unpack(x))).coeffs.ravel() - target
        return np.concatenate([r.real, r.imag])

    z = np.concatenate([A.ravel(), B.ravel()])
    x = np.concatenate([z.real, z.imag])
    for _ in range(iterations):
        r0 = residual(x)
        J = np.empty((r0.size, x.size))
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = 1.0
            J[:, j] = (residual(x + e) - residual(x - e)) / 2.0
        step = np.linalg.lstsq(J, r0, rcond=None)[0]
        if np.max(np.abs(residual(x - step))) >= np.max(np.abs(r0)):
            break
        x = x - step
    return unpack(x)


def factorize(T: QuadMatPoly, tol: float = DEFAULT_TOL) -> FactorPair:
    """Write a definite reality-form ``T`` as ``(A - B^* zeta)(B + A^* zeta)``.

    When several sigma-splits are positive definite, the one whose kernel
    vectors are best conditioned is used (ties broken by split order).  The
    result is polished by Gauss-Newton and put in :func:`canonical_gauge`.

    Raises
    ------
    DegenerateSpectrum
        Two roots of ``det T`` agree to within ``1e-6``.
    GeneralPositionViolated
        Every split had kernel vectors with condition number above ``1e8``.
    FactorizationFailed
        No split gives a positive definite form, or the product does not
        reproduce ``T``.
    """
    if not is_reality_form(T, tol * T.scale()):
        raise FactorizationFailed("input is not of reality form")
    delta = choose_rotation(T, tol)
    Tr = mobius_rotate(T, delta) if delta else T
    roots, vecs = _quadratic_eigenpairs(Tr)
    n = len(roots)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(roots[i] - roots[j]) < CLUSTER_TOL * max(1.0, abs(roots[i])):
                raise DegenerateSpectrum(f"det T(zeta) has repeated roots near {roots[i]:.6g}")

    results = _scan(Tr, roots, vecs, tol)
    if all(r.condition > MAX_CONDITION for r in results):
        best = min(r.condition for r in results)
        raise GeneralPositionViolated(
            f"kernel vectors not in general position (condition {best:.3g})", best
        )
    definite = definite_splits(results, tol)
    if not definite:
        raise FactorizationFailed("no sigma-split yields a positive definite form")
    r = min(definite, key=lambda s: s.condition)
    A = r.C1 @ r.g
    B = -r.g.conj().T @ r.D1.conj().T
    if delta:
        A, B = _unrotate(A, B, delta)
    A, B = _gauss_newton_polish(T, A, B)
    pair = FactorPair(*canonical_gauge(A, B))
    res = factor_residual(T, pair)
    if res > tol * T.scale():
        raise FactorizationFailed(f"product residual {res:.3g} exceeds {tol:.3g}")
    return pair


def factor_residual(T: QuadMatPoly, pair: FactorPair) -> float:
    """Max over ``4k + 1`` unit-circle nodes of ``|T(z) - mu(z)|``."""
    mu = moment_mu(pair)
    nodes = np.exp(2j * np.pi * (np.arange(4 * T.k + 1) + 0.5) / (4 * T.k + 1))
    return float(max(np.max(np.abs(evaluate(T, z) - evaluate(mu, z))) for z in nodes))


# --- divisors ----------------------------------------------------------------------


def _pencil_roots(C: np.ndarray, D: np.ndarray) -> list:
    """Roots of ``det(C + D zeta)`` on P^1 as twistor points on ``eta = 0``."""
    vals = sla.eigvals(C, -D)
    pts = []
    for z in vals:
        if np.isfinite(z):
            pts.append(TwistorPoint(z))
        else:
            pts.append(TwistorPoint(np.inf, infinite=True))
    return pts


def delta_divisors(p: FactorPair, tol: float = DEFAULT_TOL):
    """``(Delta_A, Delta_B)``: zeros of ``det(A - B^* zeta)`` and ``det(B + A^* zeta)``."""
    dA = _pencil_roots(p.A, -p.B.conj().T)
    dB = _pencil_roots(p.B, p.A.conj().T)
    for a in dA:
        for b in dB:
            if a.infinite and b.infinite:
                raise DegenerateSpectrum("Delta_A and Delta_B share the point at infinity")
            if not a.infinite and not b.infinite and abs(a.zeta - b.zeta) < CLUSTER_TOL * max(1.0, abs(a.zeta)):
                raise DegenerateSpectrum("Delta_A and Delta_B overlap")
    return Divisor.from_points(dA), Divisor.from_points(dB)


@dataclass(frozen=True)
class SwapReport:
    curve_deviation: float
    divisor_degree: int
    expected_degree: int
    divisor_union_matches: bool

    @property
    def ok(self) -> bool:
        return self.divisor_degree == self.expected_degree and self.divisor_union_matches


def check_swap_relation(p: FactorPair, tol: float = 1e-8) -> SwapReport:
    """Curve-level and divisor-level consequences of swapping the two factors."""
    mu, nu = moment_mu(p), moment_nu(p)
    dev = char_curve(mu).max_deviation(char_curve(-nu))
    dA, dB = delta_divisors(p)
    union = dA + dB
    try:
        matches = union.matches(eta_zero_points(char_curve(mu)), tol)
    except Exception:  # p_k identically zero: union is only checked by degree
        matches = False
    return SwapReport(dev, union.degree, 2 * p.k, matches)


def r3_quadratic(x) -> np.ndarray:
    """Ascending coefficients ``(x2 + i x3) + 2 x1 zeta - (x2 - i x3) zeta**2``."""
    x1, x2, x3 = np.asarray(x, dtype=float)
    z = x2 + 1j * x3
    return np.array([z, 2 * x1, -np.conj(z)])


def adhm_limit_residual(d: AdhmLimitData) -> float:
    """Coefficientwise max deviation in the zero-length matrix equation

    ``[A - B^* zeta, B + A^* zeta] = sum_i (v_i - conj(w_i) zeta)(w_i + conj(v_i) zeta)^T + c(zeta)``.
    """
    lhs = moment_mu(d.pair).coeffs + moment_nu(d.pair).coeffs
    k = d.pair.k
    rhs = np.zeros((3, k, k), dtype=complex)
    for v, w in zip(d.v, d.w):
        rhs[0] += np.outer(v, w)
        rhs[1] += np.outer(v, v.conj()) - np.outer(w.conj(), w)
        rhs[2] -= np.outer(w.conj(), v.conj())
    rhs += r3_quadratic(d.c)[:, None, None] * np.eye(k)
    return float(np.max(np.abs(lhs - rhs)))
