import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bowforge.errors import DegenerateSpectrum, FactorizationFailed
from bowforge.factor import (
    AdhmLimitData,
    FactorPair,
    adhm_limit_residual,
    canonical_gauge,
    check_swap_relation,
    definite_splits,
    delta_divisors,
    factor_residual,
    factorize,
    moment_mu,
    moment_nu,
    r3_quadratic,
    random_pair,
    scan_splits,
)
from bowforge.matpoly import QuadMatPoly, char_curve, det_roots, evaluate

from conftest import random_matrix


def test_moment_maps_expand_the_products(rng):
    p = random_pair(3, rng)
    A, B = p.A, p.B
    for z in (0.2 + 0.9j, -1.4):
        mu = (A - B.conj().T * z) @ (B + A.conj().T * z)
        nu = -(B + A.conj().T * z) @ (A - B.conj().T * z)
        assert np.allclose(evaluate(moment_mu(p), z), mu)
        assert np.allclose(evaluate(moment_nu(p), z), nu)


def test_factorize_rank_one_example():
    T = QuadMatPoly.scalar(2, -3, -2)
    pair = factorize(T)
    assert np.allclose(pair.A, [[1]]) and np.allclose(pair.B, [[2]])
    assert factor_residual(T, pair) < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_factorize_round_trip(rng, k):
    for _ in range(10):
        T = moment_mu(random_pair(k, rng))
        pair = factorize(T)
        assert moment_mu(pair).distance(T) < 1e-10 * T.scale()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 3))
def test_factorize_round_trip_property(seed, k):
    T = moment_mu(random_pair(k, np.random.default_rng(seed)))
    assert factor_residual(T, factorize(T)) < 1e-9 * T.scale()


def test_factorization_is_gauge_fixed(rng):
    p = random_pair(3, rng)
    h = np.linalg.qr(random_matrix(rng, 3))[0]
    q = factorize(moment_mu(FactorPair(p.A @ h.conj().T, h @ p.B)))
    r = factorize(moment_mu(p))
    assert np.allclose(q.A, r.A, atol=1e-8) and np.allclose(q.B, r.B, atol=1e-8)
    assert np.allclose(np.tril(q.A, -1), 0, atol=1e-12)
    assert np.all(np.diag(q.A).real >= 0) and np.allclose(np.diag(q.A).imag, 0, atol=1e-12)


def test_canonical_gauge_preserves_mu(rng):
    p = random_pair(4, rng)
    A, B = canonical_gauge(p.A, p.B)
    assert moment_mu(FactorPair(A, B)).distance(moment_mu(p)) < 1e-12


def test_scan_covers_every_split(rng):
    T = moment_mu(random_pair(3, rng))
    results = scan_splits(T)
    assert len(results) == 8
    assert len({r.mask for r in results}) == 8
    assert len(definite_splits(results)) >= 1


def test_not_reality_form_is_rejected(rng):
    P = QuadMatPoly(*(random_matrix(rng, 2) for _ in range(3)))
    with pytest.raises(FactorizationFailed):
        factorize(P)


def test_repeated_roots_raise():
    # mu = diag(t, t): every root of det appears twice
    T = moment_mu(FactorPair(np.eye(2), 2 * np.eye(2)))
    with pytest.raises(DegenerateSpectrum):
        factorize(T)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_swap_relation(rng, k):
    rep = check_swap_relation(random_pair(k, rng))
    assert rep.curve_deviation < 1e-10
    assert rep.ok


def test_delta_divisors_are_factor_zeros(rng):
    p = random_pair(2, rng)
    dA, dB = delta_divisors(p)
    for pt in dA.expanded():
        assert abs(np.linalg.det(p.A - p.B.conj().T * pt.zeta)) < 1e-10
    for pt in dB.expanded():
        assert abs(np.linalg.det(p.B + p.A.conj().T * pt.zeta)) < 1e-10
    assert (dA + dB).matches(det_roots(moment_mu(p)).as_divisor(), 1e-8)


def test_mu_and_minus_nu_share_curve(rng):
    p = random_pair(3, rng)
    assert char_curve(moment_mu(p)).max_deviation(char_curve(-moment_nu(p))) < 1e-12


def test_r3_quadratic_is_real_section():
    c = r3_quadratic([0.5, 1.0, -2.0])
    assert np.allclose(c, [1 - 2j, 1.0, -(1 + 2j)])


def test_adhm_limit_rank_one():
    # k = 1: commutator vanishes, so c = -x(v, w) balances one framing pair
    v, w = 0.6 + 0.3j, -0.2 + 0.8j
    x = np.array([(abs(v) ** 2 - abs(w) ** 2) / 2, (v * w).real, (v * w).imag])
    pair = FactorPair([[0.4 - 0.1j]], [[1.1j]])
    assert adhm_limit_residual(AdhmLimitData(pair, [v], [w], -x)) < 1e-15
    assert adhm_limit_residual(AdhmLimitData(pair, [v], [w], x)) > 0.1


def test_factorize_timing(rng):
    t0 = time.perf_counter()
    for k in (1, 2, 3, 4):
        for _ in range(25):
            factorize(moment_mu(random_pair(k, rng)))
    assert time.perf_counter() - t0 < 10.0
