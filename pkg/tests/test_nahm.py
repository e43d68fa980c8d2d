import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from bowforge.errors import NonConstantBeta, StepOverflow
from bowforge.factor import FactorPair, moment_nu, random_pair
from bowforge.matpoly import QuadMatPoly, char_curve
from bowforge.nahm import (
    BowConfig,
    NahmTriple,
    PiecewiseNahmSolution,
    Trajectory,
    apply_jump,
    assemble_T,
    complex_reduce,
    disassemble_T,
    integrate,
    jump_polynomial,
    nahm_rhs,
    pencil_rank_ratio,
    shoot,
    verify_bow,
)

from conftest import random_matrix, random_skew

# su(2) basis with [e1, e2] = e3 (cyclic)
PAULI = (np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.array([[1, 0], [0, -1]]))
E = tuple(-0.5j * s for s in PAULI)


def euler_top(c):
    return NahmTriple(*(ci * e for ci, e in zip(c, E)))


def random_triple(rng, k, scale=1.0):
    return NahmTriple(*(random_skew(rng, k, scale) for _ in range(3)))


def test_su2_basis_relations():
    assert np.allclose(E[0] @ E[1] - E[1] @ E[0], E[2])
    assert np.allclose(nahm_rhs(NahmTriple(*E)).as_array(), -np.stack(E))


def test_lax_form(rng):
    t = random_triple(rng, 3)
    T = assemble_T(t)
    c, d = (T.A0, T.A1, T.A2), (T.A1, 2 * T.A2)
    lax = np.zeros((4, 3, 3), dtype=complex)
    for i in range(3):
        for j in range(2):
            lax[i + j] += 0.5 * (c[i] @ d[j] - d[j] @ c[i])
    assert np.allclose(lax[:3], assemble_T(nahm_rhs(t)).coeffs, atol=1e-13)
    assert np.allclose(lax[3], 0, atol=1e-13)


def test_assemble_round_trip(rng):
    t = random_triple(rng, 3)
    back = disassemble_T(assemble_T(t))
    assert np.allclose(back.as_array(), t.as_array())


def test_euler_top_matches_scalar_ode():
    c = (0.5, 1.0, 1.5)
    tr = integrate(euler_top(c), (0.0, 1.0), 256)

    def f(_, y):
        return [-y[1] * y[2], -y[2] * y[0], -y[0] * y[1]]

    ref = solve_ivp(f, (0, 1), c, rtol=1e-12, atol=1e-12, t_eval=[1.0]).y[:, -1]
    got = [np.real(np.trace(tr.last.as_array()[i] @ E[i].conj().T)) / 0.5 for i in range(3)]
    assert np.allclose(got, ref, atol=1e-8)


def test_euler_top_blows_up():
    # (1, 2, 3) reaches infinity near t = 0.89
    with pytest.raises(StepOverflow):
        integrate(euler_top((1.0, 2.0, 3.0)), (0.0, 1.0), 4096)


def test_flow_is_isospectral_and_skew(rng):
    tr = integrate(random_triple(rng, 3, 0.5), (0.0, 0.5), 200)
    assert tr.curve_drift() < 1e-9
    assert max(tr[i].hermitian_part() for i in range(len(tr))) == 0.0


def test_rk4_order():
    t0 = euler_top((0.5, 1.0, 1.5))
    drifts = [integrate(t0, (0, 1), n).curve_drift() for n in (16, 32, 64, 128)]
    orders = np.log2(np.array(drifts[:-1]) / drifts[1:])
    assert np.all(orders > 3.8)


def test_flow_commutes_with_unitary_conjugation(rng):
    t = random_triple(rng, 2)
    h = np.linalg.qr(random_matrix(rng, 2))[0]
    a = integrate(t.conjugated(h), (0, 0.3), 30).last
    b = integrate(t, (0, 0.3), 30).last.conjugated(h)
    assert np.allclose(a.as_array(), b.as_array(), atol=1e-12)


def test_jump_is_rank_one(rng):
    t = random_triple(rng, 3)
    I, J = rng.standard_normal(3) + 1j * rng.standard_normal(3), rng.standard_normal(3) + 1j * rng.standard_normal(3)
    after = apply_jump(t, I, J)
    dP = assemble_T(after) - assemble_T(t)
    assert pencil_rank_ratio(dP) < 1e-10
    assert dP.distance(jump_polynomial(I, J)) < 1e-14
    assert after.hermitian_part() < 1e-15


def test_rank_one_jump_shifts_t1():
    after = apply_jump(NahmTriple([[0]], [[0]], [[0]]), [1.0], [0.0])
    assert np.allclose(after.T1, [[-0.5j]])


def test_generic_polynomial_is_not_rank_one(rng):
    assert pencil_rank_ratio(QuadMatPoly(*(random_matrix(rng, 3) for _ in range(3)))) > 1e-3


def _consistent_rank_one_bow(steps=400):
    pair = FactorPair([[0.8 + 0.1j]], [[-0.4 + 0.3j]])
    I, J = np.array([0.7 + 0.2j]), np.array([-0.3 + 0.5j])
    x = np.array([(abs(I[0]) ** 2 - abs(J[0]) ** 2) / 2, (I[0] * J[0]).real, (I[0] * J[0]).imag])
    cL = np.array([0.3, -0.2, 0.5])
    cfg = BowConfig(1, 1, [0.0, 0.4, 1.0], cL, cL + x)
    start = disassemble_T(-moment_nu(pair) + cfg.c_poly("L"))
    return PiecewiseNahmSolution(cfg, shoot(cfg, start, I, J, steps), pair, I, J)


def test_verify_bow_accepts_consistent_data():
    rep = verify_bow(_consistent_rank_one_bow())
    assert rep.ok(1e-8)
    assert set(rep.to_dict()) >= {"nahm_residual", "jump_rank", "shift_residual"}


def test_verify_bow_flags_corrupted_jump():
    sol = _consistent_rank_one_bow()
    bad = PiecewiseNahmSolution(sol.config, sol.intervals, sol.pair, 2 * sol.I, sol.J)
    rep = verify_bow(bad)
    assert not rep.ok(1e-8)
    assert rep.jump_data_residual[0] > 0.1


def test_verify_bow_flags_wrong_end():
    sol = _consistent_rank_one_bow()
    other = FactorPair(sol.pair.A * 1.5, sol.pair.B)
    rep = verify_bow(PiecewiseNahmSolution(sol.config, sol.intervals, other, sol.I, sol.J))
    assert rep.left_end_residual > 0.1


def test_shooting_higher_rank(rng):
    k = 3
    cfg = BowConfig(k, 2, [0, 0.3, 0.6, 1.0])
    I = 0.4 * (rng.standard_normal((2, k)) + 1j * rng.standard_normal((2, k)))
    J = 0.4 * (rng.standard_normal((2, k)) + 1j * rng.standard_normal((2, k)))
    start, pair = random_triple(rng, k, 0.2), random_pair(k, rng)
    rep = verify_bow(PiecewiseNahmSolution(cfg, shoot(cfg, start, I, J, 400), pair, I, J))
    fine = verify_bow(PiecewiseNahmSolution(cfg, shoot(cfg, start, I, J, 800), pair, I, J))
    # the residual is a second-order difference estimate
    assert max(rep.nahm_residual) < 1e-4
    assert max(rep.nahm_residual) / max(fine.nahm_residual) > 3.5
    assert max(rep.jump_rank) < 1e-10
    assert max(rep.jump_data_residual) < 1e-13
    assert max(rep.curve_drift) < 1e-9


def test_complex_reduction(rng):
    k = 3
    cfg = BowConfig(k, 2, [0, 0.3, 0.6, 1.0])
    I = 0.4 * (rng.standard_normal((2, k)) + 1j * rng.standard_normal((2, k)))
    J = 0.4 * (rng.standard_normal((2, k)) + 1j * rng.standard_normal((2, k)))
    ivs = shoot(cfg, random_triple(rng, k, 0.2), I, J, 400)
    sol = PiecewiseNahmSolution(cfg, ivs, random_pair(k, rng), I, J)
    cr = complex_reduce(sol)
    assert len(cr.beta) == 3
    for i in range(2):
        s = np.linalg.svd(cr.beta[i + 1] - cr.beta[i], compute_uv=False)
        assert s[1] < 1e-8 * s[0]
        assert np.allclose(np.outer(cr.I[:, i], cr.J[i]), cr.beta[i + 1] - cr.beta[i], atol=1e-8)
    # gauge covariance under a constant unitary
    h = np.linalg.qr(random_matrix(rng, k))[0]
    ivs2 = [Trajectory(tr.t, np.einsum("ab,ntbc,dc->ntad", h, tr.samples, h.conj())) for tr in ivs]
    cr2 = complex_reduce(PiecewiseNahmSolution(cfg, ivs2, sol.pair, I, J))
    for b, b2 in zip(cr.beta, cr2.beta):
        assert np.allclose(h @ b @ h.conj().T, b2, atol=1e-9)


def test_complex_reduction_detects_moving_beta():
    cfg = BowConfig(1, 1, [0.0, 0.5, 1.0])
    still = np.zeros((2, 3, 1, 1), dtype=complex)
    moving = still.copy()
    moving[1, 1] = 0.3j  # beta changes with alpha = 0
    ivs = [Trajectory(np.array([0.0, 0.5]), moving), Trajectory(np.array([0.5, 1.0]), still)]
    sol = PiecewiseNahmSolution(cfg, ivs, FactorPair([[1.0]], [[0.0]]), [0.1], [0.1])
    with pytest.raises(NonConstantBeta):
        complex_reduce(sol)


def test_bow_config_validation():
    with pytest.raises(ValueError):
        BowConfig(1, 2, [0, 1, 2])
    with pytest.raises(ValueError):
        BowConfig(1, 1, [0, 2, 1])
    assert np.allclose(BowConfig(2, 1, [0, 0.5, 2]).lengths, [0.5, 1.5])


def test_char_curve_of_assembled_triple_is_real(rng):
    from bowforge.matpoly import is_real_curve

    assert is_real_curve(char_curve(assemble_T(random_triple(rng, 3))))


def test_euler_top_timing():
    t0 = time.perf_counter()
    integrate(euler_top((0.5, 1.0, 1.5)), (0, 1), 4096).curve_drift()
    assert time.perf_counter() - t0 < 1.0
