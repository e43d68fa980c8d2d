import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bowforge.errors import CoincidentPoints, OnDiracString, SingularPhi
from bowforge.ghmetric import (
    GHMetricData,
    PointConfig,
    assemble_phi,
    assemble_psi,
    dense_phi,
    dirac_potential,
    is_positive_definite,
    metric_eval,
    phi_block,
    separation,
    validity_threshold,
)
from bowforge.nahm import BowConfig

from conftest import monopole_residual


def random_config(rng, k, r, spread=3.0):
    cfg = BowConfig(k, r, np.cumsum(rng.uniform(0.5, 1.5, r + 2)), rng.standard_normal(3), rng.standard_normal(3))
    return PointConfig(cfg, spread * rng.standard_normal((k, 3)), spread * rng.standard_normal((r - 1, k, 3)))


def test_phi_block_rank_one():
    Phi = phi_block(2.0, 3.0, [[0, 0, 0]], [[0, 0, 1]])
    assert np.allclose(Phi, [[3.0, -1.0], [-1.0, 4.0]])


def test_phi_block_same_side_pairs_are_negative():
    Phi = phi_block(1.0, 1.0, [[0, 0, 0], [2, 0, 0]], [[0, 0, 10], [0, 0, 20]])
    # the two minus points are at distance 2: s = -1
    assert Phi[0, 1] == pytest.approx(0.5)


def test_assemble_psi_wraps_last_block():
    r, k = 3, 1
    phi = np.array([[1.0, 2.0], [3.0, 4.0]])
    Psi = assemble_psi(3, phi, r, k)
    # block r: minus side in slot r, plus side wraps to the y slot
    assert Psi[2, 2] == 1.0 and Psi[0, 0] == 4.0 and Psi[2, 0] == 2.0 and Psi[0, 2] == 3.0
    Psi1 = assemble_psi(1, phi, r, k)
    assert Psi1[0, 0] == 1.0 and Psi1[1, 1] == 4.0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_taub_nut_collapse(seed):
    rng = np.random.default_rng(seed)
    mu = np.sort(rng.uniform(-2, 2, 3))
    cfg = BowConfig(1, 1, mu, rng.standard_normal(3), rng.standard_normal(3))
    y = rng.standard_normal(3) * rng.uniform(0.2, 5)
    Phi = assemble_phi(PointConfig(cfg, y)).Phi
    assert abs(Phi[0, 0] - ((mu[2] - mu[0]) + 1 / np.linalg.norm(y))) < 1e-13


@pytest.mark.parametrize("k,r", [(1, 2), (2, 1), (2, 3), (3, 2), (1, 3)])
def test_pair_terms_match_dense_assembly(rng, k, r):
    pc = random_config(rng, k, r)
    Phi = assemble_phi(pc).Phi
    assert np.allclose(Phi, Phi.T)
    assert np.max(np.abs(Phi - dense_phi(pc))) < 1e-12


def test_relabeling_points_permutes_phi(rng):
    pc = random_config(rng, 2, 2)
    swapped = PointConfig(pc.config, pc.y[::-1], pc.x[:, ::-1], pc.a_minus, pc.a_plus)
    P = np.array([1, 0, 3, 2])
    assert np.allclose(assemble_phi(swapped).Phi, assemble_phi(pc).Phi[np.ix_(P, P)])


def test_default_a_split(rng):
    cfg = BowConfig(1, 3, [0, 1, 3, 4, 6])
    pc = PointConfig(cfg, [1, 0, 0], np.ones((2, 1, 3)))
    assert np.allclose(pc.a_minus, [1, 1, 0.5]) and np.allclose(pc.a_plus, [1, 0.5, 2])
    with pytest.raises(ValueError):
        PointConfig(cfg, [1, 0, 0], np.ones((2, 1, 3)), [1, 1, 1], [1, 1, 1])


def test_coincident_points_raise():
    cfg = BowConfig(2, 1, [0, 1, 2])
    with pytest.raises(CoincidentPoints):
        assemble_phi(PointConfig(cfg, [[1, 0, 0], [1, 0, 0]]))


def test_dirac_potential_curl(rng):
    u = rng.standard_normal(3) + [0, 0, 2]
    h = 1e-6
    J = np.array([(dirac_potential(u + e) - dirac_potential(u - e)) / (2 * h) for e in np.eye(3) * h])  # J[j, i] = d_j w_i
    curl = np.array([J[1, 2] - J[2, 1], J[2, 0] - J[0, 2], J[0, 1] - J[1, 0]])
    grad = -u / np.linalg.norm(u) ** 3
    assert np.allclose(curl, grad, atol=1e-7)


def test_dirac_string():
    with pytest.raises(OnDiracString):
        dirac_potential([0, 0, -1.0])
    with pytest.raises(OnDiracString):
        dirac_potential([0, 0, 0])


def test_single_center_monopole_equation():
    cfg = BowConfig(1, 1, [0, 0.7, 2.0], [0.1, 0.2, 0.3], [-0.3, 0.1, 0.4])
    assert monopole_residual(assemble_phi(PointConfig(cfg, [0.4, -1.1, 0.8]))) < 1e-6


def test_two_center_monopole_equation(rng):
    assert monopole_residual(assemble_phi(random_config(rng, 2, 1))) < 1e-6
    assert monopole_residual(assemble_phi(random_config(rng, 1, 2))) < 1e-6


def test_euclidean_metric_for_trivial_potential(rng):
    pc = PointConfig(BowConfig(1, 2, [0, 1, 2, 3]), [1, 0, 0], [[[0, 1, 0]]])
    m = GHMetricData(np.eye(2), pc, np.ones(2), ())
    v, tau = rng.standard_normal((2, 3)), rng.standard_normal(2)
    assert metric_eval(m, v, tau) == pytest.approx(np.sum(v**2) + np.sum(tau**2))


def test_metric_eval_taub_nut(rng):
    cfg = BowConfig(1, 1, [0, 0.7, 2.0])
    y = np.array([0.3, 1.2, 0.5])
    m = assemble_phi(PointConfig(cfg, y))
    V = 2.0 + 1 / np.linalg.norm(y)
    v = rng.standard_normal(3)
    w = dirac_potential(y)
    assert metric_eval(m, v, [0.7]) == pytest.approx(V * v @ v + (0.7 + w @ v) ** 2 / V, rel=1e-13)


def test_singular_phi():
    pc = PointConfig(BowConfig(1, 2, [0, 1, 2, 3]), [1, 0, 0], [[[0, 1, 0]]])
    m = GHMetricData(np.diag([1.0, 1e-17]), pc, np.zeros(2), ())
    with pytest.raises(SingularPhi):
        metric_eval(m, np.ones((2, 3)), [1.0, 1.0])


def test_separation_and_threshold(rng):
    pc = random_config(rng, 2, 2)
    assert separation(pc) == pytest.approx(
        min(np.linalg.norm(pc.y[0] - pc.y[1]), np.linalg.norm(pc.x[0, 0] - pc.x[0, 1])))
    cfg = BowConfig(2, 3, [0, 1, 3, 3.5, 6])
    assert validity_threshold(cfg) == pytest.approx(10 * 2 * 3 / 0.5)


def test_close_points_can_break_definiteness():
    # two y points very close together: the same-slot terms dominate
    cfg = BowConfig(2, 1, [0, 0.01, 0.02], [0, 0, 0], [0, 0, 10])
    pc = PointConfig(cfg, [[0, 0, 50], [0, 0, 50.001]])
    assert not is_positive_definite(assemble_phi(pc).Phi)
