import numpy as np
import pytest

from bowforge.ghmetric import assemble_phi, connection_oneform


def random_matrix(rng, k, scale=1.0):
    return scale * (rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))) / np.sqrt(2)


def random_skew(rng, k, scale=1.0):
    X = random_matrix(rng, k, scale)
    return (X - X.conj().T) / 2


def random_unit(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines at the end of the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


EPS = np.zeros((3, 3, 3))
EPS[0, 1, 2] = EPS[1, 2, 0] = EPS[2, 0, 1] = 1
EPS[0, 2, 1] = EPS[2, 1, 0] = EPS[1, 0, 2] = -1


def monopole_residual(m, h=1e-5):
    """Max over entries of ``dA - *dPhi`` by central differences."""
    X0 = m.points.base_points()
    n = len(X0)
    dW = np.zeros((n, 3, n, n, 3))
    dP = np.zeros((n, 3, n, n))
    for b in range(n):
        for mu in range(3):
            E = np.zeros_like(X0)
            E[b, mu] = h
            plus, minus = m.points.with_base_points(X0 + E), m.points.with_base_points(X0 - E)
            dW[b, mu] = (connection_oneform(m, X0 + E) - connection_oneform(m, X0 - E)) / (2 * h)
            dP[b, mu] = (assemble_phi(plus).Phi - assemble_phi(minus).Phi) / (2 * h)
    # d(A_a)_{(b mu),(c nu)} against eps_{mu nu lambda} d_{b lambda} Phi_{ac}
    lhs = np.einsum("bmacn->abmcn", dW) - np.einsum("cnabm->abmcn", dW)
    rhs = np.einsum("mnl,blac->abmcn", EPS, dP)
    return float(np.max(np.abs(lhs - rhs)))
