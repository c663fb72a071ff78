import numpy as np
import pytest

from stratscat import harmonics
from stratscat.media import AngularTerm, Layer, PerturbationExpansion, StratifiedProfile


def random_directions(n, seed=0, min_abs_n=0.0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        if abs(v[2]) > min_abs_n:
            out.append(v)
    return np.array(out)


def random_profile(rng, n_layers=4, c_plus=1.0, c_minus=None, y_M=1.0, degree=2):
    """Multi-layer polynomial profile with speeds kept inside [0.6, 1.8]."""
    c_minus = c_plus if c_minus is None else c_minus
    cuts = np.sort(rng.uniform(-y_M, y_M, n_layers - 1))
    edges = np.concatenate([[-y_M], cuts, [y_M]])
    layers = []
    for a, b in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (a + b)
        coeffs = [rng.uniform(0.8, 1.5)] + list(rng.uniform(-0.1, 0.1, degree))
        # recentre so the layer's polynomial is small-amplitude around its midpoint value
        p = np.polynomial.Polynomial(coeffs)(np.polynomial.Polynomial([-mid, 1.0]))
        layers.append(Layer(a, b, tuple(p.coef)))
    return StratifiedProfile(tuple(layers), c_plus=c_plus, c_minus=c_minus, y_M=y_M)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def slab_profile():
    """Low-speed core: a slow guide with three modes at kappa = 6."""
    return StratifiedProfile.piecewise_constant([-1.0, -0.5, 0.5, 1.0], [1.0, 0.6, 1.0], 1.0, 1.0)


@pytest.fixture(scope="session")
def layered_pert():
    """J = 4 perturbation on both hemispheres of a c_+ = c_- two-layer medium."""
    prof = StratifiedProfile.piecewise_constant([-1.0, 0.0, 1.0], [0.8, 1.0], 1.0, 1.0)
    coeffs = np.array([0.3, 0.1, 0.2, -0.1])
    pert = PerturbationExpansion(J=4, terms=(AngularTerm(4, "upper", coeffs), AngularTerm(4, "lower", coeffs)))
    return prof, pert


@pytest.fixture(scope="session")
def steplike_pert():
    """c_+ = 1 < c_- = 2 with distinct hemisphere tables and an order-5 term."""
    prof = StratifiedProfile.piecewise_constant([-1.0, 0.3, 1.0], [0.8, 1.2], 1.0, 2.0)
    r = np.random.default_rng(1)
    cu = r.normal(size=harmonics.n_coeffs(3)) * 0.3
    cu[0] = 1.0
    cl = r.normal(size=harmonics.n_coeffs(3)) * 0.3
    cl[0] = 0.7
    pert = PerturbationExpansion(J=4, terms=(AngularTerm(4, "upper", cu), AngularTerm(4, "lower", cl),
                                             AngularTerm(5, "upper", cl)))
    return prof, pert


# ------------------------------------------------------------------ acceptance report

ACCEPTANCE = {}


def record_acceptance(number, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
