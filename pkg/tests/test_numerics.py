import numpy as np
import pytest

from conftest import random_directions
from stratscat import harmonics, ode
from stratscat.media import Layer, StratifiedProfile


def test_harmonic_basis_orthonormal():
    L = 8
    dirs, w = harmonics.sphere_quadrature(L + 2)
    B = harmonics.basis_matrix(L, dirs)
    G = B.T @ (w[:, None] * B)
    assert np.max(np.abs(G - np.eye(G.shape[0]))) < 1e-13


def test_project_and_fit_recover_coefficients(rng):
    L = 6
    c = rng.normal(size=harmonics.n_coeffs(L))
    dirs, w = harmonics.sphere_quadrature(L + 2)
    vals = harmonics.evaluate(c, dirs)
    assert np.allclose(harmonics.project(vals, dirs, w, L), c, atol=1e-12)
    d = random_directions(200, seed=1)
    assert np.allclose(harmonics.fit(harmonics.evaluate(c, d), d, L), c, atol=1e-10)


def test_parity_split_symmetry(rng):
    c = rng.normal(size=harmonics.n_coeffs(5))
    even, odd = harmonics.parity_split(c)
    d = random_directions(30, seed=2)
    assert np.allclose(harmonics.evaluate(even, -d), harmonics.evaluate(even, d))
    assert np.allclose(harmonics.evaluate(odd, -d), -harmonics.evaluate(odd, d))


def test_clenshaw_curtis_integrates_polynomials():
    g = ode.LayeredGrid([-1.0, 0.2, 2.0], 16)
    assert abs(g.integrate(g.nodes**7) - (2.0**8 - 1.0) / 8) < 1e-12


def test_grid_derivative_and_interpolation():
    g = ode.LayeredGrid([-1.0, 0.3, 2.0], 24)
    f = np.sin(3 * g.nodes)
    assert np.max(np.abs(g.diff(f) - 3 * np.cos(3 * g.nodes))) < 1e-9
    y = np.linspace(-1, 2, 77)
    assert np.max(np.abs(g.interp(f, y) - np.sin(3 * y))) < 1e-12


def test_propagate_constant_layer():
    # u'' = (a - b/c^2) u with constant c: exact exponential/trigonometric solution
    prof = StratifiedProfile.constant(1.0, y_M=1.0)
    a, b = 1.0, 5.0
    k = np.sqrt(b - a)
    end = ode.propagate(prof, a, b, np.array([1.0, 0.0]), -1.0, 1.0)
    assert np.allclose(end, [np.cos(2 * k), -k * np.sin(2 * k)], atol=1e-12)


def test_propagate_polynomial_layer_against_fine_bvp():
    # the two-point problem with u(-1) = 1, u'(-1) = 0 solved two ways
    layer = Layer(-1.0, 1.0, (1.0, 0.2, -0.1))
    prof = StratifiedProfile((layer,), 1.0, 1.0, 1.0, c_m=0.5, c_M=1.5)
    a, b = 0.5, 3.0
    end = ode.propagate(prof, a, b, np.array([1.0, 0.0]), -1.0, 1.0)
    g = ode.LayeredGrid([-1.0, 1.0], 48)
    P = a - b / layer.speed(g.nodes) ** 2
    # Dirichlet data u(-1) = 1, u(1) = shooting value: the BVP must reproduce both slopes
    u, _ = ode.solve_bvp(g, P, np.zeros(g.size), (1.0, 0.0), (1.0, 0.0), left_rhs=1.0, right_rhs=end[0])
    du = g.diff(u)
    scale = np.max(np.abs(du))
    assert abs(du[0]) < 1e-9 * scale
    assert abs(du[-1] - end[1]) < 1e-9 * scale


@pytest.mark.parametrize("n", [8, 16])
def test_zero_count_matches_sturm(n):
    # u'' = -k^2 u from u(0)=0 has floor(k L / pi) interior zeros
    prof = StratifiedProfile.constant(1.0, y_M=1.0)
    k = n * np.pi / 2 + 0.3
    zeros, _ = ode.count_zeros(prof, 0.0, k**2, np.array([0.0, 1.0]), -1.0, 1.0)
    assert zeros == int(np.floor(2 * k / np.pi))
