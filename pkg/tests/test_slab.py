import numpy as np
import pytest

from stratscat import spectral1d
from stratscat.errors import NonOrthogonalSource, SingularBoundarySystem
from stratscat.media import StratifiedProfile
from stratscat.parametrix import slab


def test_middle_bvp_constant_medium_closed_form():
    c, lam, wb = 1.2, 2.0, 0.6
    prof = StratifiedProfile.constant(c, y_M=1.0)
    grid = slab.slab_grid(prof, 32)
    sol = slab.middle_bvp_solve(prof, lam, wb, np.ones(grid.size), 0.0, grid=grid)
    q = lam * np.sqrt(1 - wb**2) / c
    bp = -1.0 / (c**2 * q**2)
    exact = bp * (1 - np.exp(-1j * q) * np.cos(q * grid.nodes))
    assert np.max(np.abs(sol.values - exact)) < 1e-12
    assert slab.bvp_residual(sol, prof, lam, wb, np.ones(grid.size)) < 1e-9


def test_middle_bvp_radiation_conditions():
    prof = StratifiedProfile.piecewise_constant([-1, 0.2, 1], [0.8, 1.3], 1.0, 1.5)
    lam, wb = 2.0, 0.3
    a1, a2 = 0.7 - 0.2j, 0.1j
    sol = slab.middle_bvp_solve(prof, lam, wb, lambda y: np.cos(y), a1, a2)
    qp = lam * np.sqrt(1 - wb**2)
    qm = lam * np.sqrt(1 / 1.5**2 - wb**2)
    (vb, db), (vt, dt) = sol.end_values()
    assert abs(-1j * qp * vt - dt - a1) < 1e-10
    assert abs(db - 1j * qm * vb - a2) < 1e-10


def test_middle_bvp_rejects_evanescent_lower_side():
    prof = StratifiedProfile.piecewise_constant([-1, 1], [1.5], 1.0, 2.0)
    with pytest.raises(SingularBoundarySystem):
        slab.middle_bvp_solve(prof, 2.0, 0.9, lambda y: 0 * y, 1.0)


def test_evanescent_lower_solve_decays_at_the_exact_rate():
    prof = StratifiedProfile.piecewise_constant([-1, 0.3, 1], [0.8, 1.2], 1.0, 2.0)
    lam, wb = 2.0, 0.9
    sol = slab.evanescent_lower_solve(prof, lam, wb, lambda y: 0 * y, 1.0)
    p = lam * np.sqrt(wb**2 - 1 / 4.0)
    y = np.array([-3.0, -4.0])
    v = sol.at(y)
    rate = np.log(abs(v[0] / v[1]))
    assert abs(rate - p) < 1e-8


def test_cutoff_shape():
    t = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    chi = slab.cutoff(t)
    assert np.all(chi[:3] == 1.0) and np.all(chi[4:] == 0.0) and 0 < chi[3] < 1
    assert np.allclose(slab.cutoff(-t), chi)


def test_c1_corrector_reproduces_jumps():
    rng = np.random.default_rng(0)
    jumps = [rng.normal(size=5) + 1j * rng.normal(size=5) for _ in range(4)]
    zero = np.zeros(5)
    corr = slab.c1_correction(1.0, (jumps[0], jumps[1]), (zero, zero), (jumps[2], jumps[3]), (zero, zero))
    assert np.allclose(corr.evaluate(1.0)[0], jumps[0])
    assert np.allclose(corr.evaluate(1.0, derivative=True)[0], jumps[1], atol=1e-8)
    assert np.allclose(corr.evaluate(-1.0)[0], jumps[2])
    assert np.allclose(corr.evaluate(-1.0, derivative=True)[0], jumps[3], atol=1e-8)
    # supported in a collar of width y_M / 3: vanishes in the middle and outside
    assert np.all(corr.evaluate(np.array([0.0, 0.3, 1.5])) == 0)


def test_matching_constants_close_continuity_equations():
    rng = np.random.default_rng(1)
    bI, vt, dt, vb, db = (rng.normal(size=4) + 1j * rng.normal(size=4) for _ in range(5))
    qp, qm, yM = 1.3, 0.7, 1.0
    mc = slab.match_layers(3, bI, vt, vb, qp, qm, yM)
    res = slab.matching_residuals(3, bI, (vt, dt), (vb, db), mc.rho_R, mc.rho_T, qp, qm, yM)
    assert np.max(np.abs(res[0])) < 1e-14 and np.max(np.abs(res[2])) < 1e-14


def test_offset_constant_inverts_initial_data():
    rho, s0, lam, c, m = 0.4 - 0.1j, 1.1, 2.0, 1.3, 4
    C = slab.offset_constant(rho, s0, lam, c, m)
    assert np.isclose(1j * C / (2 * lam * c * np.sin(s0) ** m), rho)


# ------------------------------------------------------------------ mode channels


@pytest.fixture(scope="module")
def spectrum(slab_profile):
    return spectral1d.guided_modes(slab_profile, 6.0)


def test_mode_channel_solve_matches_spectral_oracle(slab_profile, spectrum):
    j, k = 0, 1
    lam = np.sqrt(spectrum.eigenvalues[j])
    d = spectrum.modes[k]
    g = slab.mode_channel_solve(slab_profile, lam, 6.0, d, spectrum, j)
    exact = spectrum.modes[k] / (spectrum.eigenvalues[k] - lam**2)
    assert np.max(np.abs(g - exact)) < 1e-9 * np.max(np.abs(exact))


def test_mode_channel_decompose(spectrum):
    d = spectrum.modes[2] + 0.3 * spectrum.modes[0]
    perp, coeff = slab.mode_channel_decompose(d, spectrum, 0)
    assert abs(coeff - 0.3) < 1e-10
    assert np.max(np.abs(perp - spectrum.modes[2])) < 1e-9


def test_mode_channel_rejects_resonant_source(slab_profile, spectrum):
    lam = np.sqrt(spectrum.eigenvalues[0])
    with pytest.raises(NonOrthogonalSource):
        slab.mode_channel_solve(slab_profile, lam, 6.0, spectrum.modes[0], spectrum, 0)
