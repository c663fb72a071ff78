import numpy as np
import pytest
from scipy.special import eval_legendre

from stratscat import harmonics, spectral1d
from stratscat.errors import (ConfigInvalid, IllPosedKernel, InsufficientFamilyResolution,
                              SteplikeUnsupported)
from stratscat.geometry import GeodesicFrame
from stratscat.inverse import marchenko as M
from stratscat.inverse import rays as R
from stratscat.inverse import strip as S
from stratscat.media import AngularTerm, Layer, PerturbationExpansion, StratifiedProfile


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture(scope="module")
def split16():
    c = np.random.default_rng(0).normal(size=harmonics.n_coeffs(16))
    return harmonics.parity_split(c)


# ------------------------------------------------------------------ rays / Funk


def test_funk_multipliers_are_legendre_values():
    L = 12
    mu, dev = R.funk_multipliers(L)
    deg = harmonics.degrees(L)
    assert dev < 1e-12
    assert np.max(np.abs(mu - 2 * np.pi * eval_legendre(deg, 0.0))) < 1e-12


def test_funk_round_trip_even(split16):
    ce, co = split16
    P, W = R.pole_grid(16)
    G = R.funk_transform(ce, P, n_circle=64)
    assert _rel(R.funk_invert_even(G, P, W, 16), ce) < 1e-10
    assert np.max(np.abs(R.funk_transform(co, P))) < 1e-12


def test_weighted_ray_integral_constant_and_quadrature(split16):
    ce, _ = split16
    om = np.array([0.3, 0.4, np.sqrt(0.75)])
    one = np.r_[np.sqrt(4 * np.pi), np.zeros(3)]
    assert abs(R.weighted_ray_integral(one, om, 0.3, 2) - np.pi) < 1e-13
    th = np.linspace(0, 2 * np.pi, 5)
    got = R.weighted_ray_integral(ce[:9], om, th, 4)
    s = np.linspace(0, np.pi, 4001)
    fr = GeodesicFrame(om)
    vals = harmonics.evaluate(ce[:9], fr.point(s[None, :], th[:, None]).reshape(-1, 3)).reshape(5, -1)
    ref = np.trapezoid(vals * np.sin(s) ** 2, s, axis=1)
    assert np.max(np.abs(got - ref)) < 1e-6


def test_folded_integral_equals_broken_path(split16):
    ce, co = split16
    W = (ce + co)[:harmonics.n_coeffs(5)]
    om = np.array([0.5, -0.3, 0.6])
    om /= np.linalg.norm(om)
    mirror = np.diag([1.0, 1.0, -1.0])
    fr = GeodesicFrame(om)
    x, wq = np.polynomial.legendre.leggauss(60)
    for th in (0.4, 2.0, 4.5):
        tang = fr.point(np.pi / 2, th)
        s0 = np.arctan2(om[2], -tang[2]) % np.pi  # p_n(s0) = 0
        total = 0.0
        for a, b, M in ((0.0, s0, np.eye(3)), (s0, np.pi, mirror)):
            s = 0.5 * (b - a) * (x + 1) + a
            pts = (np.cos(s)[:, None] * om + np.sin(s)[:, None] * tang) @ M.T
            assert np.all(pts[:, 2] >= -1e-12)  # the broken path stays in the upper hemisphere
            total += 0.5 * (b - a) * wq @ (harmonics.evaluate(W, pts) * np.sin(s) ** 2)
        folded = R.weighted_ray_integral(W, om, th, 4, reflected=True)
        assert abs(folded - total) < 1e-12 * max(1.0, abs(total))


def test_ray_family_matches_direct_integral(split16):
    ce, _ = split16
    P, _ = R.pole_grid(6)
    w = ce[:harmonics.n_coeffs(6)]
    n_t = 64
    I4 = R.ray_family(w, P[:3], n_t, 4)
    e1, e2 = R.circle_frames(P[:3])
    for j in (0, 5, 40):
        t = 2 * np.pi * j / n_t
        start = np.cos(t) * e1[1] + np.sin(t) * e2[1]
        tang = -np.sin(t) * e1[1] + np.cos(t) * e2[1]
        x, wq = np.polynomial.legendre.leggauss(80)
        s = 0.5 * np.pi * (x + 1)
        pts = np.cos(s)[:, None] * start + np.sin(s)[:, None] * tang
        ref = 0.5 * np.pi * wq @ (harmonics.evaluate(w, pts) * np.sin(s) ** 2)
        assert abs(I4[1, j] - ref) < 1e-12


def test_reduce_order(split16):
    ce, _ = split16
    P, _ = R.pole_grid(6)
    w = ce[:harmonics.n_coeffs(6)]
    I6 = R.ray_family(w, P, 64, 6)
    I4 = R.ray_family(w, P, 64, 4)
    I2 = R.ray_family(w, P, 64, 2)
    assert np.max(np.abs(R.reduce_order(I4, 4) - I2)) < 1e-11
    assert np.max(np.abs(R.reduce_order(I6, 6) - I4)) < 1e-11
    with pytest.raises(ConfigInvalid):
        R.reduce_order(I2, 2)


def test_reduce_order_detects_unresolved_family(split16):
    # even data give only modes 0 and +-2 in t; odd data fill the whole spectrum
    _, co = split16
    P, _ = R.pole_grid(16)
    I4 = R.ray_family(co, P, 8, 4)
    with pytest.raises(InsufficientFamilyResolution):
        R.reduce_order(I4, 4)


def test_odd_part_recovery(split16):
    _, co = split16
    L = 7
    wo = co[:harmonics.n_coeffs(L)]
    P, W = R.pole_grid(L)
    Q = R.equatorial_odd_integrals(R.ray_family(wo, P, 64, 3))
    assert _rel(R.recover_odd_part(Q, P, W, L), wo) < 1e-10


def test_parity_routing_leaks_nothing(split16):
    ce, co = split16
    L = 6
    P, _ = R.pole_grid(L)
    we, wo = ce[:harmonics.n_coeffs(L)], co[:harmonics.n_coeffs(L)]
    assert np.max(np.abs(R.full_circle_integrals(R.ray_family(wo, P, 64, 2)))) < 1e-12
    assert np.max(np.abs(R.equatorial_odd_integrals(R.ray_family(we, P, 64, 3)))) < 1e-12


# ------------------------------------------------------------------ layer stripping


@pytest.fixture(scope="module")
def flat():
    prof = StratifiedProfile.piecewise_constant([-1, 0.2, 1], [0.8, 0.9], 1.0, 1.0)
    lam, L = 2.0, 6
    return prof, lam, L, S.symbol_grid(L), S.PrefactorTable(prof, lam, "transmitted")


def _both(*pairs):
    return tuple(AngularTerm(k, h, g) for k, g in pairs for h in ("upper", "lower"))


def test_calibration_matches_transport_constant(flat):
    prof, lam, *_ = flat
    K = S.calibrate(prof, lam)
    assert abs(K - S.transport_constant(prof, lam)) < 1e-6


@pytest.mark.parametrize("J", [4, 5])
def test_strip_single_layer(flat, J):
    prof, lam, L, grid, pref = flat
    c = np.random.default_rng(3).normal(size=harmonics.n_coeffs(L))
    g = c * S.recoverable_slots(L, J)
    pert = PerturbationExpansion(J=J, terms=_both((J, g)))
    sym = S.synthesize_symbols(prof, pert, lam, [J], grid, prefactors=pref)
    res = S.layer_strip(sym, prof, lam, [J], band_limit=L, prefactors=pref)
    assert res.status == "ok"
    assert _rel(S.recovered_gamma(res, J), g) < 1e-10
    assert res.imag_parts[J] < 1e-10


def test_strip_nonlinear_three_orders(flat):
    prof, lam, L, grid, pref = flat
    rng = np.random.default_rng(4)
    gs = {k: 0.2 * rng.normal(size=harmonics.n_coeffs(L)) * S.recoverable_slots(L, k) for k in (2, 3, 4)}
    pert = PerturbationExpansion(J=2, terms=_both(*gs.items()))
    sym = S.synthesize_symbols(prof, pert, lam, [2, 3, 4], grid, prefactors=pref)
    res = S.layer_strip(sym, prof, lam, [2, 3, 4], band_limit=L, prefactors=pref)
    assert res.status == "ok"
    for k, g in gs.items():
        assert _rel(S.recovered_gamma(res, k), g) < 1e-9


def test_strip_triangularity(flat):
    prof, lam, L, grid, pref = flat
    rng = np.random.default_rng(5)
    g4 = rng.normal(size=harmonics.n_coeffs(L)) * S.recoverable_slots(L, 4)
    g5 = rng.normal(size=harmonics.n_coeffs(L)) * S.recoverable_slots(L, 5)
    out = []
    for a in (0.0, 0.5):
        pert = PerturbationExpansion(J=4, terms=_both((4, g4 * (1 + a)), (5, g5)))
        sym = S.synthesize_symbols(prof, pert, lam, [4, 5], grid, prefactors=pref)
        out.append(S.recovered_gamma(S.layer_strip(sym, prof, lam, [4, 5], band_limit=L, prefactors=pref), 5))
    assert _rel(out[1], out[0]) < 1e-6
    # and the order-4 symbol does not see gamma_5
    p1 = PerturbationExpansion(J=4, terms=_both((4, g4)))
    p2 = PerturbationExpansion(J=4, terms=_both((4, g4), (5, g5)))
    s1 = S.synthesize_symbols(prof, p1, lam, [4], grid, prefactors=pref).orders[4]
    s2 = S.synthesize_symbols(prof, p2, lam, [4], grid, prefactors=pref).orders[4]
    assert np.array_equal(s1, s2)


def test_symbols_linear_in_leading_layer(flat):
    prof, lam, L, grid, pref = flat
    g = np.random.default_rng(6).normal(size=harmonics.n_coeffs(L))
    s = [S.synthesize_symbols(prof, PerturbationExpansion(J=4, terms=_both((4, a * g))), lam, [4], grid,
                              prefactors=pref).orders[4] for a in (1.0, 2.5)]
    assert np.allclose(s[1], 2.5 * s[0], rtol=1e-12, atol=1e-15)


def test_strip_halts_on_inconsistent_data(flat):
    prof, lam, L, grid, pref = flat
    g = np.random.default_rng(7).normal(size=harmonics.n_coeffs(L)) * S.recoverable_slots(L, 4)
    sym = S.synthesize_symbols(prof, PerturbationExpansion(J=4, terms=_both((4, g))), lam, [4], grid,
                               prefactors=pref)
    clean = sym.orders[4]
    # a degree-8 layer lies outside what a band limit of 6 can represent
    hi = np.zeros(harmonics.n_coeffs(8))
    hi[harmonics.degrees(8) == 8] = 0.1
    extra = S.synthesize_symbols(prof, PerturbationExpansion(J=4, terms=_both((4, hi))), lam, [4], grid,
                                 prefactors=pref)
    sym.orders[4] = clean + extra.orders[4]
    res = S.layer_strip(sym, prof, lam, [4], band_limit=L, prefactors=pref)
    assert res.status == "halted" and res.halted_at == 4
    # white noise is caught earlier as an unresolved family
    noise = np.random.default_rng(8).normal(size=clean.shape)
    sym.orders[4] = clean + 1e-2 * np.abs(clean).max() * noise
    with pytest.raises(InsufficientFamilyResolution):
        S.layer_strip(sym, prof, lam, [4], band_limit=L, prefactors=pref)


def test_strip_reflected_mode():
    prof = StratifiedProfile.piecewise_constant([-1, 0.2, 1], [0.8, 1.5], 1.0, 2.0)
    lam, L = 2.0, 6
    c = np.random.default_rng(3).normal(size=harmonics.n_coeffs(L)) * S.recoverable_slots(L, 4, "reflected")
    pert = PerturbationExpansion(J=4, terms=(AngularTerm(4, "upper", c),))
    grid = S.symbol_grid(L)
    pref = S.PrefactorTable(prof, lam, "reflected")
    sym = S.synthesize_symbols(prof, pert, lam, [4], grid, mode="reflected", prefactors=pref)
    res = S.layer_strip(sym, prof, lam, [4], band_limit=L, prefactors=pref)
    assert _rel(S.recovered_gamma(res, 4), c) < 1e-10


def test_mode_checks():
    step = StratifiedProfile.piecewise_constant([-1, 1], [1.0], 1.0, 2.0)
    flat_ = StratifiedProfile.constant(1.0)
    with pytest.raises(SteplikeUnsupported):
        S.PrefactorTable(step, 2.0, "transmitted")
    with pytest.raises(ConfigInvalid):
        S.PrefactorTable(flat_, 2.0, "reflected")


def test_recoverable_slots():
    l = harmonics.degrees(4)
    assert np.array_equal(S.recoverable_slots(4, 4), l % 2 == 0)
    assert np.array_equal(S.recoverable_slots(4, 5), l % 2 == 1)
    assert S.recoverable_slots(4, 4, "reflected").sum() == 1 + 3 + 5  # (l, m) = (0,0), (2,-2|0|2), (4,-4..4 even)


def test_fill_masked():
    n_t = 32
    t = 2 * np.pi * np.arange(n_t) / n_t
    v = np.stack([np.cos(2 * t) + 0.3j * np.sin(t), np.exp(1j * 3 * t)])
    mask = np.zeros_like(v, dtype=bool)
    mask[:, 5:9] = True
    bad = np.where(mask, 7.0, v)
    f = S.fill_masked(bad, mask, 4)
    assert np.allclose(f, v, atol=1e-12)
    assert np.array_equal(f[~mask], bad[~mask])
    assert np.array_equal(S.fill_masked(f, mask, 4)[~mask], f[~mask])


# ------------------------------------------------------------------ Marchenko


def test_marchenko_reflectionless_sech2():
    kap, c = 1.0, 1.3
    P = M.marchenko_invert_1d(np.linspace(0, 1, 3), np.zeros(3), [(kap, c)], (-4, 4), n=512, tail=8)
    assert P.l2_error(M.reflectionless_potential(kap, c)) < 1e-4


def _bump(amp):
    co = amp * np.polynomial.polynomial.polypow([1, 0, -1], 3)
    co[0] += 1
    return StratifiedProfile((Layer(-1, 1, tuple(co)),), 1.0, 1.0, 1.0)


def test_marchenko_barrier_bump():
    prof, lam = _bump(0.02), 10.0
    wn = np.linspace(1e-3, 1, 400)
    Rp = spectral1d.reflection_of_k(prof, lam, lam * wn)
    est = M.recover_c0_from_coefficients(wn, Rp, lam, 1.0, 1.0, x_range=(-2, 2), n=400)
    assert est.potential.l2_error(M.potential_from_profile(prof, lam)) < 0.05
    assert np.max(np.abs(est.c0 - prof.speed(est.y))) < 1e-3


def test_marchenko_well_with_bound_states():
    prof, lam = _bump(-0.05), 6.0
    bs = M.bound_states_from_modes(prof, lam)
    assert len(bs) == 1
    wn = np.linspace(1e-3, 1, 400)
    Rp = spectral1d.reflection_of_k(prof, lam, lam * wn)
    est = M.recover_c0_from_coefficients(wn, Rp, lam, 1.0, 1.0, bound_states=bs, x_range=(-2, 2), n=400)
    assert est.potential.l2_error(M.potential_from_profile(prof, lam)) < 0.05
    assert M.certify_roundtrip(est, wn[::40], Rp[::40], y_M=2.0) < 1e-2


def test_marchenko_errors():
    with pytest.raises(IllPosedKernel):
        M.marchenko_invert_1d(np.linspace(0, 1, 3), np.zeros(3), [(0.05, 1e5)], (-3, 3), n=128)
    with pytest.raises(SteplikeUnsupported):
        M.recover_c0_from_coefficients([0.5], [0.1], 2.0, 1.0, 2.0)
    with pytest.raises(ConfigInvalid):
        M.kernel_data([1.0, 0.5], [0, 0])
    with pytest.raises(SteplikeUnsupported):
        M.bound_states_from_modes(StratifiedProfile.piecewise_constant([-1, 1], [1.0], 1.0, 2.0), 2.0)
