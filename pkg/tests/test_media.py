import numpy as np
import pytest

from conftest import random_directions, random_profile
from stratscat import harmonics
from stratscat.errors import BelowExpansionRadius, ConfigInvalid, EquatorialEvaluation
from stratscat.media import (AngularTerm, EffectivePotential, Layer, PerturbationExpansion, StratifiedProfile,
                             eval_c, eval_c0, eval_V, perturbation_series, potential_series, validate_hypotheses)


def test_profile_limits_and_layers():
    prof = StratifiedProfile.piecewise_constant([-1, 0, 1], [0.7, 1.3], 1.0, 2.0)
    assert eval_c0(prof, 5.0) == 1.0
    assert eval_c0(prof, -5.0) == 2.0
    assert eval_c0(prof, 0.5) == 1.3
    assert eval_c0(prof, -0.5) == 0.7
    assert prof.c_m == 0.7 and prof.c_M == 2.0


def test_profile_bounds_on_dense_sample(rng):
    for _ in range(20):
        prof = random_profile(rng, n_layers=3, c_minus=1.4)
        y = np.linspace(-3, 3, 4001)
        c = eval_c0(prof, y)
        assert np.all(c >= prof.c_m - 1e-14) and np.all(c <= prof.c_M + 1e-14)


@pytest.mark.parametrize("kw", [
    dict(layers=((-1, 0.5, (1.0,)),), c_plus=1.0, c_minus=1.0, y_M=1.0),      # gap
    dict(layers=((-1, 1, (1.0,)),), c_plus=2.0, c_minus=1.0, y_M=1.0),        # c_- < c_+
    dict(layers=((-1, 1, (1.0, -2.0)),), c_plus=1.0, c_minus=1.0, y_M=1.0),   # speed hits zero
])
def test_profile_rejects_bad_input(kw):
    with pytest.raises(ConfigInvalid):
        StratifiedProfile(**kw)


def test_mirrored_swaps_limits():
    prof = StratifiedProfile((Layer(-1, 1, (1.0, 0.2)),), 1.0, 1.5, 1.0)
    m = prof.mirrored()
    y = np.linspace(-2, 2, 41)
    assert np.allclose(m.speed(y), prof.speed(-y))
    assert (m.c_plus, m.c_minus) == (1.5, 1.0)


def test_constant_perturbation_free_case():
    prof = StratifiedProfile.constant(1.0)
    pert = PerturbationExpansion(J=4)
    z = np.array([[3.0, 1.0, 2.0]])
    assert np.allclose(eval_c(prof, pert, z), 1.0)
    assert np.allclose(eval_V(EffectivePotential(prof, pert, 2.0), z), 0.0)
    assert np.allclose(eval_V(EffectivePotential(prof, pert, 0.0), z), 0.0)


def test_eval_c_errors(layered_pert):
    prof, pert = layered_pert
    with pytest.raises(EquatorialEvaluation):
        eval_c(prof, pert, np.array([20.0, 1.0, 0.0]))
    with pytest.raises(BelowExpansionRadius):
        eval_c(prof, pert, np.array([1.0, 1.0, 1.0]))


def test_potential_leading_term(layered_pert):
    # |z|^J V(r theta) -> -2 lam^2 gamma_J / c0^3
    prof, pert = layered_pert
    lam = 2.0
    pot = EffectivePotential(prof, pert, lam)
    th = random_directions(20, seed=3, min_abs_n=0.1)
    g = pert.gamma(4, th)
    lead = -2.0 * lam**2 * g / prof.c_plus**3
    errs = []
    for r in (1e2, 1e3, 1e4):  # next correction is O(r^-4)
        errs.append(np.max(np.abs(r**4 * eval_V(pot, r * th) - lead)))
    assert errs[-1] < 1e-6 * max(1.0, np.abs(lead).max())
    assert errs[0] > errs[1] > errs[2]


def test_potential_series_matches_direct(layered_pert):
    prof, pert = layered_pert
    lam, K, r = 1.7, 14, 30.0
    th = random_directions(8, seed=5, min_abs_n=0.2)
    up = th[:, 2] > 0
    th = th[up]
    p = perturbation_series(pert, th, K)
    U = potential_series(p, prof.c_plus, lam, K)
    series = sum(U[k] * r ** (-k) for k in range(K + 1))
    direct = eval_V(EffectivePotential(prof, pert, lam), r * th)
    assert np.max(np.abs(series - direct)) < 1e-14 * max(1.0, np.abs(direct).max()) + 1e-18


def test_bounded_rescaled_potential(layered_pert):
    prof, pert = layered_pert
    pot = EffectivePotential(prof, pert, 2.0)
    th = random_directions(30, seed=9, min_abs_n=0.1)
    rs = np.logspace(1.01, 6, 12)
    vals = np.array([np.abs(r**4 * eval_V(pot, r * th)) for r in rs])
    assert vals.max() < 2.0 * vals[-1].max() + 1e-12


def test_truncation_increment_bound(steplike_pert):
    prof, pert = steplike_pert
    th = random_directions(30, seed=4, min_abs_n=0.1)
    sup5 = sum(t.sup_bound() for t in pert.terms if t.order == 5)
    for r in (20.0, 100.0):
        d = eval_c(prof, pert, r * th, N=5) - eval_c(prof, pert, r * th, N=4)
        assert np.all(np.abs(d) <= sup5 * r**-5 + 1e-15)


def test_hemisphere_selection():
    cu = np.zeros(4)
    cu[0] = 1.0
    pert = PerturbationExpansion(J=4, terms=(AngularTerm(4, "upper", cu),))
    d = np.array([[0, 0, 1.0], [0, 0, -1.0]])
    g = pert.gamma(4, d)
    assert g[0] == pytest.approx(harmonics.evaluate(cu, d[:1])[0]) and g[1] == 0.0


def test_validate_hypotheses_examples():
    const = StratifiedProfile.constant(1.0)
    assert validate_hypotheses(const, PerturbationExpansion(J=2), "H1") == []
    step = StratifiedProfile.piecewise_constant([-1, 1], [1.5], 1.0, 2.0)
    assert "J >= 4 required" in validate_hypotheses(step, PerturbationExpansion(J=2), "H2")
    assert "c_+ = c_- required" in validate_hypotheses(step, PerturbationExpansion(J=4), "H1")


def test_perturbation_rejects_bad_orders():
    with pytest.raises(ConfigInvalid):
        PerturbationExpansion(J=4, terms=(AngularTerm(3, "upper", np.zeros(4)),))
    with pytest.raises(ConfigInvalid):
        AngularTerm(4, "sideways", np.zeros(4))
