import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from persistlab.kernels import Family, KernelSpec
from persistlab.persistence import (
    DomainSpec,
    Event,
    ExponentFit,
    InsufficientSurvivors,
    PsiModel,
    Shape,
    estimate_events,
    estimate_persistence,
    fit_exponent,
    fit_ladder,
    refinement_pair,
    region_mask,
    run_preset,
    sample_domain,
    wilson,
)
from persistlab.persistence.presets import log_floor, preset_params, ratio_variation, rho_for_lags

FBM05 = KernelSpec(Family.FBM, 0.5)

# statsmodels proportion_confint(method="wilson") values
WILSON_FROZEN = [
    (5, 10, 0.23659309051256394, 0.7634069094874361),
    (0, 1000, 0.0, 0.003826758485555125),
    (1000, 1000, 0.996173241514445, 1.0),
    (123, 4567, 0.022620022313028024, 0.032039816815401245),
]


# --- domains -------------------------------------------------------------------

def test_interval_lattice_anchored_at_zero():
    d = DomainSpec(Shape.INTERVAL, 4.0, lo=-1.0, spacing=0.5)
    lay = d.layout()
    assert 0.0 not in lay.points
    np.testing.assert_allclose(lay.points, 0.5 * lay.ks)
    assert lay.points.min() == -3.5 and lay.points.max() == 4.0
    assert DomainSpec(Shape.INTERVAL, 2.0, n_grid=8).layout().size == 8


def test_two_d_shapes():
    tri = DomainSpec(Shape.TRIANGLE, 2.0, spacing=0.5).points()
    assert np.all(tri > 0) and np.all(tri.sum(axis=1) < 4.0)
    cone = DomainSpec(Shape.CONE, 4.0, a=0.5, spacing=0.5).points()
    r = cone[:, 0] / cone[:, 1]
    assert np.all((r >= 0.5 - 1e-12) & (r <= 2.0 + 1e-12))
    sq = DomainSpec(Shape.SQUARE, 8.0, spacing=1.0, log_grid=True, log_floor=0.5).points()
    assert np.all(sq.prod(axis=1) >= 0.5 * (1 - 1e-12)) and sq.max() == pytest.approx(8.0)
    band = DomainSpec(Shape.BAND, 4.0, a=0.5, c=0.5, d=1.0, spacing=0.25).points()
    assert band.size and np.all(np.abs(band[:, 0] - band[:, 1]) < math.log(2))


def test_domain_validation_and_roundtrip():
    for bad in (dict(shape="INTERVAL", T=0.0), dict(shape="INTERVAL", T=1.0, lo=1.0),
                dict(shape="CONE", T=1.0), dict(shape="CONE", T=1.0, a=1.5),
                dict(shape="BAND", T=1.0, a=0.5, c=2, d=1), dict(shape="TRIANGLE", T=1.0, log_grid=True),
                dict(shape="SQUARE", T=1.0, exclude="nowhere"), dict(shape="HEXAGON", T=1.0)):
        with pytest.raises(ValueError):
            DomainSpec(**bad)
    d = DomainSpec(Shape.CONE, 3.0, a=0.25, spacing=0.1, exclude="hyperbola")
    assert DomainSpec.from_dict(d.to_dict()) == d
    with pytest.raises(ValueError):
        DomainSpec.from_dict({"shape": "SQUARE", "T": 1.0, "radius": 2})


def test_region_masks():
    p = np.array([[0.5, 0.5], [2.0, 0.4], [2.0, 2.0]])
    np.testing.assert_array_equal(region_mask("unit", p), [True, False, False])
    np.testing.assert_array_equal(region_mask("hyperbola", p), [True, True, False])
    assert region_mask("all", p).all()


# --- estimates -----------------------------------------------------------------------

@pytest.mark.parametrize("k,n,lo,hi", WILSON_FROZEN)
def test_wilson_frozen(k, n, lo, hi):
    a, b = wilson(k, n)
    assert a == pytest.approx(lo, abs=1e-15) and b == pytest.approx(hi, abs=1e-15)


def test_brownian_closed_form_small():
    for i, T in enumerate((1.0, 4.0)):
        ref = refinement_pair(FBM05, DomainSpec(Shape.INTERVAL, T, n_grid=512), 1.0, 20_000, seed=3, tags=(i,))
        exact = 2 * norm.cdf(1 / math.sqrt(T)) - 1
        lo, hi = ref.coarse.ci95
        assert ref.coarse.p_hat >= ref.fine.p_hat
        assert abs(ref.coarse.p_hat - exact) <= 3 * (hi - lo) / 2 + ref.bias_bound


def test_large_level_survives():
    e = estimate_persistence(KernelSpec(Family.IFBM, 0.3), DomainSpec(Shape.INTERVAL, 1.0, n_grid=64),
                             level=1e6, n_trials=1000)
    assert e.p_hat == 1.0 and e.low_information and e.event is Event.SUP_BELOW


def test_estimate_deterministic_and_worker_invariant():
    k = KernelSpec(Family.DUAL_IFBM, 0.6)
    d = DomainSpec(Shape.INTERVAL, 3.0, spacing=0.1)
    a = estimate_persistence(k, d, 0.5, 3000, seed=9)
    b = estimate_persistence(k, d, 0.5, 3000, seed=9, workers=3)
    np.testing.assert_array_equal(a.survivors, b.survivors)
    with pytest.raises(ValueError):
        estimate_persistence(k, d, 0.5, 999)
    with pytest.raises(ValueError):
        estimate_persistence(KernelSpec(Family.FBS, 0.5), d, 0.5, 1000)


def test_events_inclusion_and_decay():
    pz, pg = [], []
    for i, T in enumerate((2.0, 8.0, 32.0)):
        ev = estimate_events(FBM05, DomainSpec(Shape.INTERVAL, T, n_grid=256), "unit", 4000, seed=1, tags=(i,))
        assert ev.inclusion_holds
        assert ev.Z.p_hat <= ev.G.p_hat
        pz.append(ev.Z.p_hat)
        pg.append(ev.G.p_hat)
    assert pz[0] > pz[1] > pz[2] and pg[0] > pg[1] > pg[2]


def test_events_whole_domain_vacuous():
    ev = estimate_events(FBM05, DomainSpec(Shape.INTERVAL, 4.0, n_grid=64), "all", 1000)
    assert ev.G.p_hat == 1.0 and ev.Z.p_hat == 1.0
    with pytest.raises(ValueError):
        estimate_events(KernelSpec(Family.SECH), DomainSpec(Shape.INTERVAL, 4.0), "unit", 1000)


def test_events_sheet():
    ev = estimate_events(KernelSpec(Family.FBS, 0.5), DomainSpec(Shape.SQUARE, 3.0, spacing=0.5), "hyperbola",
                         2000, seed=4)
    assert ev.inclusion_holds


def test_sample_domain_shapes():
    e = sample_domain(KernelSpec(Family.DUAL_FBS, 0.5), DomainSpec(Shape.TRIANGLE, 1.0, spacing=0.5), 200)
    assert e.values.shape == (200, 3) and e.meta["sampler"] == "kronecker"


# --- fits ------------------------------------------------------------------------------

@pytest.mark.parametrize("model,theta", [(PsiModel.LOG_T, 0.25), (PsiModel.LOG_T_SQ, 0.1), (PsiModel.LINEAR_T, 0.03)])
def test_planted_slope_recovered(model, theta):
    T = np.array([2.0, 4.0, 8.0, 16.0, 32.0])
    p = np.exp(-theta * model(T) - 0.2)
    fit = fit_ladder(T, p, 10**6, model)
    assert abs(fit.theta_hat - theta) < 1e-10
    assert abs(fit.intercept - 0.2) < 1e-10
    assert fit.chi2_dof < 1e-15


@given(st.floats(0.01, 2.0), st.floats(-1.0, 1.0))
@settings(max_examples=50)
def test_planted_slope_property(theta, c):
    T = np.array([2.0, 4.0, 8.0, 16.0])
    p = np.exp(-theta * np.log(T) - abs(c))
    assert fit_ladder(T, p, 10**7, "LOG_T").theta_hat == pytest.approx(theta, abs=1e-10)


def test_fit_drops_sparse_points_and_raises():
    T = [2.0, 4.0, 8.0, 16.0, 32.0]
    p = [0.5, 0.3, 0.2, 0.1, 0.0005]
    fit = fit_ladder(T, p, 10_000, "LOG_T")
    assert fit.dropped == [32.0] and fit.T_ladder == T[:4]
    with pytest.raises(InsufficientSurvivors):
        fit_ladder(T, [0.5, 0.3, 0.0001, 0.0001, 0.0], 10_000, "LOG_T")


def test_fit_validation():
    with pytest.raises(ValueError):
        ExponentFit(PsiModel.LOG_T, [1, 2, 3], 0.2, 0.01, 0.0, "w")
    with pytest.raises(ValueError):
        ExponentFit(PsiModel.LOG_T, [1, 2, 3, 4], float("nan"), 0.01, 0.0, "w")


def test_fit_exponent_from_estimates():
    k = KernelSpec(Family.SECH)
    ests = [estimate_persistence(k, DomainSpec(Shape.INTERVAL, T, spacing=0.1), 0.0, 4000, seed=2, tags=(i,))
            for i, T in enumerate((1.0, 2.0, 3.0, 4.0))]
    fit = fit_exponent(ests, "LINEAR_T")
    assert fit.theta_hat > 0 and fit.stderr >= fit.stderr_raw


# --- presets ---------------------------------------------------------------------------

def test_preset_params_validation():
    assert preset_params("sinai")["ladder"][0] == 16.0
    with pytest.raises(ValueError):
        preset_params("nope")
    with pytest.raises(ValueError):
        preset_params("sinai", {"colour": 1})
    with pytest.raises(ValueError):
        preset_params("sinai", {"ladder": [4, 2, 8, 16]})


def test_helpers():
    assert log_floor(0.5) == pytest.approx(math.exp(-4))
    rho = rho_for_lags(0.5, np.linspace(0.05, 10, 200))
    assert rho > 1


def test_small_presets_run(tmp_path):
    rep = run_preset("sech_eta", {"n_trials": 2000, "ladder": [1.0, 2.0, 3.0, 4.0]}, seed=1, out_dir=tmp_path)
    assert (tmp_path / "sech_eta.json").exists()
    assert rep.series[0].fit is not None and len(list(rep.ladder_rows())) == 4
    tri = run_preset("fbs_triangle_dual", {"n_trials": 4000, "ladder": [1.5, 2.0, 2.5, 3.0]}, seed=1)
    assert tri.series[0].psi_model is PsiModel.LOG_T_SQ
    sp = run_preset("slepian_pair", {"n_trials": 2000}, seed=1)
    assert sp.extra["a_H"] > 0 and any(p.name.startswith("slepian_order") for p in sp.predicates)


def test_ratio_variation():
    class E:
        def __init__(self, p):
            self.p_hat, self.n_survive = p, 1
    T = [4.0, 8.0, 16.0, 32.0]
    ests = [E(math.exp(-0.3 * math.log(t) ** 2)) for t in T]
    var, r = ratio_variation(ests, T)
    assert var == pytest.approx(0.0, abs=1e-12) and np.allclose(r, 0.3)
