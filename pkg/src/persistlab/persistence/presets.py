"""Named experiment ladders with pass/fail predicates."""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ..kernels import Family, KernelSpec, rho_star_on, verify_cosh_bound
from ..rng import tag_of
from .domains import DomainSpec, Shape
from .estimate import estimate_persistence
from .fit import ExponentFit, PsiModel, fit_exponent


@dataclass
class Predicate:
    name: str
    value: float
    threshold: float
    passed: bool
    gated: bool = True
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "passed": bool(self.passed), "gated": self.gated, "detail": self.detail}


@dataclass
class LadderSeries:
    label: str
    psi_model: PsiModel
    T: list
    estimates: list
    fit: ExponentFit | None = None
    fit_T: list | None = None  # abscissa fed to psi when it differs from T (triangle: e^T)

    def rows(self):
        psi = self.psi_model(np.asarray(self.T if self.fit_T is None else self.fit_T, dtype=float))
        for T, s, e in zip(self.T, psi, self.estimates):
            lo, hi = e.ci95
            yield {"series": self.label, "T": float(T), "psi": float(s), "p_hat": e.p_hat,
                   "ci_lo": lo, "ci_hi": hi, "n_trials": e.n_trials, "n_survive": e.n_survive}

    def to_dict(self) -> dict:
        return {"label": self.label, "psi_model": self.psi_model.value, "T": list(map(float, self.T)),
                "fit_T": self.fit_T,
                "estimates": [e.to_dict() for e in self.estimates],
                "fit": None if self.fit is None else self.fit.to_dict()}


@dataclass
class PresetReport:
    name: str
    params: dict
    seed: int
    series: list = field(default_factory=list)
    predicates: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    elapsed_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.predicates if p.gated)

    def failing(self):
        return [p for p in self.predicates if p.gated and not p.passed]

    def ladder_rows(self):
        for s in self.series:
            yield from s.rows()

    def to_dict(self) -> dict:
        return {"preset": self.name, "params": self.params, "seed": self.seed, "passed": self.passed,
                "predicates": [p.to_dict() for p in self.predicates],
                "series": [s.to_dict() for s in self.series], "extra": self.extra,
                "elapsed_s": round(self.elapsed_s, 3)}

    def write(self, out_dir) -> str:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"{self.name}.json")
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
        return path


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _ladder(kernel, domains, level, n_trials, seed, label, workers, substeps=1):
    tag = tag_of(label)
    return [estimate_persistence(kernel, d, level, n_trials, seed, tags=(tag, i), workers=workers,
                                 substeps=substeps)
            for i, d in enumerate(domains)]


def _series(label, model, T, ests, fit_T=None):
    s = LadderSeries(label, PsiModel(model), list(T), ests,
                     fit_T=None if fit_T is None else [float(t) for t in fit_T])
    s.fit = fit_exponent(ests, model, T_values=fit_T)
    return s


def _monotone_predicate(label, ests):
    """p_hat nonincreasing along the ladder within 3 sigma per step."""
    worst = -math.inf
    for a, b in zip(ests, ests[1:]):
        sig = math.sqrt(a.stderr**2 + b.stderr**2)
        worst = max(worst, (b.p_hat - a.p_hat) - 3 * sig)
    return Predicate(f"{label}:monotone_in_T", worst, 0.0, worst <= 0.0,
                     detail="max over steps of p(T_next) - p(T) - 3 sigma")


def _pos_predicate(label, fit):
    lo = fit.theta_hat - 3 * fit.stderr
    return Predicate(f"{label}:theta_positive", lo, 0.0, lo > 0.0, detail="theta_hat - 3 stderr")


def rho_for_lags(H, lags, tmax=50.0, gridsize=5000):
    """rho* over the verification grid and the experiment lags, shrunk by 1e-9 relative."""
    base = verify_cosh_bound(H, tmax, gridsize).rho_star
    lags = np.asarray(lags, dtype=np.float64)
    lags = lags[lags > 0]
    extra = rho_star_on(H, lags)[0] if lags.size else math.inf
    return min(base, extra) * (1.0 - 1e-9)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

DEFAULTS = {
    "sinai": dict(H=0.5, ladder=[2.0**k for k in range(4, 13)], spacing=0.5, level=1.0,
                  n_trials=100_000, target=0.25, tol=0.05),
    "ifbm_theta0_scan": dict(H=[0.3, 0.5, 0.7], ladder=[2.0**k for k in range(4, 11)], spacing=0.5,
                             level=1.0, n_trials=40_000),
    "ifbm_theta_minus1_scan": dict(H=[0.5, 0.7], ladder=[2.0**k for k in range(4, 11)], spacing=0.5,
                                   level=1.0, n_trials=40_000, tol=0.05),
    "fbs_square": dict(H=[0.3, 0.5, 0.7], ladder=[2.0**k for k in range(3, 8)], log_spacing=1.0,
                       floor_scale=2.0, level=1.0, n_trials=500_000, max_variation=0.3),
    "fbs_cone": dict(H=0.5, a=0.5, ladder=[2.0**k for k in range(3, 9)], log_spacing=0.25,
                     floor_scale=2.0, level=1.0, n_trials=100_000),
    "fbs_triangle_dual": dict(H=0.5, ladder=[2.0, 3.0, 4.0, 5.0], spacing=1.0, level=0.0,
                              n_trials=200_000),
    "sech_eta": dict(ladder=[2.0, 4.0, 8.0, 16.0, 32.0], spacing=0.05, level=0.0, n_trials=40_000,
                     bound=0.2),
    "slepian_pair": dict(H=0.5, ladder=[2.0, 4.0, 8.0, 16.0], spacing=0.05, n_trials=40_000),
}
PRESETS = tuple(DEFAULTS)


def preset_params(name, params=None) -> dict:
    if name not in DEFAULTS:
        raise ValueError(f"unknown preset {name!r}; choose from {list(PRESETS)}")
    p = dict(DEFAULTS[name])
    for k, v in (params or {}).items():
        if k not in p:
            raise ValueError(f"preset {name} has no parameter {k!r}")
        p[k] = v
    ladder = [float(t) for t in p["ladder"]]
    if len(ladder) < 4 or any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder must be strictly increasing with at least 4 points")
    p["ladder"] = ladder
    return p


def _hs(p):
    H = p["H"]
    return [float(h) for h in H] if isinstance(H, (list, tuple)) else [float(H)]


def _ifbm_series(H, p, seed, workers, lo, label):
    k = KernelSpec(Family.IFBM, H)
    doms = [DomainSpec(Shape.INTERVAL, T, lo=lo, hi=1.0, spacing=p["spacing"]) for T in p["ladder"]]
    ests = _ladder(k, doms, p["level"], p["n_trials"], seed, label, workers)
    return _series(label, PsiModel.LOG_T, p["ladder"], ests)


def _sinai(p, seed, workers, rep):
    (H,) = _hs(p)
    s = _ifbm_series(H, p, seed, workers, 0.0, f"ifbm_H{H}_D0")
    rep.series.append(s)
    gap = abs(s.fit.theta_hat - p["target"])
    rep.predicates += [Predicate("theta_vs_1/4", gap, p["tol"], gap <= p["tol"],
                                 detail=f"|theta_hat - {p['target']}|"),
                       _monotone_predicate(s.label, s.estimates)]


def _theta0(p, seed, workers, rep):
    for H in _hs(p):
        s = _ifbm_series(H, p, seed, workers, 0.0, f"ifbm_H{H}_D0")
        rep.series.append(s)
        rep.predicates.append(_pos_predicate(s.label, s.fit))
        rep.predicates.append(_monotone_predicate(s.label, s.estimates))
        conj = H * (1 - H)
        rep.predicates.append(Predicate(f"{s.label}:conjecture_gap", abs(s.fit.theta_hat - conj), math.nan,
                                        True, gated=False, detail=f"|theta_hat - H(1-H)|, H(1-H)={conj}"))
        rep.predicates.append(Predicate(f"{s.label}:upper_bound", s.fit.theta_hat, 1 - H,
                                        s.fit.theta_hat <= 1 - H + 3 * s.fit.stderr, gated=False,
                                        detail="theta_0 <= theta_-1 <= 1-H"))


def _theta_m1(p, seed, workers, rep):
    for H in _hs(p):
        s = _ifbm_series(H, p, seed, workers, -1.0, f"ifbm_H{H}_D-1")
        rep.series.append(s)
        bound = 1 - H + p["tol"]
        rep.predicates.append(Predicate(f"{s.label}:upper_bound", s.fit.theta_hat, bound,
                                        s.fit.theta_hat <= bound, detail="theta_hat <= 1-H+tol"))
        rep.predicates.append(_monotone_predicate(s.label, s.estimates))


def log_floor(H, floor_scale=2.0):
    """Variance floor s1*s2 >= e^{-floor_scale/H}: below it Var x <= e^{-2 floor_scale}."""
    return math.exp(-floor_scale / H)


def ratio_variation(ests, T, top_half=True):
    """(max - min) / mean of -ln p_T / (ln T)^2 over the top half of the ladder."""
    r = np.array([-math.log(e.p_hat) / math.log(t) ** 2 if e.n_survive > 0 else math.inf
                  for e, t in zip(ests, T)])
    top = r[len(r) // 2:] if top_half else r
    if not np.all(np.isfinite(top)):
        return math.inf, r
    return float((top.max() - top.min()) / top.mean()), r


def _fbs_square(p, seed, workers, rep):
    for H in _hs(p):
        k = KernelSpec(Family.FBS, H)
        doms = [DomainSpec(Shape.SQUARE, T, spacing=p["log_spacing"], log_grid=True,
                           log_floor=log_floor(H, p["floor_scale"])) for T in p["ladder"]]
        label = f"fbs_H{H}_square"
        ests = _ladder(k, doms, p["level"], p["n_trials"], seed, label, workers)
        s = _series(label, PsiModel.LOG_T_SQ, p["ladder"], ests)
        rep.series.append(s)
        var, r = ratio_variation(ests, p["ladder"])
        rep.extra[f"{label}:ratios"] = r.tolist()
        rep.predicates.append(Predicate(f"{label}:ratio_variation", var, p["max_variation"],
                                        var <= p["max_variation"],
                                        detail="(max-min)/mean of -ln p/(ln T)^2, top half of ladder"))


def _fbs_cone(p, seed, workers, rep):
    (H,) = _hs(p)
    k = KernelSpec(Family.FBS, H)
    doms = [DomainSpec(Shape.CONE, T, a=p["a"], spacing=p["log_spacing"], log_grid=True,
                       log_floor=log_floor(H, p["floor_scale"])) for T in p["ladder"]]
    label = f"fbs_H{H}_cone_a{p['a']}"
    ests = _ladder(k, doms, p["level"], p["n_trials"], seed, label, workers)
    s = _series(label, PsiModel.LOG_T, p["ladder"], ests)
    rep.series.append(s)
    rep.predicates += [_pos_predicate(label, s.fit), _monotone_predicate(label, ests)]


def _triangle(p, seed, workers, rep):
    (H,) = _hs(p)
    k = KernelSpec(Family.DUAL_FBS, H)
    doms = [DomainSpec(Shape.TRIANGLE, T, spacing=p["spacing"]) for T in p["ladder"]]
    label = f"dual_fbs_H{H}_triangle"
    ests = _ladder(k, doms, p["level"], p["n_trials"], seed, label, workers)
    # psi = T~^2, expressed as (ln T)^2 with T = e^{T~}
    s = _series(label, PsiModel.LOG_T_SQ, p["ladder"], ests, fit_T=np.exp(p["ladder"]))
    rep.series.append(s)
    rep.predicates += [_pos_predicate(label, s.fit), _monotone_predicate(label, ests)]


def _sech(p, seed, workers, rep):
    k = KernelSpec(Family.SECH, None)
    doms = [DomainSpec(Shape.INTERVAL, T, spacing=p["spacing"]) for T in p["ladder"]]
    ests = _ladder(k, doms, p["level"], p["n_trials"], seed, "sech_eta", workers)
    s = _series("sech_eta", PsiModel.LINEAR_T, p["ladder"], ests)
    rep.series.append(s)
    lhs = 2 * s.fit.theta_hat
    thr = p["bound"] - 3 * 2 * s.fit.stderr
    rep.predicates += [Predicate("2theta_eta_lower", lhs, thr, lhs >= thr,
                                 detail=f"2 theta_hat >= {p['bound']} - 3 stderr(2 theta_hat)"),
                       _monotone_predicate("sech_eta", ests)]


def slepian_pair_experiment(H, T_ladder, n_trials, seed, spacing=0.05, workers=1) -> PresetReport:
    """Dual IFBM on (0, T) against the sech process on (0, 2a(H)T) on matched lattices.

    Both lattices carry the same number of points, the sech one stretched by
    2a(H) with a(H) = rho* H(1-H), so the lag-by-lag covariance comparison
    holds exactly on the grid.
    """
    T_ladder = [float(t) for t in T_ladder]
    n_pts = [max(1, round(T / spacing)) for T in T_ladder]
    lags = spacing * np.arange(1, max(n_pts) + 1)
    rho = rho_for_lags(H, lags)
    a = rho * H * (1 - H)
    xi = KernelSpec(Family.DUAL_IFBM, H)
    eta = KernelSpec(Family.SECH, None)
    rep = PresetReport("slepian_pair", {"H": H, "ladder": T_ladder, "spacing": spacing, "n_trials": n_trials},
                       seed, extra={"rho_star": rho, "a_H": a})
    ex, ee = [], []
    for i, (T, n) in enumerate(zip(T_ladder, n_pts)):
        ex.append(estimate_persistence(xi, DomainSpec(Shape.INTERVAL, T, n_grid=n), 0.0, n_trials, seed,
                                       tags=(tag_of("slepian"), i), workers=workers))
        ee.append(estimate_persistence(eta, DomainSpec(Shape.INTERVAL, 2 * a * T, n_grid=n), 0.0, n_trials,
                                       seed, tags=(tag_of("slepian"), i), workers=workers))
    for T, px, pe in zip(T_ladder, ex, ee):
        sig = math.sqrt(px.stderr**2 + pe.stderr**2)
        rep.predicates.append(Predicate(f"slepian_order_T{T}", px.p_hat - pe.p_hat, 3 * sig,
                                        px.p_hat <= pe.p_hat + 3 * sig, detail="p_xi(T) - p_eta(2aT) <= 3 sigma"))
    sx = _series(f"dual_ifbm_H{H}", PsiModel.LINEAR_T, T_ladder, ex)
    se = _series("sech_eta_scaled", PsiModel.LINEAR_T, [2 * a * T for T in T_ladder], ee)
    rep.series += [sx, se]
    lhs, rhs = sx.fit.theta_hat, 2 * a * se.fit.theta_hat
    comb = math.sqrt(sx.fit.stderr**2 + (2 * a * se.fit.stderr) ** 2)
    rep.predicates.append(Predicate("theta_xi_vs_2a_theta_eta", lhs - rhs, -3 * comb, lhs >= rhs - 3 * comb,
                                    detail="theta_xi >= 2a theta_eta - 3 combined stderr"))
    rep.extra.update(theta_xi=lhs, theta_xi_stderr=sx.fit.stderr, two_a_theta_eta=rhs,
                     two_theta_eta=2 * se.fit.theta_hat, two_theta_eta_stderr=2 * se.fit.stderr)
    if H == 0.5:
        rep.predicates.append(Predicate("theta_xi_vs_1/4", abs(lhs - 0.25), math.nan, True, gated=False,
                                        detail="H=1/2 dual of integrated Brownian motion"))
    return rep


_RUNNERS = {
    "sinai": _sinai,
    "ifbm_theta0_scan": _theta0,
    "ifbm_theta_minus1_scan": _theta_m1,
    "fbs_square": _fbs_square,
    "fbs_cone": _fbs_cone,
    "fbs_triangle_dual": _triangle,
    "sech_eta": _sech,
}


def run_preset(name, params=None, seed=0, workers=1, out_dir=None) -> PresetReport:
    """Run a named ladder, fit its exponent(s) and evaluate the predicates."""
    p = preset_params(name, params)
    t0 = time.perf_counter()
    if name == "slepian_pair":
        (H,) = _hs(p)
        rep = slepian_pair_experiment(H, p["ladder"], p["n_trials"], seed, p["spacing"], workers)
        rep.params = p
    else:
        rep = PresetReport(name, p, seed)
        _RUNNERS[name](p, seed, workers, rep)
    rep.elapsed_s = time.perf_counter() - t0
    if out_dir is not None:
        rep.write(out_dir)
    return rep
