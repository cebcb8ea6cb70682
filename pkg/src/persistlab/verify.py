"""Verification suites shared by the command line and the acceptance tests.

Each suite returns a :class:`SuiteReport`: a list of named checks with a
pass flag and machine-readable details.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels as K
from . import orthant, samplers
from .kernels import Family, KernelSpec
from .oracles import duality_gap, ifbm_cov_quad
from .persistence import DomainSpec, Shape, estimate_events
from .persistence.presets import log_floor

H_GRID = tuple(float(h) for h in np.round(np.arange(0.05, 0.951, 0.05), 2))
TARGETS = ("kernels", "lemma2", "prop1", "duality", "samplers", "events")


@dataclass
class Check:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "details": self.details}


@dataclass
class SuiteReport:
    target: str
    checks: list = field(default_factory=list)
    elapsed_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def first_failure(self):
        return next((c for c in self.checks if not c.passed), None)

    def add(self, name, ok, **details):
        details.pop("passed", None)
        self.checks.append(Check(name, bool(ok), details))

    def to_dict(self) -> dict:
        f = self.first_failure
        return {"target": self.target, "passed": self.passed, "n_checks": len(self.checks),
                "first_failure": None if f is None else f.name,
                "elapsed_s": round(self.elapsed_s, 3), "checks": [c.to_dict() for c in self.checks]}


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        rep = fn(*a, **kw)
        rep.elapsed_s = time.perf_counter() - t0
        return rep

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------------------

def _random_points(family, rng, n=40):
    if family in (Family.FBM, Family.IFBM):
        return rng.uniform(-3, 3, n)
    if family is Family.FBS:
        return rng.uniform(0, 3, (n, 2))
    if family is Family.DUAL_FBS:
        return rng.uniform(-2, 2, (n, 2))
    return rng.uniform(0, 5, n)


@_timed
def suite_kernels(seed=0) -> SuiteReport:
    """Closed forms, positivity and growth properties of the kernel module."""
    rep = SuiteReport("kernels")
    rng = np.random.default_rng(seed)
    for fam in Family:
        for H in (0.1, 0.5, 0.9):
            k = KernelSpec(fam, None if fam is Family.SECH else H)
            G = k.gram(_random_points(fam, rng))
            ev = np.linalg.eigvalsh(G)
            rep.add(f"psd:{fam.value}:H{H}", ev[0] >= -1e-10 * ev[-1], min_eig=ev[0], max_eig=ev[-1])
            if fam is Family.SECH:
                break

    v = K.fbm_cov(0.75, 1.0, 2.0)
    inc = 0.5 * (1.0 + 2.0**1.5 - 1.0)
    rep.add("fbm_cov:H0.75", abs(v - math.sqrt(2)) < 1e-14 and abs(v - inc) < 1e-14, value=v)

    gaps = []
    for H in (0.1, 0.3, 0.5, 0.7, 0.9):
        for s, t in ((1.0, 1.0), (0.5, 2.0), (2.0, -1.5), (-0.7, -0.3), (3.0, 0.2)):
            gaps.append(abs(K.ifbm_cov(H, s, t) - ifbm_cov_quad(H, s, t)))
    rep.add("ifbm_cov:oracle", max(gaps) < 1e-10, max_gap=max(gaps))
    rep.add("ifbm_cov:unit", all(abs(K.ifbm_cov(H, 1, 1) - 1 / (2 * H + 2)) < 1e-14 for H in H_GRID))

    t = np.linspace(0, 20, 2001)
    ou = np.max(np.abs(K.dual_fbm_corr(0.5, t) - np.exp(-t / 2)))
    rep.add("dual_fbm:ou", ou < 1e-12, max_gap=ou)

    x = np.linspace(0.5 + 1e-6, 20, 4000)
    fmin = min(float(np.min(K.f_drift(H, x))) for H in H_GRID)
    rep.add("f_drift:gt1", fmin > 1 and all(abs(K.f_drift(H, 0.5) - 1.0) < 1e-15 for H in H_GRID), min=fmin)

    g = np.linspace(0.01, 5, 60)
    S = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
    pmin = min(float(np.min(K.psi_drift(H, a, S))) for H in (0.2, 0.5, 0.8) for a in (0.3, 1.0, 2.0))
    rep.add("psi_drift:nonneg", pmin >= 0, min=pmin)

    n = np.arange(-64, 65)
    for H in (0.1, 0.25, 0.5, 0.75, 0.9):
        B = K.eta_corr(H, n)
        gamma = 2 * min(H, 1 - H)
        scaled = B * 2.0 ** (np.abs(n) * gamma)
        tail = scaled[np.abs(n) >= 48]
        rep.add(f"eta_corr:H{H}", bool(np.all(B > 0)) and tail.max() / tail.min() < 1.01,
                min=float(B.min()), scaled_max=float(scaled.max()))

    for H in (0.1, 0.3, 0.5, 0.7, 0.9):
        c = K.eta_sum(H)
        Ns = 2 ** np.arange(3, 10)
        ph = np.array([K.phi_norm_sq(H, int(N)) for N in Ns])
        growth = [K.phi_norm_sq(H, 2 * N) / K.phi_norm_sq(H, N) for N in (20, 40)]
        ok = bool(np.all(ph <= c * (2 * Ns + 1) * (1 + 1e-12))) and max(growth) <= 2.2
        rep.add(f"phi_norm:H{H}", ok, c=c, max_phi_over_N=float(np.max(ph / Ns)), growth=growth)

    for H in (0.3, 0.5, 0.7):
        hs = [0.05, 0.1, 0.25, 0.5, 1.0]
        fit = K.fit_lemma1_constant(H, [2, 4, 8], hs)
        held = K.fit_lemma1_constant(H, [16, 32, 64], hs)
        rep.add(f"lemma1:H{H}", held["cH"] <= fit["cH"], cH_fit=fit["cH"], cH_heldout=held["cH"])
    return rep


@_timed
def suite_lemma2(H_grid=H_GRID) -> SuiteReport:
    """R >= 0, monotone decay of the dual correlation and the cosh bound."""
    rep = SuiteReport("lemma2")
    table = {}
    for H in H_grid:
        r = K.verify_r_nonneg(H, 1001)
        rep.add(f"r_nonneg:H{H}", r.passed, **r.details)
        m = K.verify_monotone(H, 20.0, 2000)
        rep.add(f"monotone:H{H}", m.passed, **{k: v for k, v in m.details.items() if k != "violations"},
                violations=m.details["violations"])
        c = K.verify_cosh_bound(H, 50.0, 5000)
        rep.add(f"cosh_bound:H{H}", c.passed, **c.details)
        table[H] = c.rho_star
    sym = {H: (table[H], table.get(round(1 - H, 2))) for H in table}
    rep.add("rho_star_table", all(v > 0 for v in table.values()), rho_star=table, symmetry=sym)
    return rep


@_timed
def suite_prop1(n_qmc=2**16, seed=0) -> SuiteReport:
    """Supermultiplicativity over the bundled parquets."""
    rep = SuiteReport("prop1")
    for r in orthant.run_bundled(n_qmc, seed):
        rep.add(r.name, r.passed, status=r.status, **r.details)
    return rep


@_timed
def suite_duality(tmax=10.0, n_t=1000, tol=1e-8) -> SuiteReport:
    """Closed-form dual correlation against the quadrature oracle on the H grid."""
    rep = SuiteReport("duality")
    for row in duality_gap(H_GRID, tmax, n_t):
        rep.add(f"duality:H{row['H']}", row["max_gap"] < tol, **row)
    return rep


def bundled_sampler_cases(seed=0, n_trials=100_000):
    """(name, ensemble, analytic covariance or None) for every family, grids of <= 20 points."""
    t20 = np.linspace(0.25, 5.0, 20)
    ax_x, ax_y = np.array([0.0, 0.5, 1.0, 2.0]), np.array([0.5, 1.0, 1.5, 2.5, 3.0])
    g20 = samplers.Grid1D(t20)
    cases = []
    for H in (0.3, 0.7):
        cases.append((f"FBM:H{H}:cholesky",
                      samplers.chol_sample(KernelSpec(Family.FBM, H), g20, n_trials, seed)))
        e = samplers.fgn_circulant(H, 256, 1 / 64, n_trials, seed)
        cols = np.arange(12, 257, 12)[:20]
        cases.append((f"FBM:H{H}:circulant",
                      samplers.PathEnsemble(e.kernel, samplers.Grid1D(e.grid.points[cols]), e.values[:, cols],
                                            seed, meta=e.meta)))
    cases.append(("IFBM:H0.5:exact", samplers.chol_sample(KernelSpec(Family.IFBM, 0.5), g20, n_trials, seed)))
    cases.append(("IFBM:H0.3:exact", samplers.chol_sample(KernelSpec(Family.IFBM, 0.3), g20, n_trials, seed)))
    for fam, H in ((Family.DUAL_FBM, 0.3), (Family.DUAL_IFBM, 0.5), (Family.DUAL_IFBM, 0.8), (Family.SECH, None)):
        k = KernelSpec(fam, H)
        cases.append((f"{fam.value}:H{H}:circulant", samplers.stationary_circulant(k, 20, 0.25, n_trials, seed)))
    cases.append(("FBS:H0.5:kronecker",
                  samplers.kron_sample(KernelSpec(Family.FBS, 0.5), ax_x, ax_y, n_trials, seed)))
    cases.append(("FBS:H0.3:kronecker",
                  samplers.kron_sample(KernelSpec(Family.FBS, 0.3), ax_x, ax_y, n_trials, seed)))
    cases.append(("DUAL_FBS:H0.4:kronecker",
                  samplers.kron_sample(KernelSpec(Family.DUAL_FBS, 0.4), ax_x, ax_y, n_trials, seed)))
    return cases


@_timed
def suite_samplers(n_trials=100_000, seed=0) -> SuiteReport:
    """Covariance reproduction (worst-entry z-score <= 4) for every family."""
    rep = SuiteReport("samplers")
    for name, ens in bundled_sampler_cases(seed, n_trials):
        r = samplers.empirical_cov_report(ens)
        rep.add(name, r.passed, n_points=ens.grid.size, **r.to_dict())
    return rep


def bundled_event_cases():
    """(name, kernel, domain, U0) for the shared-ensemble event experiments."""
    cases = []
    for H in (0.3, 0.5, 0.7):
        for T in (4.0, 16.0):
            cases.append((f"fbm_H{H}_T{T}", KernelSpec(Family.FBM, H),
                          DomainSpec(Shape.INTERVAL, T, n_grid=512), "unit"))
    cases.append(("ifbm_H0.5_D0", KernelSpec(Family.IFBM, 0.5), DomainSpec(Shape.INTERVAL, 32.0, spacing=0.25),
                  "unit"))
    cases.append(("ifbm_H0.5_D-1", KernelSpec(Family.IFBM, 0.5),
                  DomainSpec(Shape.INTERVAL, 16.0, lo=-1.0, spacing=0.25), "unit"))
    cases.append(("fbs_H0.5_square", KernelSpec(Family.FBS, 0.5),
                  DomainSpec(Shape.SQUARE, 16.0, spacing=0.5, log_grid=True, log_floor=log_floor(0.5)),
                  "hyperbola"))
    cases.append(("fbs_H0.5_uniform", KernelSpec(Family.FBS, 0.5), DomainSpec(Shape.SQUARE, 4.0, n_grid=24),
                  "hyperbola"))
    cases.append(("fbm_H0.5_U0_all", KernelSpec(Family.FBM, 0.5), DomainSpec(Shape.INTERVAL, 4.0, n_grid=256),
                  "all"))
    return cases


@_timed
def suite_events(n_trials=20_000, seed=0) -> SuiteReport:
    """Z survivors are G survivors on every bundled shared ensemble."""
    rep = SuiteReport("events")
    for i, (name, k, dom, U0) in enumerate(bundled_event_cases()):
        ev = estimate_events(k, dom, U0, n_trials, seed, tags=(i,))
        ok = ev.inclusion_holds
        if U0 == "all":
            ok = ok and ev.G.n_survive == n_trials and ev.Z.n_survive == n_trials
        rep.add(name, ok, inclusion=ev.inclusion_holds, p_M=ev.M.p_hat, p_G=ev.G.p_hat, p_Z=ev.Z.p_hat,
                n_Z=ev.Z.n_survive, n_G=ev.G.n_survive, n_points=ev.M.meta["n_points"])
    return rep


SUITES = {
    "kernels": suite_kernels,
    "lemma2": suite_lemma2,
    "prop1": suite_prop1,
    "duality": suite_duality,
    "samplers": suite_samplers,
    "events": suite_events,
}


def run_suite(target, **kw) -> SuiteReport:
    if target not in SUITES:
        raise ValueError(f"unknown verify target {target!r}; choose from {list(SUITES)}")
    return SUITES[target](**kw)
