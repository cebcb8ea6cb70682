"""Monte Carlo persistence estimates on a domain lattice."""
from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .. import core, samplers
from ..kernels import Family, KernelSpec
from ..rng import map_blocks
from .domains import DomainSpec, Layout, region_mask

log = logging.getLogger(__name__)

Z95 = 1.959963984540054
MIN_TRIALS = 1000
SS_FAMILIES = {Family.FBM, Family.IFBM, Family.FBS}


class Event(str, enum.Enum):
    SUP_BELOW = "SUP_BELOW"
    NEG_OUTSIDE_U0 = "NEG_OUTSIDE_U0"
    ARGMAX_IN_U0 = "ARGMAX_IN_U0"


def wilson(k, n, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class PersistenceEstimate:
    n_trials: int
    n_survive: int
    level: float
    event: Event
    domain: DomainSpec
    kernel: KernelSpec
    seed: int
    meta: dict = field(default_factory=dict)
    survivors: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 <= self.n_survive <= self.n_trials:
            raise ValueError("n_survive must lie in [0, n_trials]")

    @property
    def p_hat(self) -> float:
        return self.n_survive / self.n_trials

    @property
    def ci95(self) -> tuple:
        return wilson(self.n_survive, self.n_trials)

    @property
    def stderr(self) -> float:
        p = self.p_hat
        return math.sqrt(p * (1 - p) / self.n_trials)

    @property
    def low_information(self) -> bool:
        return self.n_survive == 0 or self.n_survive == self.n_trials

    def to_dict(self) -> dict:
        lo, hi = self.ci95
        return {
            "n_trials": self.n_trials,
            "n_survive": self.n_survive,
            "p_hat": self.p_hat,
            "ci95": [lo, hi],
            "level": self.level,
            "event": self.event.value,
            "low_information": self.low_information,
            "domain": self.domain.to_dict(),
            "kernel": self.kernel.to_dict(),
            "seed": self.seed,
            **({"meta": self.meta} if self.meta else {}),
        }


# ---------------------------------------------------------------------------
# sampler selection
# ---------------------------------------------------------------------------

class _Columns:
    def __init__(self, block, cols):
        self.block, self.cols = block, cols

    def __call__(self, gen, rows):
        return self.block(gen, rows)[:, self.cols]


class _IfbmBlock:
    """Integrated fBm at lattice points from a trapezoid rule on ``substeps`` sub-cells."""

    def __init__(self, H, ks, step, substeps):
        self.m = substeps
        self.n = int(np.max(np.abs(ks)))
        self.two = bool(ks.min() < 0)
        self.dt = step / substeps
        self.fbm = samplers.FbmBlock(H, self.n * substeps, self.dt, two_sided=self.two)
        self.ks = ks

    def __call__(self, gen, rows):
        b = self.fbm(gen, rows)
        nm = self.n * self.m
        if not self.two:
            return core.cumtrapz(b, self.dt)[:, self.ks * self.m]
        right = core.cumtrapz(b[:, nm:], self.dt)
        left = -core.cumtrapz(b[:, nm::-1], self.dt)
        out = np.empty((rows, self.ks.size))
        pos = self.ks > 0
        out[:, pos] = right[:, self.ks[pos] * self.m]
        out[:, ~pos] = left[:, -self.ks[~pos] * self.m]
        return out


def make_block(kernel: KernelSpec, lay: Layout, method="auto", substeps=1):
    """Block function ``(generator, rows) -> values`` on the layout points."""
    f = kernel.family
    if method not in ("auto", "exact", "cholesky"):
        raise ValueError(f"unknown method {method!r}")
    if method == "exact":
        # every fast path is exact except the IFBM trapezoid quadrature
        method = "cholesky" if f is Family.IFBM else "auto"
    if method == "auto" and lay.ks is not None:
        ks = lay.ks
        if f is Family.FBM:
            n = int(np.max(np.abs(ks)))
            two = bool(ks.min() < 0)
            block = samplers.FbmBlock(kernel.H, n, lay.step, two_sided=two)
            return _Columns(block, ks + n if two else ks), "circulant-fbm"
        if f is Family.IFBM:
            return _IfbmBlock(kernel.H, ks, lay.step, substeps), "quadrature-ifbm"
        if kernel.stationary and kernel.dim == 1:
            k0 = int(ks.min())
            block = samplers.stationary_block(kernel, int(ks.max()) - k0 + 1, lay.step)
            return _Columns(block, ks - k0), "stationary-" + type(block).__name__
    if method == "auto" and lay.axes is not None and f in (Family.FBS, Family.DUAL_FBS):
        return samplers.kron_block(kernel, lay.axes[0], lay.axes[1], lay.index), "kronecker"
    if lay.size > samplers.DENSE_BUDGET:
        raise samplers.BudgetError(
            f"{lay.size} grid points exceed the dense budget {samplers.DENSE_BUDGET}"
        )
    L, _ = samplers.cholesky_jitter(kernel.gram(lay.points))
    return samplers.CholBlock(L), "cholesky"


def run_trials(kernel, domain, n_trials, seed, reducer, tags=(), workers=1, method="auto", substeps=1):
    """Stream trials through ``reducer(values) -> per-row array`` and stack the results."""
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    if kernel.dim != domain.dim:
        raise ValueError(f"{kernel.family.value} is {kernel.dim}-D but the domain is {domain.dim}-D")
    lay = domain.layout()
    block, how = make_block(kernel, lay, method, substeps)

    def fn(gen, rows):
        return reducer(block(gen, rows))

    t0 = time.perf_counter()
    out = np.concatenate(map_blocks(fn, seed, n_trials, tags=tags, workers=workers))
    meta = {"sampler": how, "n_points": lay.size, "step": lay.step,
            "elapsed_s": round(time.perf_counter() - t0, 3)}
    return out, lay, meta


def sample_domain(kernel: KernelSpec, domain: DomainSpec, n_trials, seed=0, tags=(), workers=1,
                  method="auto", substeps=1) -> samplers.PathEnsemble:
    """Sample paths on the domain lattice and keep them as a :class:`PathEnsemble`."""
    values, lay, meta = run_trials(kernel, domain, n_trials, seed, lambda v: v, tags, workers, method, substeps)
    if domain.dim == 1:
        grid = samplers.Grid1D(lay.points)
    else:
        grid = samplers.Grid2D(lay.step, lay.points, axes=lay.axes, index=lay.index)
    meta = dict(meta, domain=domain.to_dict(), tags=list(tags))
    return samplers.PathEnsemble(kernel, grid, values, int(seed), meta=meta)


def estimate_persistence(kernel: KernelSpec, domain: DomainSpec, level=1.0, n_trials=10_000, seed=0,
                         tags=(), workers=1, method="auto", substeps=1) -> PersistenceEstimate:
    """Fraction of trials with every grid value strictly below ``level``."""
    if n_trials < MIN_TRIALS:
        raise ValueError(f"n_trials must be at least {MIN_TRIALS}")
    flags, _, meta = run_trials(kernel, domain, n_trials, seed, lambda v: core.all_below(v, level),
                                tags, workers, method, substeps)
    est = PersistenceEstimate(n_trials, int(flags.sum()), float(level), Event.SUP_BELOW, domain,
                              kernel, seed, meta, survivors=flags)
    if est.n_survive == 0:
        log.warning("no survivors for %s on %s; estimate is low-information",
                    kernel.family.value, domain.to_dict())
    return est


@dataclass
class EventEstimates:
    M: PersistenceEstimate
    G: PersistenceEstimate
    Z: PersistenceEstimate

    @property
    def inclusion_holds(self) -> bool:
        """Every Z survivor is a G survivor (exact set inclusion of trial indices)."""
        return bool(np.all(self.G.survivors[self.Z.survivors]))

    def to_dict(self) -> dict:
        return {"M": self.M.to_dict(), "G": self.G.to_dict(), "Z": self.Z.to_dict(),
                "inclusion_holds": self.inclusion_holds}


def estimate_events(kernel: KernelSpec, domain: DomainSpec, U0="unit", n_trials=10_000, seed=0,
                    level=1.0, tags=(), workers=1, method="auto", substeps=1) -> EventEstimates:
    """The three reduced events on one shared ensemble.

    M: all grid values below ``level``.  G: the maximum over the grid (with
    the deterministic zero on the degenerate set counted inside U0) is
    attained inside U0.  Z: every grid value outside U0 is negative.
    """
    if kernel.family not in SS_FAMILIES:
        raise ValueError("estimate_events needs a self-similar family (FBM, IFBM, FBS)")
    if n_trials < MIN_TRIALS:
        raise ValueError(f"n_trials must be at least {MIN_TRIALS}")
    lay = domain.layout()
    inside = region_mask(U0, lay.points) if isinstance(U0, str) else np.asarray(U0(lay.points), dtype=bool)
    if not inside.any():
        raise ValueError("U0 contains no grid points")
    flags, _, meta = run_trials(kernel, domain, n_trials, seed,
                                lambda v: core.event_flags(v, inside, level), tags, workers, method, substeps)
    meta = dict(meta, U0=U0 if isinstance(U0, str) else "custom", n_inside=int(inside.sum()))
    flags = flags.astype(bool)
    mk = lambda j, ev, lv: PersistenceEstimate(  # noqa: E731
        n_trials, int(flags[:, j].sum()), lv, ev, domain, kernel, seed, meta, survivors=flags[:, j])
    return EventEstimates(mk(0, Event.SUP_BELOW, float(level)),
                          mk(1, Event.ARGMAX_IN_U0, float(level)),
                          mk(2, Event.NEG_OUTSIDE_U0, 0.0))


@dataclass
class Refinement:
    coarse: PersistenceEstimate
    fine: PersistenceEstimate
    bias_bound: float
    order: float

    def to_dict(self) -> dict:
        return {"coarse": self.coarse.to_dict(), "fine": self.fine.to_dict(),
                "bias_bound": self.bias_bound, "order": self.order}


def refinement_pair(kernel, domain: DomainSpec, level=1.0, n_trials=10_000, seed=0, order=0.5,
                    tags=(), workers=1) -> Refinement:
    """Coupled estimates on a 1-D lattice and its 2x refinement.

    The fine lattice is sampled and the coarse estimate uses its even
    points, so p_coarse >= p_fine trial by trial.  Assuming a bias of the
    form C h^order, the continuum limit lies within
    (p_coarse - p_fine) / (1 - 2^-order) of the coarse estimate.
    """
    if domain.shape.value != "INTERVAL":
        raise ValueError("refinement_pair supports INTERVAL domains")
    fine_dom = domain.replace(n_grid=2 * domain.n_grid, spacing=None if domain.spacing is None
                              else domain.spacing / 2)
    lay = fine_dom.layout()
    even = (lay.ks % 2) == 0

    def reducer(v):
        return np.stack([core.all_below(v[:, even], level), core.all_below(v, level)], axis=1)

    flags, _, meta = run_trials(kernel, fine_dom, n_trials, seed, reducer, tags, workers)
    c = PersistenceEstimate(n_trials, int(flags[:, 0].sum()), float(level), Event.SUP_BELOW, domain,
                            kernel, seed, meta, survivors=flags[:, 0])
    f = PersistenceEstimate(n_trials, int(flags[:, 1].sum()), float(level), Event.SUP_BELOW, fine_dom,
                            kernel, seed, meta, survivors=flags[:, 1])
    bound = (c.p_hat - f.p_hat) / (1.0 - 2.0**-order)
    return Refinement(c, f, bound, order)
