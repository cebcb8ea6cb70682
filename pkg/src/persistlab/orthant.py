"""Gaussian orthant probabilities P(X < b) for small dimensions.

n = 1 and n = 2 are handled in closed form (the bivariate case by a smooth
one-dimensional integral); n >= 3 uses the Genz separation-of-variables
transform with variable reordering and scrambled Sobol points.  The QMC
error bar is three standard errors of the mean over 16 independent
scramblings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import ndtr
from scipy.stats import qmc

from . import core
from .kernels import Family, KernelSpec
from .rng import stream, tag_of

MAX_DIM = 25
N_RANDOMIZATIONS = 16
SYM_TOL = 1e-12
PSD_TOL = 1e-10


class OrthantError(ValueError):
    pass


@dataclass
class OrthantQuery:
    cov: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        self.thresholds = np.atleast_1d(np.asarray(self.thresholds, dtype=np.float64))
        n = self.thresholds.size
        if self.cov.shape != (n, n):
            raise OrthantError(f"cov shape {self.cov.shape} does not match {n} thresholds")
        if n > MAX_DIM:
            raise OrthantError(f"dimension {n} exceeds the cap of {MAX_DIM}")
        if np.any(np.isnan(self.thresholds)):
            raise OrthantError("thresholds contain NaN")
        scale = max(1.0, float(np.max(np.abs(self.cov))))
        if np.max(np.abs(self.cov - self.cov.T)) > SYM_TOL * scale:
            raise OrthantError("covariance is not symmetric")
        if np.any(np.diag(self.cov) <= 0):
            raise OrthantError("covariance diagonal must be positive")
        ev = np.linalg.eigvalsh(self.cov)
        if ev[0] < -PSD_TOL * max(ev[-1], 1e-300):
            raise OrthantError(f"covariance is not PSD (smallest eigenvalue {ev[0]:.3e})")

    @property
    def dim(self) -> int:
        return self.thresholds.size


def _standardize(cov, b):
    sd = np.sqrt(np.diag(cov))
    R = cov / np.outer(sd, sd)
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 1.0)
    return R, b / sd


def bivariate_cdf(h, k, r):
    """P(X < h, Y < k) for standard normals with correlation r."""
    if r >= 1.0:
        return float(ndtr(min(h, k)))
    if r <= -1.0:
        return float(max(0.0, ndtr(h) + ndtr(k) - 1.0))
    if h == 0.0 and k == 0.0:
        return 0.25 + math.asin(r) / (2.0 * math.pi)
    if not (np.isfinite(h) and np.isfinite(k)):
        if h == -np.inf or k == -np.inf:
            return 0.0
        return float(ndtr(k if h == np.inf else h))

    # d/dr Phi_2 = phi_2(h, k; r); with r = sin(a) the integrand is smooth
    def dens(a):
        c = math.cos(a)
        return math.exp(-(h * h - 2.0 * h * k * math.sin(a) + k * k) / (2.0 * c * c))

    val, _ = integrate.quad(dens, 0.0, math.asin(r), epsabs=1e-15, epsrel=1e-13, limit=200)
    return float(min(1.0, max(0.0, ndtr(h) * ndtr(k) + val / (2.0 * math.pi))))


def _reordered_cholesky(R, b):
    """Genz-Bretz ordering: most constraining variable first, with conditional updates.

    Returns (L, b, perm) with L lower triangular (zero pivots allowed).
    """
    n = b.size
    R = R.copy()
    b = b.copy()
    perm = np.arange(n)
    L = np.zeros((n, n))
    y = np.zeros(n)
    for i in range(n):
        rest = np.arange(i, n)
        var = R[rest, rest] - np.sum(L[rest, :i] ** 2, axis=1)
        sd = np.sqrt(np.clip(var, 0.0, None))
        num = b[rest] - L[rest, :i] @ y[:i]
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(sd > 1e-12, ndtr(num / sd), np.where(num >= 0, 2.0, -1.0))
        m = i + int(np.argmin(score))
        if m != i:
            for arr in (b, perm, y):
                arr[[i, m]] = arr[[m, i]]
            R[[i, m]] = R[[m, i]]
            R[:, [i, m]] = R[:, [m, i]]
            L[[i, m]] = L[[m, i]]
        v = R[i, i] - L[i, :i] @ L[i, :i]
        d = math.sqrt(v) if v > 1e-12 else 0.0
        L[i, i] = d
        if d > 0.0:
            L[i + 1 :, i] = (R[i + 1 :, i] - L[i + 1 :, :i] @ L[i, :i]) / d
            a = (b[i] - L[i, :i] @ y[:i]) / d
            p = ndtr(a)
            # mean of a standard normal truncated to (-inf, a)
            y[i] = -math.exp(-0.5 * a * a) / math.sqrt(2 * math.pi) / p if p > 1e-300 else a
    return L, b, perm


def _sobol(d, gen):
    try:
        return qmc.Sobol(d, scramble=True, rng=gen)
    except TypeError:  # scipy < 1.15
        return qmc.Sobol(d, scramble=True, seed=gen)


def _genz(R, b, n_qmc, seed):
    L, bb, _ = _reordered_cholesky(R, b)
    n = bb.size
    per = max(64, 1 << int(math.floor(math.log2(max(n_qmc // N_RANDOMIZATIONS, 1)))))
    est = np.empty(N_RANDOMIZATIONS)
    for r in range(N_RANDOMIZATIONS):
        w = _sobol(n - 1, stream(seed, tag_of("orthant"), r)).random(per)
        est[r] = np.mean(core.genz_sov(L, bb, w))
    mean = float(np.clip(est.mean(), 0.0, 1.0))
    return mean, float(3.0 * est.std(ddof=1) / math.sqrt(N_RANDOMIZATIONS))


def orthant_prob(q: OrthantQuery, n_qmc: int = 2**16, seed: int = 0):
    """Return ``(estimate, err)`` for P(X_i < b_i for all i), X ~ N(0, cov)."""
    R, b = _standardize(q.cov, q.thresholds)
    if np.any(b == -np.inf):
        return 0.0, 0.0
    keep = np.isfinite(b)
    R, b = R[np.ix_(keep, keep)], b[keep]
    n = b.size
    if n == 0:
        return 1.0, 0.0
    if n == 1:
        return float(ndtr(b[0])), 0.0
    if n == 2:
        return bivariate_cdf(float(b[0]), float(b[1]), float(R[0, 1])), 0.0
    return _genz(R, b, n_qmc, seed)


# ---------------------------------------------------------------------------
# comparison checks
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    name: str
    status: str  # "pass", "fail" or "inapplicable"
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "passed": self.passed, "details": self.details}


def slepian_check(covA, covB, thresholds, n_qmc=2**16, seed=0) -> ComparisonReport:
    """Check P_A(X < b) <= P_B(X < b) when A <= B off the diagonal with equal variances."""
    covA = np.asarray(covA, dtype=np.float64)
    covB = np.asarray(covB, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(covB))))
    off = ~np.eye(covA.shape[0], dtype=bool)
    diag_gap = float(np.max(np.abs(np.diag(covA) - np.diag(covB))))
    order_gap = float(np.max(covA[off] - covB[off])) if off.any() else 0.0
    details = {"diag_gap": diag_gap, "max_offdiag_excess": order_gap}
    if diag_gap > SYM_TOL * scale or order_gap > SYM_TOL * scale:
        return ComparisonReport("slepian", "inapplicable", details)
    pA, eA = orthant_prob(OrthantQuery(covA, thresholds), n_qmc, seed)
    pB, eB = orthant_prob(OrthantQuery(covB, thresholds), n_qmc, seed + 1)
    details.update(pA=pA, errA=eA, pB=pB, errB=eB)
    ok = pA <= pB + 3.0 * (eA + eB) + 1e-12
    return ComparisonReport("slepian", "pass" if ok else "fail", details)


def _points_of(obj):
    if hasattr(obj, "points") and callable(obj.points):
        return np.asarray(obj.points(), dtype=np.float64)
    return np.asarray(obj, dtype=np.float64)


def supermult_check(kernel: KernelSpec, domain, partition, threshold, n_qmc=2**16, seed=0,
                    name="supermult") -> ComparisonReport:
    """Check P(whole) >= prod P(cell) for a partition of a small point set.

    ``domain`` and each cell are point arrays (or objects with a ``points()``
    method).  The cells must be disjoint and cover the domain exactly; all
    covariance entries must be nonnegative, otherwise the report is marked
    inapplicable.
    """
    pts = _points_of(domain)
    if pts.ndim == 1:
        pts = pts[:, None]
    cells = [_points_of(c).reshape(-1, pts.shape[1]) for c in partition]
    if pts.shape[0] > MAX_DIM:
        raise OrthantError(f"domain has {pts.shape[0]} points; cap is {MAX_DIM}")
    key = lambda p: tuple(np.round(p, 12))  # noqa: E731
    whole = {key(p) for p in pts}
    seen: set = set()
    for c in cells:
        ks = {key(p) for p in c}
        if len(ks) != len(c) or ks & seen:
            raise OrthantError("partition cells overlap")
        seen |= ks
    if seen != whole:
        raise OrthantError("partition cells do not cover the domain exactly")

    gram = lambda p: kernel.gram(p[:, 0] if kernel.dim == 1 else p)  # noqa: E731
    K = gram(pts)
    min_cov = float(K.min())
    details = {"n_points": int(pts.shape[0]), "n_cells": len(cells), "min_cov": min_cov,
               "threshold": float(threshold)}
    if min_cov < 0:
        return ComparisonReport(name, "inapplicable", details)
    p_whole, e_whole = orthant_prob(OrthantQuery(K, np.full(pts.shape[0], threshold)), n_qmc, seed)
    probs, errs = [], []
    for j, c in enumerate(cells):
        p, e = orthant_prob(OrthantQuery(gram(c), np.full(len(c), threshold)), n_qmc, seed + 1 + j)
        probs.append(p)
        errs.append(e)
    prod = float(np.prod(probs))
    rel = math.sqrt(sum((e / p) ** 2 for p, e in zip(probs, errs) if p > 0))
    e_prod = prod * rel
    margin = 3.0 * (e_whole + e_prod)
    details.update(p_whole=p_whole, err_whole=e_whole, cell_probs=probs, cell_errs=errs,
                   product=prod, err_product=e_prod, margin=margin,
                   neg_log_whole=-math.log(p_whole) if p_whole > 0 else math.inf,
                   neg_log_cells=-sum(math.log(p) for p in probs) if min(probs) > 0 else math.inf)
    ok = p_whole >= prod - margin - 1e-12
    return ComparisonReport(name, "pass" if ok else "fail", details)


# ---------------------------------------------------------------------------
# bundled parquet instances
# ---------------------------------------------------------------------------

@dataclass
class Parquet:
    name: str
    kernel: KernelSpec
    cells: list
    threshold: float

    @property
    def domain(self) -> np.ndarray:
        return np.vstack(self.cells)


def _interval_cells(lo, step, n_cells, per_cell):
    t = lo + step * np.arange(n_cells * per_cell)
    return [t[j * per_cell : (j + 1) * per_cell, None] for j in range(n_cells)]


def triangle_cells():
    """Triangle t1, t2 > 0, t1 + t2 < 2 split into four unit triangles, three points each.

    Three corner cells are translates of the base cell; the centre cell is
    its reflection through (0.5, 0.5) shifted by the unit diagonal.
    """
    base = np.array([[0.2, 0.2], [0.6, 0.2], [0.2, 0.6]])
    return [base, base + [1.0, 0.0], base + [0.0, 1.0], np.array([1.0, 1.0]) - base]


def bundled_parquets() -> list[Parquet]:
    out = []
    for H in (0.5, 0.3):
        out.append(Parquet(f"dual_fbm_interval_H{H}", KernelSpec(Family.DUAL_FBM, H),
                           _interval_cells(0.0, 0.25, 3, 4), 0.0))
    out.append(Parquet("dual_ifbm_interval_H0.5", KernelSpec(Family.DUAL_IFBM, 0.5),
                       _interval_cells(0.0, 0.3, 4, 3), 0.0))
    out.append(Parquet("sech_interval", KernelSpec(Family.SECH, None),
                       _interval_cells(0.0, 0.4, 4, 4), 0.0))
    for H in (0.5, 0.3):
        out.append(Parquet(f"dual_fbs_triangle_H{H}", KernelSpec(Family.DUAL_FBS, H),
                           triangle_cells(), 0.0))
    out.append(Parquet("fbm_interval_1_4_H0.7", KernelSpec(Family.FBM, 0.7),
                       _interval_cells(1.0, 3.0 / 11.0, 3, 4), 1.0))
    ax = np.array([1.0, 1.5, 2.5, 3.0])
    sq = [np.array([[x, y] for x in xs for y in ys])
          for xs in (ax[:2], ax[2:]) for ys in (ax[:2], ax[2:])]
    out.append(Parquet("fbs_square_1_3_H0.5", KernelSpec(Family.FBS, 0.5), sq, 1.0))
    return out


def run_bundled(n_qmc=2**16, seed=0) -> list[ComparisonReport]:
    return [supermult_check(p.kernel, p.domain, p.cells, p.threshold, n_qmc, seed + 100 * i, name=p.name)
            for i, p in enumerate(bundled_parquets())]
