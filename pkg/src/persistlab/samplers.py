"""Exact joint Gaussian sampling on discretised domains.

Three exact routes:

* dense Cholesky of the Gram matrix (any kernel, up to ``DENSE_BUDGET`` points)
* circulant embedding for stationary sequences on uniform grids: fractional
  Gaussian noise (cumulated to fBm) and the stationary dual / sech processes
* Kronecker factorisation for the sheet families on rectangular lattices

Every sampler is a *block function* ``(generator, rows) -> values`` driven
by :func:`persistlab.rng.map_blocks`, so the persistence estimators can
stream trials without materialising the whole ensemble.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import core
from .kernels import Family, KernelSpec, fbm_cov
from .rng import GENERATOR_ID, map_blocks

log = logging.getLogger(__name__)

DENSE_BUDGET = 8192
FGN_BUDGET = 2**22
KRON_BUDGET = 2**20
JITTER_START = 1e-12
JITTER_ESCALATIONS = 4
EIG_TOL = 1e-10
# complex entries per FFT chunk; bounds memory independent of the block size
FFT_CHUNK = 2**22


class SamplerError(RuntimeError):
    pass


class FactorizationError(SamplerError):
    pass


class BudgetError(SamplerError):
    pass


# ---------------------------------------------------------------------------
# grids and ensembles
# ---------------------------------------------------------------------------

@dataclass
class Grid1D:
    points: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_1d(np.asarray(self.points, dtype=np.float64))
        if self.points.ndim != 1 or self.points.size < 1:
            raise ValueError("Grid1D needs a non-empty 1-D point list")
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("Grid1D points must be strictly increasing")

    @property
    def size(self) -> int:
        return self.points.size

    def to_dict(self) -> dict:
        return {"type": "Grid1D", "points": self.points.tolist()}


@dataclass
class Grid2D:
    lattice_step: float
    points: np.ndarray
    axes: tuple | None = None      # (ax_x, ax_y) of the enclosing rectangular lattice
    index: np.ndarray | None = None  # flat lattice index of every point

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if self.lattice_step <= 0:
            raise ValueError("lattice_step must be positive")
        if np.unique(self.points, axis=0).shape[0] != self.points.shape[0]:
            raise ValueError("Grid2D points must be distinct")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def to_dict(self) -> dict:
        d = {"type": "Grid2D", "lattice_step": self.lattice_step, "points": self.points.tolist()}
        if self.axes is not None:
            d["axes"] = [np.asarray(a).tolist() for a in self.axes]
        return d


def grid_from_dict(d):
    if d["type"] == "Grid1D":
        return Grid1D(np.asarray(d["points"]))
    axes = tuple(np.asarray(a) for a in d["axes"]) if "axes" in d else None
    return Grid2D(float(d["lattice_step"]), np.asarray(d["points"]), axes)


@dataclass
class PathEnsemble:
    kernel: KernelSpec
    grid: Grid1D | Grid2D
    values: np.ndarray
    seed: int
    generator_id: str = GENERATOR_ID
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != self.grid.size:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid size {self.grid.size}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("ensemble contains non-finite values")

    @property
    def n_trials(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# dense Cholesky
# ---------------------------------------------------------------------------

def cholesky_jitter(K):
    """Lower Cholesky factor, adding relative diagonal jitter when needed.

    Returns ``(L, jitter)``; ``jitter`` is the relative amount added (0 when
    the plain factorisation succeeds).
    """
    K = np.asarray(K, dtype=np.float64)
    zero = np.diag(K) == 0.0
    if zero.any():
        # degenerate points (e.g. sheet axes) are identically zero: exact zero rows
        if np.any(K[zero] != 0.0):
            raise FactorizationError("zero-variance point with nonzero covariance")
        L = np.zeros_like(K)
        keep = np.flatnonzero(~zero)
        jitter = 0.0
        if keep.size:
            Lk, jitter = cholesky_jitter(K[np.ix_(keep, keep)])
            L[np.ix_(keep, keep)] = Lk
        return L, jitter
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(K))) or 1.0
    jitter = JITTER_START
    eye = np.eye(K.shape[0])
    for step in range(JITTER_ESCALATIONS + 1):
        try:
            L = np.linalg.cholesky(K + jitter * scale * eye)
            log.info("cholesky needed relative jitter %.0e (escalation %d)", jitter, step)
            return L, jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationError(
        f"Gram matrix of size {K.shape[0]} not PSD after {JITTER_ESCALATIONS} jitter escalations"
    )


class CholBlock:
    def __init__(self, L):
        self.L = np.asarray(L)
        self.m = self.L.shape[0]

    def __call__(self, gen, rows):
        z = gen.standard_normal((rows, self.m))
        return z @ self.L.T


def _points(grid):
    return grid.points


def chol_sample(kernel: KernelSpec, grid, n_trials: int, seed: int, workers=1, tags=()) -> PathEnsemble:
    """Rows are i.i.d. centred Gaussian vectors with the kernel's Gram matrix on ``grid``."""
    if grid.size > DENSE_BUDGET:
        raise BudgetError(f"dense factorisation budget is {DENSE_BUDGET} points, got {grid.size}")
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    K = kernel.gram(_points(grid))
    L, jitter = cholesky_jitter(K)
    blocks = map_blocks(CholBlock(L), seed, n_trials, tags=(1,) + tuple(tags), workers=workers)
    return PathEnsemble(kernel, grid, np.vstack(blocks), seed, meta={"method": "cholesky", "jitter": jitter})


# ---------------------------------------------------------------------------
# circulant embedding
# ---------------------------------------------------------------------------

def fgn_acov(H, n, dt=1.0):
    """Autocovariance of fGn increments of step ``dt`` at lags 0..n."""
    k = np.arange(n + 1, dtype=np.float64)
    return 0.5 * (np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H)) * dt ** (2 * H)


def circulant_eigenvalues(acov):
    """Eigenvalues of the minimal circulant embedding of ``acov[0..m]`` (size 2m)."""
    acov = np.asarray(acov, dtype=np.float64)
    row = np.concatenate([acov, acov[-2:0:-1]])
    return np.fft.fft(row).real


class CirculantBlock:
    """Stationary Gaussian sequence of length ``n`` from an embedded autocovariance."""

    def __init__(self, acov, n):
        lam = circulant_eigenvalues(acov)
        scale = max(float(np.max(np.abs(lam))), 1e-300)
        self.min_eig = float(lam.min()) / scale
        if self.min_eig < -EIG_TOL:
            raise FactorizationError(f"circulant embedding has negative eigenvalue {self.min_eig:.3e}")
        self.M = lam.size
        self.n = n
        self.amp = np.sqrt(np.clip(lam, 0.0, None) / self.M)

    def __call__(self, gen, rows):
        out = np.empty((rows, self.n))
        pairs = (rows + 1) // 2
        chunk = max(1, FFT_CHUNK // self.M)
        r = 0
        for lo in range(0, pairs, chunk):
            cp = min(chunk, pairs - lo)
            z = gen.standard_normal((cp, 2, self.M))
            w = np.fft.fft(self.amp * (z[:, 0] + 1j * z[:, 1]), axis=1)[:, : self.n]
            both = np.empty((2 * cp, self.n))
            both[0::2] = w.real
            both[1::2] = w.imag
            take = min(2 * cp, rows - r)
            out[r : r + take] = both[:take]
            r += take
        return out


class WhiteBlock:
    def __init__(self, n, sd):
        self.n, self.sd = n, sd

    def __call__(self, gen, rows):
        return gen.standard_normal((rows, self.n)) * self.sd


def fgn_block(H, n_steps, dt):
    """Block function producing ``n_steps`` exact fGn increments of step ``dt``."""
    if n_steps > FGN_BUDGET:
        raise BudgetError(f"fGn budget is {FGN_BUDGET} steps, got {n_steps}")
    if H == 0.5:
        return WhiteBlock(n_steps, np.sqrt(dt))
    try:
        return CirculantBlock(fgn_acov(H, n_steps, dt), n_steps)
    except FactorizationError:
        if n_steps > DENSE_BUDGET:
            raise
        log.warning("fGn circulant embedding indefinite (H=%s, n=%d); falling back to Cholesky", H, n_steps)
        k = np.arange(n_steps)
        acov = fgn_acov(H, n_steps, dt)
        L, _ = cholesky_jitter(acov[np.abs(k[:, None] - k[None, :])])
        return CholBlock(L)


class FbmBlock:
    """fBm on the uniform lattice dt*k.

    One-sided: k = 0..n (column 0 is b(0) = 0).  Two-sided: k = -n..n, the
    origin sitting at column n.
    """

    def __init__(self, H, n_steps, dt, two_sided=False):
        self.n = n_steps
        self.two_sided = two_sided
        self.inc = fgn_block(H, 2 * n_steps if two_sided else n_steps, dt)

    def __call__(self, gen, rows):
        inc = self.inc(gen, rows)
        path = np.zeros((rows, inc.shape[1] + 1))
        np.cumsum(inc, axis=1, out=path[:, 1:])
        if self.two_sided:
            path -= path[:, self.n : self.n + 1]
        return path


def fgn_circulant(H, n_steps, dt, n_trials, seed, workers=1, tags=()) -> PathEnsemble:
    """fBm on dt*[0..n_steps] from exact circulant-embedded fGn increments."""
    from .kernels import Hurst

    h = Hurst(H).value
    block = FbmBlock(h, n_steps, dt)
    values = np.vstack(map_blocks(block, seed, n_trials, tags=(2,) + tuple(tags), workers=workers))
    grid = Grid1D(dt * np.arange(n_steps + 1))
    method = type(block.inc).__name__
    return PathEnsemble(KernelSpec(Family.FBM, h), grid, values, seed, meta={"method": method})


def stationary_block(kernel: KernelSpec, n_points, dt, max_pad=64):
    """Block function for a 1-D stationary kernel on ``n_points`` with spacing ``dt``.

    The embedding is padded (doubling) until its spectrum is nonnegative to
    within EIG_TOL; Cholesky is the last resort.
    """
    if n_points > FGN_BUDGET:
        raise BudgetError(f"stationary budget is {FGN_BUDGET} points, got {n_points}")
    m = max(n_points - 1, 1)
    limit = max_pad * max(n_points, 64)
    while m <= min(limit, FGN_BUDGET):
        acov = kernel.corr1d(dt * np.arange(m + 1))
        try:
            return CirculantBlock(acov, n_points)
        except FactorizationError:
            m *= 2
    if n_points > DENSE_BUDGET:
        raise FactorizationError("stationary embedding failed and grid exceeds dense budget")
    log.warning("circulant embedding failed for %s; falling back to Cholesky", kernel.family.value)
    t = dt * np.arange(n_points)
    L, _ = cholesky_jitter(kernel.gram(t))
    return CholBlock(L)


def stationary_circulant(kernel: KernelSpec, n_points, dt, n_trials, seed, workers=1, tags=()) -> PathEnsemble:
    block = stationary_block(kernel, n_points, dt)
    values = np.vstack(map_blocks(block, seed, n_trials, tags=(3,) + tuple(tags), workers=workers))
    return PathEnsemble(kernel, Grid1D(dt * np.arange(n_points)), values, seed,
                        meta={"method": type(block).__name__})


# ---------------------------------------------------------------------------
# sheets
# ---------------------------------------------------------------------------

class KronBlock:
    """Field on a rectangular lattice with covariance K1 (x) K2, restricted to ``index``."""

    def __init__(self, L1, L2, index=None):
        self.L1, self.L2 = L1, L2
        self.index = index

    def __call__(self, gen, rows):
        nx, ny = self.L1.shape[0], self.L2.shape[0]
        z = gen.standard_normal((rows, nx, ny))
        field_ = np.matmul(np.matmul(self.L1, z), self.L2.T).reshape(rows, nx * ny)
        return field_ if self.index is None else field_[:, self.index]


def kron_block(kernel: KernelSpec, ax_x, ax_y, index=None):
    if ax_x.size * ax_y.size > KRON_BUDGET:
        raise BudgetError(f"lattice budget is {KRON_BUDGET} points, got {ax_x.size * ax_y.size}")
    axis = kernel.axis_kernel()
    L1, _ = cholesky_jitter(axis.gram(ax_x))
    L2 = L1 if ax_y is ax_x or np.array_equal(ax_x, ax_y) else cholesky_jitter(axis.gram(ax_y))[0]
    return KronBlock(L1, L2, index)


def lattice_points(ax_x, ax_y):
    X, Y = np.meshgrid(ax_x, ax_y, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def kron_sample(kernel: KernelSpec, ax_x, ax_y, n_trials, seed, mask=None, workers=1, tags=()) -> PathEnsemble:
    ax_x = np.asarray(ax_x, dtype=np.float64)
    ax_y = np.asarray(ax_y, dtype=np.float64)
    pts = lattice_points(ax_x, ax_y)
    index = None if mask is None else np.flatnonzero(np.asarray(mask).ravel())
    block = kron_block(kernel, ax_x, ax_y, index)
    values = np.vstack(map_blocks(block, seed, n_trials, tags=(4,) + tuple(tags), workers=workers))
    if index is not None:
        pts = pts[index]
    step = float(np.min(np.diff(ax_x))) if ax_x.size > 1 else 1.0
    grid = Grid2D(step, pts, axes=(ax_x, ax_y), index=index)
    return PathEnsemble(kernel, grid, values, seed, meta={"method": "kronecker"})


def fbs_sample_kron(H, grid_x: Grid1D, grid_y: Grid1D, n_trials, seed, mask=None, workers=1) -> PathEnsemble:
    """Fractional Brownian sheet on grid_x x grid_y via chol(K1 (x) K2) = chol(K1) (x) chol(K2)."""
    return kron_sample(KernelSpec(Family.FBS, H), grid_x.points, grid_y.points, n_trials, seed,
                       mask=mask, workers=workers)


# ---------------------------------------------------------------------------
# integrated fBm
# ---------------------------------------------------------------------------

class IfbmQuadBlock:
    """Trapezoid integral of an fBm path on dt*[0..n]; column 0 is x(0) = 0."""

    def __init__(self, H, n_steps, dt):
        self.fbm = FbmBlock(H, n_steps, dt)
        self.dt = dt

    def __call__(self, gen, rows):
        return core.cumtrapz(self.fbm(gen, rows), self.dt)


def ifbm_paths(H, T, n_steps, n_trials, seed, method="quadrature", workers=1) -> PathEnsemble:
    """Integrated fBm on the grid T*k/n_steps, k = 0..n_steps."""
    if n_steps < 16:
        raise ValueError("n_steps must be at least 16")
    kernel = KernelSpec(Family.IFBM, H)
    dt = T / n_steps
    grid = Grid1D(dt * np.arange(n_steps + 1))
    if method == "quadrature":
        block = IfbmQuadBlock(kernel.H, n_steps, dt)
        values = np.vstack(map_blocks(block, seed, n_trials, tags=(5,), workers=workers))
    elif method == "exact":
        if n_steps > DENSE_BUDGET:
            raise BudgetError(f"exact IFBM limited to {DENSE_BUDGET} steps")
        L, _ = cholesky_jitter(kernel.gram(grid.points[1:]))
        inner = np.vstack(map_blocks(CholBlock(L), seed, n_trials, tags=(6,), workers=workers))
        values = np.hstack([np.zeros((n_trials, 1)), inner])
    else:
        raise ValueError(f"unknown method {method!r}")
    return PathEnsemble(kernel, grid, values, seed, meta={"method": method, "dt": dt})


def trapezoid_weights(n_steps, dt):
    """Weights w with sum_k w_k b(k dt) = trapezoid integral over [0, n dt]."""
    w = np.full(n_steps + 1, dt)
    w[0] = w[-1] = dt / 2
    return w


def quadrature_variance(H, T, n_steps):
    """Exact variance of the trapezoid integral of fBm on [0, T] with n_steps cells."""
    dt = T / n_steps
    t = dt * np.arange(n_steps + 1)
    w = trapezoid_weights(n_steps, dt)
    K = fbm_cov(H, t[:, None], t[None, :])
    return float(w @ K @ w)


# ---------------------------------------------------------------------------
# covariance check
# ---------------------------------------------------------------------------

@dataclass
class CovReport:
    n_trials: int
    max_abs_dev: float
    worst_z: float
    worst_entry: tuple
    passed: bool
    threshold: float = 4.0

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "max_abs_dev": self.max_abs_dev,
            "worst_z": self.worst_z,
            "worst_entry": list(self.worst_entry),
            "passed": self.passed,
            "threshold": self.threshold,
        }


def empirical_cov_report(ensemble: PathEnsemble, analytic=None, threshold=4.0) -> CovReport:
    """Compare the empirical second moments with the analytic covariance.

    The mean is known to be zero, so S = X^T X / n; each entry has variance
    (K_ii K_jj + K_ij^2) / n under Gaussianity.  Entries with zero analytic
    variance (degenerate points) must match to an absolute 1e-8 * max diag.
    """
    X = ensemble.values
    n = X.shape[0]
    if n < 100:
        raise ValueError("empirical_cov_report needs at least 100 trials")
    K = ensemble.kernel.gram(ensemble.grid.points) if analytic is None else np.asarray(analytic)
    S = X.T @ X / n
    d = np.diag(K)
    var = (np.outer(d, d) + K**2) / n
    dev = S - K
    atol = 1e-8 * max(float(d.max()), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(var > 0, np.abs(dev) / np.sqrt(var), np.where(np.abs(dev) <= atol, 0.0, np.inf))
    i, j = np.unravel_index(int(np.argmax(z)), z.shape)
    worst = float(z[i, j])
    return CovReport(n, float(np.max(np.abs(dev))), worst, (int(i), int(j)), bool(worst <= threshold), threshold)
