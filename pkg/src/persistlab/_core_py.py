"""Pure numpy implementations of the hot loops.

Same signatures and results as the compiled ``_core`` module; selected by
``persistlab.core`` when the extension is unavailable or disabled.
"""
import numpy as np
from scipy.special import ndtr, ndtri

BACKEND = "numpy"


def _first_true(mask):
    # index of first True per row, row length when none
    n, m = mask.shape
    idx = np.argmax(mask, axis=1)
    hit = mask[np.arange(n), idx]
    return np.where(hit, idx, m).astype(np.int64)


def first_exceed(values, level):
    """Index of the first column with ``values >= level`` per row (ncols if none)."""
    values = np.asarray(values, dtype=np.float64)
    return _first_true(values >= level)


def cumtrapz(paths, dt):
    """Cumulative trapezoid integral along rows; column 0 of the result is 0."""
    paths = np.asarray(paths, dtype=np.float64)
    out = np.zeros_like(paths)
    np.cumsum((paths[:, 1:] + paths[:, :-1]) * (0.5 * dt), axis=1, out=out[:, 1:])
    return out


def trapz_first_exceed(paths, dt, level):
    """First exceedance of the running trapezoid integral.

    ``paths[:, 0]`` is the integrand at the origin.  The integral is
    evaluated at columns ``1..m-1``; the returned index refers to that
    sub-grid, ``m - 1`` meaning no exceedance.
    """
    x = cumtrapz(paths, dt)
    return first_exceed(x[:, 1:], level)


def event_flags(values, inside, level):
    """Flags (M, G, Z) per row.

    M: every value < level.  G: the maximum over the inside points, with the
    zero anchor of the degenerate set counted as inside, strictly exceeds
    the maximum over the outside points.  Z: every outside value < 0.
    """
    values = np.asarray(values, dtype=np.float64)
    inside = np.asarray(inside, dtype=bool)
    n = values.shape[0]
    flags = np.zeros((n, 3), dtype=np.uint8)
    flags[:, 0] = np.all(values < level, axis=1)
    if inside.any():
        max_in = np.maximum(values[:, inside].max(axis=1), 0.0)
    else:
        max_in = np.zeros(n)
    if (~inside).any():
        max_out = values[:, ~inside].max(axis=1)
    else:
        max_out = np.full(n, -np.inf)
    flags[:, 1] = max_in > max_out
    flags[:, 2] = max_out < 0.0
    return flags


def genz_sov(chol, b, w):
    """Separation-of-variables integrand for P(X < b), X ~ N(0, L L^T).

    ``w`` holds points in [0,1)^(n-1); returns one integrand value per point.
    Zero pivots are treated as deterministic constraints.
    """
    chol = np.asarray(chol, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    npts = w.shape[0]
    n = b.shape[0]
    y = np.zeros((npts, n))
    f = np.ones(npts)
    for i in range(n):
        shift = y[:, :i] @ chol[i, :i]
        d = chol[i, i]
        if d > 0.0:
            e = ndtr((b[i] - shift) / d)
        else:
            e = (b[i] - shift >= 0.0).astype(np.float64)
        f *= e
        if i < n - 1 and d > 0.0:
            u = np.clip(w[:, i] * e, 1e-300, 1.0 - 1e-16)
            y[:, i] = ndtri(u)
    return f
