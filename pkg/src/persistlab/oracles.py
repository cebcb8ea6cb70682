"""Quadrature oracles, independent of the closed forms in ``kernels``.

The integrands are written out here from the fBm covariance definition,
so nothing but ``dual_ifbm_corr`` (the function under test) is imported
from ``kernels``.
"""
import numpy as np
from scipy import integrate

from .kernels import dual_ifbm_corr


def _fbm_cov(p, u, v):
    # scalar 1/2(|u|^p + |v|^p - |u-v|^p), p = 2H
    return 0.5 * (abs(u) ** p + abs(v) ** p - abs(u - v) ** p)


def _inner(H, u, t):
    # int_0^t B(u, v) dv, oriented, with a breakpoint at the kink v = u
    lo, hi = (0.0, t) if t >= 0 else (t, 0.0)
    pts = [u] if lo < u < hi else None
    val, _ = integrate.quad(
        lambda v: _fbm_cov(2.0 * H, u, v), lo, hi, points=pts, epsabs=1e-14, epsrel=1e-13, limit=200
    )
    return val if t >= 0 else -val


def ifbm_cov_quad(H, s, t):
    """E x_H(s) x_H(t) by nested adaptive quadrature of the fBm covariance."""
    lo, hi = (0.0, s) if s >= 0 else (s, 0.0)
    if lo == hi:
        return 0.0
    pts = [t] if lo < t < hi else None
    val, _ = integrate.quad(
        lambda u: _inner(H, u, t), lo, hi, points=pts, epsabs=1e-14, epsrel=1e-13, limit=200
    )
    return val if s >= 0 else -val


def _tanh_sinh(level):
    """Nodes x, 1-x and weights of the tanh-sinh rule on [0, 1] with step 2^-level."""
    h = 2.0**-level
    tau = np.arange(-int(3.5 / h), int(3.5 / h) + 1) * h
    s = 0.5 * np.pi * np.sinh(tau)
    x = 1.0 / (1.0 + np.exp(-2.0 * s))
    xc = 1.0 / (1.0 + np.exp(2.0 * s))
    w = h * 0.5 * np.pi * np.cosh(tau) / (2.0 * np.cosh(s) ** 2)
    keep = (x > 0) & (xc > 0) & (w > 0)
    return x[keep], xc[keep], w[keep]


def tanh_sinh_quad(f, tol=1e-12, min_level=3, max_level=8):
    """Adaptive tanh-sinh quadrature of a vectorised integrand on [0, 1].

    ``f(x, 1 - x)`` receives node arrays of shape (k,) and returns (k, ...).
    The step is halved until successive estimates agree to ``tol``
    (relative, max over components).
    """
    prev = None
    for level in range(min_level, max_level + 1):
        x, xc, w = _tanh_sinh(level)
        vals = f(x, xc)
        est = np.tensordot(w, vals, axes=(0, 0))
        if prev is not None:
            err = np.max(np.abs(est - prev) / np.maximum(np.abs(est), 1e-300))
            if err < tol:
                return est
        prev = est
    return est


def dual_ifbm_corr_quad(H, t, chunk=16):
    """(2H+2) e^{-(1+H)t} E x_H(1) x_H(e^t), with the double integral done numerically.

    Vectorised over ``t >= 0``.  The v-range [0, e^t] is split at v = 1: the
    unit square is integrated once with nested adaptive Gauss-Kronrod, the
    strip [0,1] x [1, e^t] with nested adaptive tanh-sinh over all t at once
    (v = 1 + (e^t - 1) w).
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    square = ifbm_cov_quad(H, 1.0, 1.0)
    p = 2.0 * H
    rect = np.empty_like(t)
    for lo in range(0, t.size, chunk):
        span = np.expm1(t[lo:lo + chunk])

        def strip(w, wc):
            dv = span[None, :] * w[:, None]  # v - 1
            v = 1.0 + dv

            def inner(u, uc):
                gap = dv[None, :, :] + uc[:, None, None]  # v - u
                return 0.5 * (u[:, None, None] ** p + v[None] ** p - gap**p)

            return span[None, :] * tanh_sinh_quad(inner)

        rect[lo:lo + chunk] = tanh_sinh_quad(strip)
    cov = square + rect
    return (2.0 * H + 2.0) * np.exp(-(1.0 + H) * t) * cov


def duality_gap(H_grid=None, tmax=10.0, n_t=1000):
    """Max |B_H(t) - quadrature dual| over an H grid and a t grid of [0, tmax]."""
    if H_grid is None:
        H_grid = np.round(np.arange(0.05, 0.951, 0.05), 2)
    t = np.linspace(0.0, tmax, n_t)
    rows = []
    for H in H_grid:
        gap = np.abs(dual_ifbm_corr(H, t) - dual_ifbm_corr_quad(H, t))
        k = int(np.argmax(gap))
        rows.append({"H": float(H), "max_gap": float(gap[k]), "at_t": float(t[k])})
    return rows
