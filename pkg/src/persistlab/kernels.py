"""Covariance and correlation functions for fBm-related Gaussian processes.

Families
--------
FBM        fractional Brownian motion b_H
FBS        fractional Brownian sheet, product of fBm covariances per axis
IFBM       integrated fBm x_H(s) = int_0^s b_H
DUAL_FBM   stationary Lamperti dual e^{-Ht} b_H(e^t)
DUAL_IFBM  stationary Lamperti dual of IFBM, normalised to unit variance
DUAL_FBS   stationary dual sheet e^{-H(t1+t2)} x(e^{t1}, e^{t2})
SECH       stationary process with correlation 1/cosh(scale * t)

Besides the kernels the module holds the auxiliary functions used by the
existence argument for the sheet exponent (drift functions, the dyadic
sequence correlation, the modulus bound) and the numerical verifiers for
the dual IFBM correlation (R >= 0, monotone decay, sech domination).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import binom


class Family(str, enum.Enum):
    FBM = "FBM"
    FBS = "FBS"
    IFBM = "IFBM"
    DUAL_FBM = "DUAL_FBM"
    DUAL_IFBM = "DUAL_IFBM"
    DUAL_FBS = "DUAL_FBS"
    SECH = "SECH"

    @classmethod
    def parse(cls, name) -> "Family":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            raise ValueError(f"unknown kernel family {name!r}") from None


TWO_D = {Family.FBS, Family.DUAL_FBS}
STATIONARY = {Family.DUAL_FBM, Family.DUAL_IFBM, Family.DUAL_FBS, Family.SECH}


@dataclass(frozen=True)
class Hurst:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 < v < 1.0) or math.isnan(v):
            raise ValueError(f"Hurst index must lie in (0, 1), got {self.value!r}")
        object.__setattr__(self, "value", v)

    @property
    def bar(self) -> float:
        """Complementary index 1 - H."""
        return 1.0 - self.value

    def __float__(self):
        return self.value


def _h(H) -> float:
    return H.value if isinstance(H, Hurst) else Hurst(H).value


def _apow(x, p):
    # |x|^p with an exact zero at x = 0 (no NaN from log(0))
    return np.power(np.abs(np.asarray(x, dtype=np.float64)), p)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


# ---------------------------------------------------------------------------
# covariance functions
# ---------------------------------------------------------------------------

def fbm_cov(H, a, b):
    """E b_H(a) b_H(b) = (|a|^2H + |b|^2H - |a-b|^2H) / 2."""
    p = 2.0 * _h(H)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return _scalar(0.5 * (_apow(a, p) + _apow(b, p) - _apow(a - b, p)))


def fbs_cov(H, s, t):
    """Sheet covariance B(s1, t1) B(s2, t2); points have a trailing axis of 2."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    return _scalar(fbm_cov(H, s[..., 0], t[..., 0]) * fbm_cov(H, s[..., 1], t[..., 1]))


def _r2(q, y):
    """(1 - y)^q - 1 + q y for y in [0, 1], without cancellation at small y."""
    y = np.asarray(y, dtype=np.float64)
    out = np.empty_like(y)
    small = y < 0.25
    if np.any(small):
        ys = y[small]
        k = np.arange(2, 40)
        coef = binom(q, k) * (-1.0) ** k
        out[small] = np.sum(coef[:, None] * ys[None, :] ** k[:, None], axis=0)
    if np.any(~small):
        yl = y[~small]
        out[~small] = (1.0 - yl) ** q - 1.0 + q * yl
    return out


def _ifbm_cov_same_sign(p, s, t):
    # 0 < s <= t: 2(p+1) cov = t^q [ y^(p+1) (1 - y/q) + R2(y)/q ],  y = s/t
    q = p + 2.0
    y = s / t
    return t**q * (y ** (p + 1.0) * (1.0 - y / q) + _r2(q, y) / q) / (2.0 * (p + 1.0))


def ifbm_cov(H, s, t):
    """E x_H(s) x_H(t) for the integrated fBm, any real s, t.

    Closed form of int_0^s int_0^t B(u, v) du dv (oriented integrals):

        (1/2)[ t sgn(s)|s|^(p+1)/(p+1) + s sgn(t)|t|^(p+1)/(p+1)
               - (|s|^(p+2) + |t|^(p+2) - |s-t|^(p+2)) / ((p+1)(p+2)) ],  p = 2H.

    Same-sign arguments go through a rearranged form that avoids the
    cancellation between the leading powers when |s| << |t|.
    """
    p = 2.0 * _h(H)
    s_arr, t_arr = np.broadcast_arrays(np.asarray(s, dtype=np.float64), np.asarray(t, dtype=np.float64))
    out = np.zeros(s_arr.shape)
    same = (s_arr * t_arr) > 0
    if np.any(same):
        a = np.abs(s_arr[same])
        b = np.abs(t_arr[same])
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        out[same] = _ifbm_cov_same_sign(p, lo, hi)
    mixed = (s_arr * t_arr) < 0
    if np.any(mixed):
        sm, tm = s_arr[mixed], t_arr[mixed]
        p1, p2 = p + 1.0, p + 2.0
        out[mixed] = 0.5 * (
            tm * np.sign(sm) * _apow(sm, p1) / p1
            + sm * np.sign(tm) * _apow(tm, p1) / p1
            - (_apow(sm, p2) + _apow(tm, p2) - _apow(sm - tm, p2)) / (p1 * p2)
        )
    return _scalar(out)


def dual_ifbm_corr(H, t):
    """Correlation B_H(t) of the stationary dual of integrated fBm.

    B_H(t) = [2(1+H)(e^{Ht} + e^{-Ht}) - (e^{(1+H)t} + e^{-(1+H)t})
              + (e^{t/2} - e^{-t/2})^{2H+2}] / (2 + 4H)

    evaluated as [q e^{-Ht} - e^{-(1+H)t} + e^{(1+H)t} R2(e^{-t})] / (2+4H),
    q = 2H+2, which is algebraically identical and stable for large t.
    Negative t is folded by symmetry.
    """
    h = _h(H)
    q = 2.0 * h + 2.0
    t = np.abs(np.asarray(t, dtype=np.float64))
    x = np.exp(-t)
    num = q * np.exp(-h * t) - np.exp(-(1.0 + h) * t) + np.exp((1.0 + h) * t) * _r2(q, x)
    return _scalar(num / (2.0 + 4.0 * h))


def dual_ifbm_corr_literal(H, t):
    """Direct transcription of the exponential-sum formula (unstable for t >~ 5)."""
    h = _h(H)
    t = np.abs(np.asarray(t, dtype=np.float64))
    num = (
        2.0 * (1.0 + h) * (np.exp(h * t) + np.exp(-h * t))
        - (np.exp((1.0 + h) * t) + np.exp(-(1.0 + h) * t))
        + (np.exp(t / 2.0) - np.exp(-t / 2.0)) ** (2.0 * h + 2.0)
    )
    return _scalar(num / (2.0 + 4.0 * h))


def dual_fbm_corr(H, t):
    """e^{-Ht} B(1, e^t) = cosh(Ht) - (2 sinh(t/2))^{2H} / 2.

    Evaluated as (e^{-Ht} - e^{Ht} expm1(2H log1p(-e^{-t}))) / 2, which avoids
    the cancellation between the two terms at large t.
    """
    h = _h(H)
    t = np.abs(np.asarray(t, dtype=np.float64))
    with np.errstate(divide="ignore"):
        tail = np.expm1(2.0 * h * np.log1p(-np.exp(-t)))
    return _scalar(0.5 * (np.exp(-h * t) - np.exp(h * t) * tail))


def dual_fbs_corr(H, t1, t2):
    return _scalar(dual_fbm_corr(H, np.abs(t1)) * dual_fbm_corr(H, np.abs(t2)))


def sech_corr(t, scale=0.5):
    if scale <= 0:
        raise ValueError("scale must be positive")
    return _scalar(1.0 / np.cosh(scale * np.asarray(t, dtype=np.float64)))


# ---------------------------------------------------------------------------
# kernel descriptor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelSpec:
    family: Family
    hurst: Hurst | None = None
    scale: float = 0.5

    def __post_init__(self):
        fam = Family.parse(self.family)
        object.__setattr__(self, "family", fam)
        if self.hurst is not None and not isinstance(self.hurst, Hurst):
            object.__setattr__(self, "hurst", Hurst(self.hurst))
        if fam is not Family.SECH and self.hurst is None:
            raise ValueError(f"{fam.value} requires a Hurst index")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def H(self) -> float:
        return self.hurst.value if self.hurst is not None else float("nan")

    @property
    def dim(self) -> int:
        return 2 if self.family in TWO_D else 1

    @property
    def stationary(self) -> bool:
        return self.family in STATIONARY

    @property
    def ss_index(self) -> float | None:
        """Self-similarity index for the H-ss families (None for stationary ones)."""
        return {
            Family.FBM: self.H,
            Family.IFBM: self.H + 1.0,
            Family.FBS: 2.0 * self.H,
        }.get(self.family)

    def cov(self, x, y):
        """Covariance between points x and y (arrays broadcast)."""
        f = self.family
        if f is Family.FBM:
            return fbm_cov(self.hurst, x, y)
        if f is Family.IFBM:
            return ifbm_cov(self.hurst, x, y)
        if f is Family.FBS:
            return fbs_cov(self.hurst, x, y)
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if f is Family.DUAL_FBS:
            return dual_fbs_corr(self.hurst, x[..., 0] - y[..., 0], x[..., 1] - y[..., 1])
        lag = x - y
        if f is Family.DUAL_FBM:
            return dual_fbm_corr(self.hurst, lag)
        if f is Family.DUAL_IFBM:
            return dual_ifbm_corr(self.hurst, lag)
        return sech_corr(lag, self.scale)

    def corr1d(self, lag):
        """Stationary correlation as a function of a scalar lag (1-D stationary families)."""
        if self.family is Family.DUAL_FBM:
            return dual_fbm_corr(self.hurst, lag)
        if self.family is Family.DUAL_IFBM:
            return dual_ifbm_corr(self.hurst, lag)
        if self.family is Family.SECH:
            return sech_corr(lag, self.scale)
        raise ValueError(f"{self.family.value} has no scalar stationary correlation")

    def gram(self, points, other=None):
        """Covariance matrix between two point sets (n,) / (n, 2)."""
        p = np.asarray(points, dtype=np.float64)
        o = p if other is None else np.asarray(other, dtype=np.float64)
        if self.dim == 2:
            K = self.cov(p[:, None, :], o[None, :, :])
        else:
            K = self.cov(p[:, None], o[None, :])
        K = np.asarray(K, dtype=np.float64)
        if other is None:
            K = 0.5 * (K + K.T)
        return K

    def axis_kernel(self) -> "KernelSpec":
        """Per-axis 1-D kernel whose Kronecker square is this sheet kernel."""
        if self.family is Family.FBS:
            return KernelSpec(Family.FBM, self.hurst)
        if self.family is Family.DUAL_FBS:
            return KernelSpec(Family.DUAL_FBM, self.hurst)
        raise ValueError("axis_kernel is defined for sheet families only")

    def to_dict(self) -> dict:
        d = {"family": self.family.value}
        if self.hurst is not None:
            d["H"] = self.hurst.value
        if self.family is Family.SECH:
            d["scale"] = self.scale
        return d

    @classmethod
    def from_dict(cls, d) -> "KernelSpec":
        d = dict(d)
        fam = d.pop("family")
        H = d.pop("H", d.pop("hurst", None))
        scale = d.pop("scale", 0.5)
        if d:
            raise ValueError(f"unknown kernel fields: {sorted(d)}")
        return cls(Family.parse(fam), None if H is None else Hurst(H), float(scale))


# ---------------------------------------------------------------------------
# sheet exponent scaffolding
# ---------------------------------------------------------------------------

def r_poly(H, x):
    """R(x) = 1 - 2Hx - (1-x)^{2H}(1-x^2) + 2H x^{2H+1} - x^{2+2H} on [0, 1]."""
    h = _h(H)
    x = np.asarray(x, dtype=np.float64)
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise ValueError("r_poly is defined on [0, 1]")
    val = (
        1.0
        - 2.0 * h * x
        - _apow(1.0 - x, 2.0 * h) * (1.0 - x * x)
        + 2.0 * h * _apow(x, 2.0 * h + 1.0)
        - _apow(x, 2.0 + 2.0 * h)
    )
    return _scalar(val)


def f_drift(H, x):
    """f(x) = |x|^{2H} + 1 - |x-1|^{2H}."""
    p = 2.0 * _h(H)
    x = np.asarray(x, dtype=np.float64)
    return _scalar(_apow(x, p) + 1.0 - _apow(x - 1.0, p))


def psi_drift(H, a, s):
    """psi_a(s) = E x(s) * 4 x(a, 1/a) = f(s1/a) f(s2 a)."""
    if a <= 0:
        raise ValueError("a must be positive")
    s = np.asarray(s, dtype=np.float64)
    return _scalar(f_drift(H, s[..., 0] / a) * f_drift(H, s[..., 1] * a))


def eta_corr(H, n):
    """B(n) = (2^{-2Hn} + 1 - |2^{-n} - 1|^{2H})^2 2^{2Hn}, evaluated at |n|."""
    h = _h(H)
    n = np.abs(np.asarray(n, dtype=np.float64))
    # 1 - (1 - 2^-n)^{2H} via expm1/log1p; product formed in log space
    with np.errstate(divide="ignore"):
        base = np.exp2(-2.0 * h * n) - np.expm1(2.0 * h * np.log1p(-np.exp2(-n)))
        return _scalar(np.exp(2.0 * np.log(base) + 2.0 * h * n * np.log(2.0)))


def eta_sum(H, tol=1e-12, max_terms=1_000_000):
    """c = sum over all integers k of B(k), truncated once the tail is below ``tol``."""
    h = _h(H)
    gamma = 2.0 * min(h, 1.0 - h)
    # tail of a geometric majorant sum_{k>K} C 2^{-gamma k}
    total = float(eta_corr(h, 0))
    k = 1
    ratio = 2.0 ** (-gamma)
    while k < max_terms:
        ks = np.arange(k, k + 1024)
        terms = eta_corr(h, ks)
        total += 2.0 * float(np.sum(terms))
        k += 1024
        last = float(terms[-1])
        tail = 2.0 * last * ratio / (1.0 - ratio) * 1.5
        if tail < tol:
            break
    return total


def phi_norm_sq(H, N):
    """sum_{|n|<=N} sum_{|m|<=N} B(n - m) = sum_k (2N+1-|k|) B(k)."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    k = np.arange(-2 * N, 2 * N + 1)
    return float(np.sum((2 * N + 1 - np.abs(k)) * eta_corr(H, k)))


def lemma1_bound(H, T, h, cH):
    """cH (1 + 2 T^{-2} h^{-1})^{-2H}: modulus bound on the hyperbolic chart of U0."""
    if cH <= 0:
        raise ValueError("cH must be positive")
    if T <= 1:
        raise ValueError("T must exceed 1")
    hh = np.asarray(h, dtype=np.float64)
    if np.any((hh <= 0) | (hh > 1)):
        raise ValueError("h must lie in (0, 1]")
    return _scalar(cH * (1.0 + 2.0 / (T * T * hh)) ** (-2.0 * _h(H)))


def modulus_sq(H, T, h, n=24):
    """Sup of E|x(s) - x(s')|^2 over chart points a, a' in [0,1]^2 with |a - a'| < h.

    Chart: a1 = s1/T, a2 = s1 s2 on U0 = {s1 s2 < 1} within [0,T]^2.  The sup is
    taken over an n x n chart grid (points outside [0,T]^2 dropped), with exact
    increment variances from the sheet covariance.
    """
    hv = _h(H)
    u = (np.arange(n) + 0.5) / n
    a1, a2 = np.meshgrid(u, u, indexing="ij")
    a1, a2 = a1.ravel(), a2.ravel()
    s1 = T * a1
    s2 = a2 / s1
    keep = s2 <= T
    a1, a2, s1, s2 = a1[keep], a2[keep], s1[keep], s2[keep]
    pts = np.stack([s1, s2], axis=1)
    var = (s1 * s2) ** (2.0 * hv)
    K = fbs_cov(hv, pts[:, None, :], pts[None, :, :])
    inc = var[:, None] + var[None, :] - 2.0 * K
    close = (np.abs(a1[:, None] - a1[None, :]) < h) & (np.abs(a2[:, None] - a2[None, :]) < h)
    return float(np.max(np.where(close, inc, 0.0)))


def fit_lemma1_constant(H, T_values, h_values, n=24) -> dict:
    """Smallest cH with modulus_sq <= lemma1_bound(cH) over the tested (T, h) grid."""
    ratios = []
    for T in T_values:
        for h in h_values:
            ratios.append(modulus_sq(H, T, h, n) / lemma1_bound(H, T, h, 1.0))
    ratios = np.asarray(ratios).reshape(len(T_values), len(h_values))
    return {"cH": float(ratios.max()), "ratios": ratios}


# ---------------------------------------------------------------------------
# verifiers for the dual IFBM correlation
# ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), **self.details}


def verify_r_nonneg(H, gridsize=1001, tol=1e-12) -> CheckReport:
    if gridsize < 2:
        raise ValueError("gridsize must be at least 2")
    x = np.linspace(0.0, 1.0, gridsize)
    r = r_poly(H, x)
    i = int(np.argmin(r))
    return CheckReport(
        "r_nonneg",
        bool(r[i] >= -tol),
        {"H": _h(H), "min": float(r[i]), "argmin": float(x[i]),
         "endpoints": [float(r[0]), float(r[-1])]},
    )


def verify_monotone(H, tmax=20.0, gridsize=2000, tol=1e-12) -> CheckReport:
    """B_H nonincreasing on a uniform grid of [0, tmax]."""
    if tmax <= 0:
        raise ValueError("tmax must be positive")
    t = np.linspace(0.0, tmax, gridsize + 1)
    B = dual_ifbm_corr(H, t)
    d = np.diff(B)
    bad = t[1:][d > tol]
    return CheckReport(
        "monotone",
        bool(bad.size == 0),
        {"H": _h(H), "B0": float(B[0]), "max_increment": float(d.max()),
         "violations": bad[:20].tolist()},
    )


def _arccosh(x):
    x = np.asarray(x, dtype=np.float64)
    x = np.where((x < 1.0) & (x > 1.0 - 1e-14), 1.0, x)
    return np.log(x + np.sqrt(x * x - 1.0))


@dataclass
class CoshBoundReport(CheckReport):
    rho_star: float = float("nan")
    t_star: float = float("nan")


def rho_star_on(H, t):
    """inf over t > 0 with B_H(t) > 0 of arccosh(1/B_H(t)) / (H (1-H) t)."""
    h = _h(H)
    t = np.asarray(t, dtype=np.float64)
    t = t[t > 0]
    B = dual_ifbm_corr(h, t)
    pos = B > 0
    ratio = _arccosh(1.0 / B[pos]) / (h * (1.0 - h) * t[pos])
    return float(np.min(ratio)), ratio, t[pos]


def verify_cosh_bound(H, tmax=50.0, gridsize=5000) -> CoshBoundReport:
    """Sharpest rho with B_H(t) <= 1/cosh(rho H(1-H) t) on a grid of (0, tmax].

    Also reports t_star: the smallest grid time beyond which the bound holds
    with rho = 1 at every remaining grid point.
    """
    if tmax < 10:
        raise ValueError("tmax must be at least 10")
    h = _h(H)
    t = np.linspace(tmax / gridsize, tmax, gridsize)
    B = dual_ifbm_corr(h, t)
    rho, _, _ = rho_star_on(h, t)
    ok1 = B <= 1.0 / np.cosh(h * (1.0 - h) * t)
    # last failing index; bound holds from the next grid point on
    fails = np.flatnonzero(~ok1)
    if fails.size == 0:
        t_star = 0.0
    elif fails[-1] == t.size - 1:
        t_star = float("inf")
    else:
        t_star = float(t[fails[-1] + 1])
    passed = bool(rho > 0 and np.all(B <= 1.0 + 1e-14) and math.isfinite(t_star))
    return CoshBoundReport(
        "cosh_bound",
        passed,
        {"H": h, "rho_star": rho, "t_star": t_star, "tmax": tmax, "gridsize": gridsize,
         "B_max": float(B.max())},
        rho_star=rho,
        t_star=t_star,
    )
