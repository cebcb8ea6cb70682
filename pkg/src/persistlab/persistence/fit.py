"""Weighted least-squares fits of -ln p_T against a scaling function psi(T)."""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

MIN_SURVIVORS = 10
MIN_POINTS = 4


class PsiModel(str, enum.Enum):
    LOG_T = "LOG_T"
    LOG_T_SQ = "LOG_T_SQ"
    LINEAR_T = "LINEAR_T"

    def __call__(self, T):
        T = np.asarray(T, dtype=np.float64)
        if self is PsiModel.LOG_T:
            return np.log(T)
        if self is PsiModel.LOG_T_SQ:
            return np.log(T) ** 2
        return T


class InsufficientSurvivors(RuntimeError):
    def __init__(self, msg, points=()):
        super().__init__(msg)
        self.points = list(points)


@dataclass
class ExponentFit:
    psi_model: PsiModel
    T_ladder: list
    theta_hat: float
    stderr: float
    intercept: float
    weights: str
    chi2_dof: float = float("nan")
    stderr_raw: float = float("nan")
    dropped: list = field(default_factory=list)

    def __post_init__(self):
        if not math.isfinite(self.theta_hat):
            raise ValueError("theta_hat must be finite")
        T = np.asarray(self.T_ladder)
        if T.size < MIN_POINTS or np.any(np.diff(T) <= 0):
            raise ValueError("T_ladder must be strictly increasing with at least 4 points")

    def to_dict(self) -> dict:
        return {
            "psi_model": self.psi_model.value,
            "T_ladder": list(map(float, self.T_ladder)),
            "theta_hat": self.theta_hat,
            "stderr": self.stderr,
            "stderr_raw": self.stderr_raw,
            "intercept": self.intercept,
            "chi2_dof": self.chi2_dof,
            "weights": self.weights,
            "dropped": list(map(float, self.dropped)),
        }


def fit_ladder(T, p_hat, n_trials, psi_model, n_survive=None) -> ExponentFit:
    """WLS fit of -ln p_hat = theta * psi(T) + c.

    Weights are the inverse delta-method variances n p / (1 - p) of ln p_hat.
    Points with fewer than ``MIN_SURVIVORS`` survivors are dropped with a
    warning.  ``stderr`` is the model-based standard error inflated by
    sqrt(chi2/dof) when the residual scatter exceeds the binomial noise.
    """
    psi_model = PsiModel(psi_model)
    T = np.asarray(T, dtype=np.float64)
    p = np.asarray(p_hat, dtype=np.float64)
    n = np.broadcast_to(np.asarray(n_trials, dtype=np.float64), T.shape)
    k = p * n if n_survive is None else np.asarray(n_survive, dtype=np.float64)
    keep = k >= MIN_SURVIVORS
    dropped = T[~keep].tolist()
    if dropped:
        log.warning("dropping ladder points with < %d survivors: T=%s", MIN_SURVIVORS, dropped)
    if keep.sum() < MIN_POINTS:
        raise InsufficientSurvivors(
            f"only {int(keep.sum())} ladder points have >= {MIN_SURVIVORS} survivors; "
            "shrink the ladder or add trials", dropped)
    T, p, n = T[keep], p[keep], n[keep]
    order = np.argsort(T)
    T, p, n = T[order], p[order], n[order]
    x = psi_model(T)
    y = -np.log(p)
    w = n * p / np.maximum(1.0 - p, 0.5 / n)
    X = np.stack([x, np.ones_like(x)], axis=1)
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    resid = y - X @ beta
    dof = T.size - 2
    chi2_dof = float(np.sum(w * resid**2) / dof)
    se_raw = float(math.sqrt(cov[0, 0]))
    se = se_raw * math.sqrt(max(1.0, chi2_dof))
    return ExponentFit(psi_model, T.tolist(), float(beta[0]), se, float(beta[1]),
                       "inverse delta-method variance n*p/(1-p)", chi2_dof, se_raw, dropped)


def fit_exponent(estimates, psi_model, T_values=None) -> ExponentFit:
    """Fit a ladder of :class:`PersistenceEstimate`; T defaults to each domain's ``T``."""
    T = [e.domain.T for e in estimates] if T_values is None else list(T_values)
    return fit_ladder(T, [e.p_hat for e in estimates], [e.n_trials for e in estimates], psi_model,
                      n_survive=[e.n_survive for e in estimates])
