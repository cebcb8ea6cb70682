"""Observation domains and their lattices."""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

EPS = 1e-9


class Shape(str, enum.Enum):
    INTERVAL = "INTERVAL"  # T * (lo, hi]
    SQUARE = "SQUARE"      # (0, T]^2
    CONE = "CONE"          # K_a within (0, T]^2, a <= s1/s2 <= 1/a
    TRIANGLE = "TRIANGLE"  # t1, t2 > 0, t1 + t2 < 2T
    BAND = "BAND"          # |t1 - t2| < |ln a|, t_i < dT, (t1 >= cT or t2 >= cT)


def _unit(p):
    return np.all(np.abs(p) < 1.0, axis=-1)


def _hyperbola(p):
    return np.prod(p, axis=-1) < 1.0


def _ball(p):
    return np.sqrt(np.sum(p * p, axis=-1)) < 1.0


REGIONS = {"unit": _unit, "hyperbola": _hyperbola, "ball": _ball}


def region_mask(name, points):
    """Membership of ``points`` (m,) or (m, d) in a named neighbourhood of the zero set."""
    p = np.asarray(points, dtype=np.float64)
    if p.ndim == 1:
        p = p[:, None]
    if name == "all":
        return np.ones(p.shape[0], dtype=bool)
    if name not in REGIONS:
        raise ValueError(f"unknown region {name!r}; choose from {sorted(REGIONS)} or 'all'")
    return REGIONS[name](p)


@dataclass
class Layout:
    """Grid points of a domain plus the lattice structure the samplers exploit."""

    points: np.ndarray
    step: float
    ks: np.ndarray | None = None      # 1-D: integer lattice index of each point (points = step * ks)
    axes: tuple | None = None         # 2-D: (ax_x, ax_y)
    index: np.ndarray | None = None   # 2-D: flat index into the axes lattice

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class DomainSpec:
    shape: Shape
    T: float
    n_grid: int = 1024
    lo: float = 0.0
    hi: float = 1.0
    a: float | None = None
    c: float | None = None
    d: float | None = None
    spacing: float | None = None
    log_grid: bool = False
    log_floor: float | None = None
    exclude: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ValueError("T must be positive and finite")
        if self.n_grid < 1:
            raise ValueError("n_grid must be positive")
        if self.spacing is not None and self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.exclude is not None and self.exclude not in REGIONS:
            raise ValueError(f"unknown exclude region {self.exclude!r}")
        s = self.shape
        if s is Shape.INTERVAL and not self.lo < self.hi:
            raise ValueError("INTERVAL needs lo < hi")
        if s is Shape.CONE and not (self.a is not None and 0 < self.a <= 1):
            raise ValueError("CONE needs 0 < a <= 1")
        if s is Shape.BAND:
            if not (self.a is not None and 0 < self.a < 1):
                raise ValueError("BAND needs 0 < a < 1")
            if self.c is None or self.d is None or not self.c < self.d:
                raise ValueError("BAND needs c < d")
        if self.log_grid:
            if s not in (Shape.SQUARE, Shape.CONE):
                raise ValueError("log_grid applies to SQUARE and CONE only")
            if self.spacing is None or self.log_floor is None or not 0 < self.log_floor < self.T**2:
                raise ValueError("log_grid needs a log spacing and 0 < log_floor < T^2")

    @property
    def dim(self) -> int:
        return 1 if self.shape is Shape.INTERVAL else 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shape"] = self.shape.value
        return {k: v for k, v in d.items() if v is not None}

    @classmethod
    def from_dict(cls, d) -> "DomainSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown domain fields: {sorted(extra)}")
        return cls(**d)

    def replace(self, **kw) -> "DomainSpec":
        d = asdict(self)
        d.update(kw)
        return DomainSpec(**d)

    # -- lattices ----------------------------------------------------------

    def layout(self) -> Layout:
        lay = self._interval() if self.shape is Shape.INTERVAL else self._lattice2d()
        if lay.size == 0:
            raise ValueError(f"domain {self.to_dict()} has no grid points")
        return lay

    def points(self) -> np.ndarray:
        return self.layout().points

    def _interval(self) -> Layout:
        lo, hi = self.lo * self.T, self.hi * self.T
        h = self.spacing if self.spacing is not None else (hi - lo) / self.n_grid
        k0 = math.floor(lo / h + EPS) + 1
        k1 = math.floor(hi / h + EPS)
        ks = np.arange(k0, k1 + 1)
        ks = ks[ks != 0]  # the origin is the deterministic zero of the self-similar families
        pts = h * ks
        if self.exclude is not None:
            keep = ~region_mask(self.exclude, pts)
            ks, pts = ks[keep], pts[keep]
        return Layout(pts, h, ks=ks)

    def _axes(self):
        s = self.shape
        if self.log_grid:
            du = self.spacing
            top = math.log(self.T)
            bottom = math.log(self.log_floor / self.T)
            n = int(math.floor((top - bottom) / du + EPS)) + 1
            ax = np.exp(top - du * np.arange(n))[::-1]
            return ax, ax, float(du)
        if s in (Shape.SQUARE, Shape.CONE):
            h = self.spacing if self.spacing is not None else self.T / self.n_grid
            ax = h * np.arange(1, math.floor(self.T / h + EPS) + 1)
        elif s is Shape.TRIANGLE:
            h = self.spacing if self.spacing is not None else 2.0 * self.T / self.n_grid
            ax = h * np.arange(1, math.ceil(2.0 * self.T / h - EPS))
        else:  # BAND
            w = abs(math.log(self.a))
            top = self.d * self.T
            lo = self.c * self.T - w
            h = self.spacing if self.spacing is not None else (top - lo) / self.n_grid
            ax = h * np.arange(math.floor(lo / h + EPS) + 1, math.ceil(top / h - EPS))
        return ax, ax, float(h)

    def _inside(self, P):
        s1, s2 = P[:, 0], P[:, 1]
        s = self.shape
        if s is Shape.SQUARE:
            m = np.ones(P.shape[0], dtype=bool)
        elif s is Shape.CONE:
            r = s1 / s2
            m = (r >= self.a * (1 - EPS)) & (r <= (1 + EPS) / self.a)
        elif s is Shape.TRIANGLE:
            m = s1 + s2 < 2.0 * self.T - EPS
        else:
            w = abs(math.log(self.a))
            c, d = self.c * self.T, self.d * self.T
            m = (np.abs(s1 - s2) < w - EPS) & (s1 < d - EPS) & (s2 < d - EPS) & ((s1 >= c - EPS) | (s2 >= c - EPS))
        if self.log_grid:
            m &= s1 * s2 >= self.log_floor * (1 - EPS)
        return m

    def _lattice2d(self) -> Layout:
        ax_x, ax_y, step = self._axes()
        X, Y = np.meshgrid(ax_x, ax_y, indexing="ij")
        P = np.stack([X.ravel(), Y.ravel()], axis=1)
        keep = self._inside(P)
        if self.exclude is not None:
            keep &= ~region_mask(self.exclude, P)
        index = np.flatnonzero(keep)
        return Layout(P[index], step, axes=(ax_x, ax_y), index=index)
