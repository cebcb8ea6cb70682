"""Backend selection for the hot loops.

The compiled extension is used when importable; set ``PERSISTLAB_PURE=1``
to force the numpy fallback.  ``BACKEND`` names the active one.
"""
import os

import numpy as np

from . import _core_py

_impl = _core_py
if os.environ.get("PERSISTLAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _core_py

BACKEND = _impl.BACKEND


def _rows(a):
    return np.ascontiguousarray(np.atleast_2d(a), dtype=np.float64)


def first_exceed(values, level):
    return _impl.first_exceed(_rows(values), float(level))


def cumtrapz(paths, dt):
    return _impl.cumtrapz(_rows(paths), float(dt))


def trapz_first_exceed(paths, dt, level):
    return _impl.trapz_first_exceed(_rows(paths), float(dt), float(level))


def event_flags(values, inside, level):
    inside = np.ascontiguousarray(inside, dtype=np.uint8)
    return _impl.event_flags(_rows(values), inside, float(level))


def genz_sov(chol, b, w):
    return _impl.genz_sov(
        _rows(chol),
        np.ascontiguousarray(b, dtype=np.float64),
        _rows(w),
    )


def all_below(values, level):
    """Boolean survival flag per row: every value strictly below ``level``."""
    values = _rows(values)
    return first_exceed(values, level) == values.shape[1]
