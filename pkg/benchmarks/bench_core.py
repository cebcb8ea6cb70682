"""Time the compiled hot loops against the numpy fallback.

    python benchmarks/bench_core.py [--repeat 5] [--json out.json]

Each kernel runs on the same inputs under both backends; results are
checked for agreement before timing.
"""
import argparse
import json
import timeit

import numpy as np

from persistlab import _core_py

try:
    from persistlab import _core
except ImportError:  # pragma: no cover
    _core = None


def cases(rng):
    paths = rng.standard_normal((2048, 1024)).cumsum(axis=1) * 0.03
    inside = np.zeros(1024, dtype=bool)
    inside[:128] = True
    A = rng.standard_normal((16, 16))
    L = np.linalg.cholesky(A @ A.T + 16 * np.eye(16))
    b = rng.uniform(0.0, 2.0, 16)
    w = rng.uniform(size=(2**14, 15))
    return {
        "first_exceed 2048x1024": lambda m: m.first_exceed(paths, 1.0),
        "cumtrapz 2048x1024": lambda m: m.cumtrapz(paths, 0.01),
        "trapz_first_exceed 2048x1024": lambda m: m.trapz_first_exceed(paths, 0.01, 0.5),
        "event_flags 2048x1024": lambda m: m.event_flags(paths, inside, 1.0),
        "genz_sov d=16 n=16384": lambda m: m.genz_sov(L, b, w),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write timings to this file")
    args = ap.parse_args()
    if _core is None:
        print("compiled extension not built; only the numpy backend is available")
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':32s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(_core_py), number=1, repeat=args.repeat)) * 1e3
        row = {"kernel": name, "numpy_ms": t_py}
        if _core is not None:
            a, b = np.asarray(fn(_core)), np.asarray(fn(_core_py))
            if not np.allclose(a, b, rtol=1e-12, atol=1e-12):
                raise SystemExit(f"backends disagree on {name}")
            t_cy = min(timeit.repeat(lambda: fn(_core), number=1, repeat=args.repeat)) * 1e3
            row.update(cython_ms=t_cy, speedup=t_py / t_cy)
            print(f"{name:32s} {t_py:10.2f} {t_cy:10.2f} {t_py / t_cy:7.1f}x")
        else:
            print(f"{name:32s} {t_py:10.2f} {'-':>10s} {'-':>8s}")
        rows.append(row)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
