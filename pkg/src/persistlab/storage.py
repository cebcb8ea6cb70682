"""On-disk formats: binary ensembles with JSON sidecars, CSV exports, JSON helpers."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os

import numpy as np

from .kernels import KernelSpec
from .samplers import PathEnsemble, grid_from_dict

ENSEMBLE_FORMAT = "persistlab-ensemble"
ENSEMBLE_VERSION = 1
CSV_MAX_POINTS = 4096


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    return obj


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(clean(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")


def save_ensemble(ens: PathEnsemble, prefix) -> tuple[str, str]:
    """Write ``prefix.bin`` (float64 little-endian, column-major) and ``prefix.json``."""
    bin_path, json_path = f"{prefix}.bin", f"{prefix}.json"
    data = np.asfortranarray(ens.values, dtype="<f8")
    raw = data.tobytes(order="F")
    with open(bin_path, "wb") as fh:
        fh.write(raw)
    side = {
        "format": ENSEMBLE_FORMAT,
        "version": ENSEMBLE_VERSION,
        "dtype": "<f8",
        "order": "F",
        "n_trials": ens.n_trials,
        "n_points": ens.grid.size,
        "sha256": hashlib.sha256(raw).hexdigest(),
        "kernel": ens.kernel.to_dict(),
        "grid": ens.grid.to_dict(),
        "seed": int(ens.seed),
        "generator_id": ens.generator_id,
        "meta": ens.meta,
    }
    dump_json(side, json_path)
    return bin_path, json_path


def load_ensemble(prefix) -> PathEnsemble:
    prefix = str(prefix)
    for ext in (".json", ".bin"):
        if prefix.endswith(ext):
            prefix = prefix[: -len(ext)]
    with open(f"{prefix}.json") as fh:
        side = json.load(fh)
    if side.get("format") != ENSEMBLE_FORMAT or side.get("version") != ENSEMBLE_VERSION:
        raise ValueError("not a persistlab ensemble sidecar (or unsupported version)")
    with open(f"{prefix}.bin", "rb") as fh:
        raw = fh.read()
    if hashlib.sha256(raw).hexdigest() != side["sha256"]:
        raise ValueError("ensemble checksum mismatch")
    shape = (side["n_trials"], side["n_points"])
    values = np.frombuffer(raw, dtype=side["dtype"]).reshape(shape, order="F").astype(np.float64)
    return PathEnsemble(KernelSpec.from_dict(side["kernel"]), grid_from_dict(side["grid"]), values,
                        side["seed"], side["generator_id"], side.get("meta", {}))


def _label(p):
    p = np.atleast_1d(p)
    return ";".join(repr(float(v)) for v in p)


def save_csv(ens: PathEnsemble, path):
    """One row per trial; the header carries the grid coordinates (``s1;s2`` for sheets)."""
    if ens.grid.size > CSV_MAX_POINTS:
        raise ValueError(f"CSV export is for small grids (<= {CSV_MAX_POINTS} points)")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial"] + [_label(p) for p in ens.grid.points])
        for i, row in enumerate(ens.values):
            w.writerow([i] + [repr(float(v)) for v in row])
    return path


def load_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (points, values) from :func:`save_csv` output."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    pts = np.array([[float(v) for v in h.split(";")] for h in rows[0][1:]])
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return (pts[:, 0] if pts.shape[1] == 1 else pts), vals


LADDER_FIELDS = ["series", "T", "psi", "p_hat", "ci_lo", "ci_hi", "n_trials", "n_survive"]


def write_ladder_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=LADDER_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def read_ladder_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        out = []
        for r in csv.DictReader(fh):
            missing = set(LADDER_FIELDS) - set(r)
            if missing:
                raise ValueError(f"ladder CSV missing columns {sorted(missing)}")
            out.append({"series": r["series"], "T": float(r["T"]), "psi": float(r["psi"]),
                        "p_hat": float(r["p_hat"]), "ci_lo": float(r["ci_lo"]), "ci_hi": float(r["ci_hi"]),
                        "n_trials": int(r["n_trials"]), "n_survive": int(r["n_survive"])})
    return out


def sha256_json(obj) -> str:
    return hashlib.sha256(json.dumps(clean(obj), sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
