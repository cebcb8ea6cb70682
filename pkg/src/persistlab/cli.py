"""Command-line front end: ``persistlab {verify,persist,sample,fit,report}``.

Every run reads an optional YAML config, applies flag overrides (flags win),
and writes its outputs into a fresh run directory under the output root
(``--output-dir``, the config's ``output_dir``, ``$PERSISTLAB_OUTPUT_DIR``
or ``./persistlab-runs``, first one set).  Outputs are assembled in a
temporary directory and renamed into place, so a failed run leaves nothing
behind.  Each run directory holds ``run.json`` (manifest) and ``config.yaml``
(the resolved config, enough to rerun it bit-for-bit).

Exit codes: 0 pass, 1 assertion failure, 2 configuration error, 3 budget error.
"""
from __future__ import annotations

import argparse
import inspect
import json
import logging
import math
import os
import platform
import shutil
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import scipy
import yaml

from . import __version__, core
from .kernels import KernelSpec
from .persistence import (
    PRESETS,
    DomainSpec,
    InsufficientSurvivors,
    PsiModel,
    estimate_persistence,
    fit_exponent,
    fit_ladder,
    run_preset,
    sample_domain,
)
from .persistence.presets import preset_params
from .rng import GENERATOR_ID
from .samplers import BudgetError, empirical_cov_report
from .storage import dump_json, read_ladder_csv, save_csv, save_ensemble, sha256_json, write_ladder_csv
from .verify import TARGETS, run_suite

log = logging.getLogger("persistlab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3
FORMAT_VERSION = 1
OUTPUT_ENV = "PERSISTLAB_OUTPUT_DIR"
DEFAULT_OUTPUT = "persistlab-runs"
COMMANDS = ("verify", "persist", "sample", "fit", "report")
SAMPLE_BUDGET = 2**27  # float64 values held in memory by `sample` (1 GiB)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass
class Budgets:
    n_trials: int | None = None
    n_qmc: int | None = None
    workers: int = 1


@dataclass
class RunConfig:
    """Everything a run needs; serialised to YAML next to its outputs."""

    command: str
    format_version: int = FORMAT_VERSION
    target: str | None = None          # verify
    preset: str | None = None          # persist
    params: dict = field(default_factory=dict)
    kernel: dict | None = None         # persist (ad hoc), sample
    domain: dict | None = None
    ladder: list | None = None
    psi_model: str | None = None       # persist (ad hoc), fit
    level: float = 1.0
    method: str = "auto"
    export_format: str = "bin"         # sample: bin | csv | both
    check_cov: bool = False
    input: str | None = None           # fit: ladder.csv, report: run directory
    budgets: Budgets = field(default_factory=Budgets)
    seed: int = 0
    output_dir: str | None = None
    name: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None and v != {}}

    @classmethod
    def from_dict(cls, d) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        d = dict(d)
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        if "command" not in d:
            raise ConfigError("config needs a 'command'")
        b = d.pop("budgets", None) or {}
        if not isinstance(b, dict):
            raise ConfigError("budgets must be a mapping")
        bextra = set(b) - {f.name for f in fields(Budgets)}
        if bextra:
            raise ConfigError(f"unknown budget fields: {sorted(bextra)}")
        try:
            cfg = cls(budgets=Budgets(**b), **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from None
        return cls.from_dict(data or {})

    def validate(self):
        if self.format_version != FORMAT_VERSION:
            raise ConfigError(f"unsupported format_version {self.format_version}")
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        b = self.budgets
        for k in ("n_trials", "n_qmc"):
            v = getattr(b, k)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"budgets.{k} must be a positive integer")
        if not isinstance(b.workers, int) or b.workers < 1:
            raise ConfigError("budgets.workers must be a positive integer")
        if self.params and not isinstance(self.params, dict):
            raise ConfigError("params must be a mapping")
        if self.psi_model is not None and self.psi_model not in PsiModel.__members__:
            raise ConfigError(f"psi_model must be one of {list(PsiModel.__members__)}")
        if self.method not in ("auto", "exact", "cholesky"):
            raise ConfigError("method must be auto, exact or cholesky")
        if self.export_format not in ("bin", "csv", "both"):
            raise ConfigError("export_format must be bin, csv or both")
        if self.command == "verify" and self.target not in TARGETS:
            raise ConfigError(f"verify target must be one of {list(TARGETS)}")
        if self.command == "persist" and self.preset is None and (self.kernel is None or self.domain is None):
            raise ConfigError("persist needs a preset or a kernel and a domain")
        if self.command == "sample" and (self.kernel is None or self.domain is None):
            raise ConfigError("sample needs a kernel and a domain")
        if self.command in ("fit", "report") and not self.input:
            raise ConfigError(f"{self.command} needs an input path")

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir", None)
        d.pop("name", None)
        return sha256_json(d)


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="YAML run config; flags override its fields")
    p.add_argument("--output-dir", help=f"output root (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    p.add_argument("--name", help="run directory name (default: derived from command and config hash)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="threads; never changes any estimate")
    p.add_argument("-q", "--quiet", action="store_true")


def _domain_flags(p):
    p.add_argument("--kernel", help="fbm, fbs, ifbm, dual_fbm, dual_ifbm, dual_fbs, sech")
    p.add_argument("--H", type=float, nargs="+", help="Hurst index (presets accept a list)")
    p.add_argument("--scale", type=float, help="sech scale")
    p.add_argument("--shape", help="INTERVAL, SQUARE, CONE, TRIANGLE, BAND")
    p.add_argument("--T", type=float)
    p.add_argument("--n-grid", type=int)
    p.add_argument("--spacing", type=float)
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--exclude", help="unit, hyperbola or ball")
    p.add_argument("--method", choices=["auto", "exact", "cholesky"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="persistlab", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"persistlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("target", nargs="?", choices=TARGETS)
    p.add_argument("--n-trials", type=int)
    p.add_argument("--n-qmc", type=int)
    _common(p)

    p = sub.add_parser("persist", help="persistence ladder: preset or ad hoc")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--ladder", type=float, nargs="+", help="T values")
    p.add_argument("--level", type=float)
    p.add_argument("--psi-model", choices=list(PsiModel.__members__))
    p.add_argument("--n-trials", type=int)
    _domain_flags(p)
    _common(p)

    p = sub.add_parser("sample", help="export a path ensemble")
    p.add_argument("--n-trials", type=int)
    p.add_argument("--format", dest="export_format", choices=["bin", "csv", "both"])
    p.add_argument("--check-cov", action="store_true", default=None)
    _domain_flags(p)
    _common(p)

    p = sub.add_parser("fit", help="refit the exponent from a ladder.csv")
    p.add_argument("input", nargs="?", help="ladder.csv or a run directory containing one")
    p.add_argument("--psi-model", choices=list(PsiModel.__members__),
                   help="recompute psi from T (default: use the recorded psi column)")
    _common(p)

    p = sub.add_parser("report", help="summarise a run directory")
    p.add_argument("input", nargs="?", help="run directory (or its run.json)")
    p.add_argument("--json", action="store_true", help="print the manifest as JSON")
    _common(p)
    return ap


def _set(d, key, value):
    if value is not None:
        d[key] = value


def resolve_config(args) -> RunConfig:
    """Merge the config file (if any) with command-line flags."""
    base = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError("config must be a mapping")
        if base.get("command", args.command) != args.command:
            raise ConfigError(f"config is for {base['command']!r}, not {args.command!r}")
    d = dict(base)
    d["command"] = args.command
    d["budgets"] = dict(d.get("budgets") or {})
    a = vars(args)
    for key in ("target", "preset", "ladder", "level", "psi_model", "method", "export_format", "check_cov",
                "input", "seed", "output_dir", "name"):
        _set(d, key, a.get(key))
    _set(d["budgets"], "n_trials", a.get("n_trials"))
    _set(d["budgets"], "n_qmc", a.get("n_qmc"))
    _set(d["budgets"], "workers", a.get("workers"))
    _merge_domain_flags(d, a)
    return RunConfig.from_dict(d)


def _merge_domain_flags(d, a):
    H = a.get("H")
    if d.get("preset") is not None or (d["command"] == "persist" and a.get("preset")):
        if H is not None:
            d["params"] = dict(d.get("params") or {}, H=H[0] if len(H) == 1 else list(H))
        return
    if any(a.get(k) is not None for k in ("kernel", "H", "scale")):
        k = dict(d.get("kernel") or {})
        _set(k, "family", a.get("kernel"))
        if H is not None:
            if len(H) != 1:
                raise ConfigError("ad hoc runs take a single --H")
            k["H"] = H[0]
        _set(k, "scale", a.get("scale"))
        d["kernel"] = k
    keys = {"shape": "shape", "T": "T", "n_grid": "n_grid", "spacing": "spacing", "lo": "lo", "hi": "hi",
            "a": "a", "exclude": "exclude"}
    if any(a.get(k) is not None for k in keys):
        dom = dict(d.get("domain") or {})
        for src, dst in keys.items():
            _set(dom, dst, a.get(src))
        if "shape" in dom:
            dom["shape"] = str(dom["shape"]).upper()
        d["domain"] = dom


# ---------------------------------------------------------------------------
# run directories and manifests
# ---------------------------------------------------------------------------

def output_root(cfg: RunConfig) -> str:
    return cfg.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT


def versions() -> dict:
    return {"persistlab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "platform": platform.platform()}


class RunDir:
    """Temporary staging directory renamed onto ``<root>/<name>`` on commit."""

    def __init__(self, cfg: RunConfig, label: str):
        self.root = output_root(cfg)
        self.name = cfg.name or f"{label}-{cfg.hash()[:10]}"
        self.final = os.path.join(self.root, self.name)
        os.makedirs(self.root, exist_ok=True)
        self.path = tempfile.mkdtemp(prefix=f".{self.name}.", dir=self.root)
        self.files = []

    def file(self, name) -> str:
        self.files.append(name)
        return os.path.join(self.path, name)

    def commit(self):
        if os.path.isdir(self.final):
            shutil.rmtree(self.final)
        os.replace(self.path, self.final)

    def abort(self):
        shutil.rmtree(self.path, ignore_errors=True)


def write_manifest(rd: RunDir, cfg: RunConfig, argv, status, exit_code, elapsed, summary):
    with open(rd.file("config.yaml"), "w") as fh:
        fh.write(cfg.to_yaml())
    manifest = {
        "format_version": FORMAT_VERSION,
        "command": cfg.command,
        "argv": list(argv),
        "config": cfg.to_dict(),
        "config_sha256": cfg.hash(),
        "seed": cfg.seed,
        "versions": versions(),
        "backend": core.BACKEND,
        "generator_id": GENERATOR_ID,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "elapsed_s": round(elapsed, 3),
        "status": status,
        "exit_code": exit_code,
        "summary": summary,
    }
    rd.files.append("run.json")
    manifest["outputs"] = sorted(rd.files)
    dump_json(manifest, os.path.join(rd.path, "run.json"))


# ---------------------------------------------------------------------------
# commands: each returns (exit_code, status, summary) after writing into rd
# ---------------------------------------------------------------------------

def _say(quiet, msg):
    if not quiet:
        print(msg)


def cmd_verify(cfg: RunConfig, rd: RunDir, quiet=False):
    fn_params = inspect.signature(run_suite_target(cfg.target)).parameters
    kw = {}
    if "seed" in fn_params:
        kw["seed"] = cfg.seed
    if "n_trials" in fn_params and cfg.budgets.n_trials is not None:
        kw["n_trials"] = cfg.budgets.n_trials
    if "n_qmc" in fn_params and cfg.budgets.n_qmc is not None:
        kw["n_qmc"] = cfg.budgets.n_qmc
    rep = run_suite(cfg.target, **kw)
    dump_json(rep.to_dict(), rd.file("report.json"))
    for c in rep.checks:
        if not (quiet and c.passed):
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}")
    f = rep.first_failure
    summary = {"target": cfg.target, "passed": rep.passed, "n_checks": len(rep.checks),
               "first_failure": None if f is None else f.name}
    if f is not None:
        print(f"verify {cfg.target}: FAIL at {f.name}: {json.dumps(f.details, default=str)[:500]}")
        return EXIT_FAIL, "fail", summary
    _say(quiet, f"verify {cfg.target}: all {len(rep.checks)} checks passed ({rep.elapsed_s:.1f} s)")
    return EXIT_OK, "pass", summary


def run_suite_target(target):
    from .verify import SUITES
    return SUITES[target]


def _fmt(x):
    return "nan" if not math.isfinite(x) else f"{x:.4f}"


def _preset_params(cfg):
    params = dict(cfg.params)
    if cfg.ladder is not None:
        params["ladder"] = cfg.ladder
    if cfg.budgets.n_trials is not None:
        params["n_trials"] = cfg.budgets.n_trials
    return params


def _adhoc_parts(cfg):
    try:
        kernel = KernelSpec.from_dict(cfg.kernel)
        template = DomainSpec.from_dict(dict(cfg.domain, T=cfg.domain.get("T", 1.0)))
        T = [float(t) for t in (cfg.ladder or [template.T])]
        domains = [template.replace(T=t) for t in T]
        for d in domains:
            d.layout()
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    if kernel.dim != template.dim:
        raise ConfigError(f"{kernel.family.value} is {kernel.dim}-D but the domain is {template.dim}-D")
    if len(T) > 1 and any(b <= a for a, b in zip(T, T[1:])):
        raise ConfigError("ladder must be strictly increasing")
    return kernel, T, domains


def prepare(cfg: RunConfig):
    """Validate everything that can be checked before any sampling starts."""
    if cfg.command == "persist":
        if cfg.preset is not None:
            try:
                preset_params(cfg.preset, _preset_params(cfg))
            except (ValueError, TypeError) as exc:
                raise ConfigError(str(exc)) from None
        else:
            _adhoc_parts(cfg)
    elif cfg.command == "sample":
        kernel, _, domains = _adhoc_parts(cfg)
        if len(domains) != 1:
            raise ConfigError("sample takes a single domain (no ladder)")
    elif cfg.command in ("fit", "report") and not os.path.exists(cfg.input):
        raise ConfigError(f"no such path: {cfg.input}")


def cmd_persist(cfg: RunConfig, rd: RunDir, quiet=False):
    if cfg.preset is not None:
        rep = run_preset(cfg.preset, _preset_params(cfg), seed=cfg.seed, workers=cfg.budgets.workers)
        dump_json(rep.to_dict(), rd.file("report.json"))
        write_ladder_csv(list(rep.ladder_rows()), rd.file("ladder.csv"))
        fits = {}
        for s in rep.series:
            if s.fit is not None:
                fits[s.label] = s.fit.to_dict()
                _say(quiet, f"{s.label}: theta_hat = {_fmt(s.fit.theta_hat)} +- {_fmt(s.fit.stderr)} "
                                 f"({s.psi_model.value})")
        for p in rep.predicates:
            tag = "PASS" if p.passed else "FAIL"
            if not p.gated:
                tag = "info"
            _say(quiet, f"  [{tag}] {p.name}: {p.value!r} vs {p.threshold!r}  {p.detail}")
        for p in rep.failing():
            print(f"persist {cfg.preset}: FAIL {p.name}")
        summary = {"preset": cfg.preset, "passed": rep.passed, "fits": fits,
                   "failing": [p.name for p in rep.failing()]}
        return (EXIT_OK, "pass", summary) if rep.passed else (EXIT_FAIL, "fail", summary)

    kernel, T, domains = _adhoc_parts(cfg)
    n = cfg.budgets.n_trials or 10_000
    label = f"{kernel.family.value}_adhoc"
    ests = []
    for i, d in enumerate(domains):
        e = estimate_persistence(kernel, d, cfg.level, n, cfg.seed, tags=(i,), workers=cfg.budgets.workers,
                                 method=cfg.method)
        ests.append(e)
        _say(quiet, f"T={T[i]!r}: p_hat = {e.p_hat!r}  ({e.n_survive}/{e.n_trials})")
    psi = PsiModel(cfg.psi_model or ("LINEAR_T" if kernel.stationary else "LOG_T"))
    rows = []
    for t, e in zip(T, ests):
        lo, hi = e.ci95
        rows.append({"series": label, "T": t, "psi": float(psi(t)), "p_hat": e.p_hat, "ci_lo": lo,
                     "ci_hi": hi, "n_trials": e.n_trials, "n_survive": e.n_survive})
    write_ladder_csv(rows, rd.file("ladder.csv"))
    out = {"kernel": kernel.to_dict(), "estimates": [e.to_dict() for e in ests]}
    summary = {"n_points": len(T)}
    if len(T) >= 4:
        fit = fit_exponent(ests, psi)
        out["fit"] = summary["fit"] = fit.to_dict()
        _say(quiet, f"theta_hat = {_fmt(fit.theta_hat)} +- {_fmt(fit.stderr)} ({psi.value})")
    dump_json(out, rd.file("report.json"))
    return EXIT_OK, "pass", summary


def cmd_sample(cfg: RunConfig, rd: RunDir, quiet=False):
    kernel, _, (domain,) = _adhoc_parts(cfg)
    n = cfg.budgets.n_trials or 1000
    size = domain.layout().size
    if n * size > SAMPLE_BUDGET:
        raise BudgetError(f"{n} trials x {size} points exceeds the sample budget of {SAMPLE_BUDGET} values")
    method = cfg.method if cfg.method != "auto" else "exact"
    ens = sample_domain(kernel, domain, n, cfg.seed, workers=cfg.budgets.workers, method=method)
    if cfg.export_format in ("bin", "both"):
        save_ensemble(ens, os.path.join(rd.path, "ensemble"))
        rd.files += ["ensemble.bin", "ensemble.json"]
    if cfg.export_format in ("csv", "both"):
        save_csv(ens, rd.file("ensemble.csv"))
    summary = {"kernel": kernel.to_dict(), "n_trials": n, "n_points": size, "sampler": ens.meta["sampler"]}
    _say(quiet, f"sampled {n} x {size} ({ens.meta['sampler']}) into {rd.final}")
    if cfg.check_cov:
        rep = empirical_cov_report(ens)
        dump_json(rep.to_dict(), rd.file("cov_report.json"))
        summary["cov_report"] = rep.to_dict()
        print(f"covariance check: worst z = {rep.worst_z:.2f} (threshold {rep.threshold}) "
              f"{'PASS' if rep.passed else 'FAIL'}")
        if not rep.passed:
            return EXIT_FAIL, "fail", summary
    return EXIT_OK, "pass", summary


def _ladder_path(path):
    return os.path.join(path, "ladder.csv") if os.path.isdir(path) else path


def cmd_fit(cfg: RunConfig, rd: RunDir, quiet=False):
    try:
        rows = read_ladder_csv(_ladder_path(cfg.input))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read ladder: {exc}") from None
    series = {}
    for r in rows:
        series.setdefault(r["series"], []).append(r)
    fits = {}
    for label, rs in series.items():
        rs.sort(key=lambda r: r["T"])
        n = [r["n_trials"] for r in rs]
        p = [r["p_hat"] for r in rs]
        k = [r["n_survive"] for r in rs]
        if cfg.psi_model is not None:
            fit = fit_ladder([r["T"] for r in rs], p, n, cfg.psi_model, n_survive=k).to_dict()
            fit["psi_source"] = f"{cfg.psi_model}(T)"
        else:
            # linear fit in the recorded psi column
            fit = fit_ladder([r["psi"] for r in rs], p, n, PsiModel.LINEAR_T, n_survive=k).to_dict()
            fit["psi_source"] = "recorded psi column"
            fit["psi_model"] = None
            fit["psi"] = fit.pop("T_ladder")
        fits[label] = fit
        _say(quiet, f"{label}: theta_hat = {_fmt(fit['theta_hat'])} +- {_fmt(fit['stderr'])}")
    dump_json({"input": os.path.abspath(cfg.input), "fits": fits}, rd.file("fit.json"))
    return EXIT_OK, "pass", {"fits": fits}


def _load_manifest(path):
    path = os.path.join(path, "run.json") if os.path.isdir(path) else path
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read manifest: {exc}") from None


def format_report(m) -> str:
    lines = [f"run: {m['command']}  status: {m['status']}  exit: {m['exit_code']}",
             f"config sha256: {m['config_sha256']}",
             f"seed: {m['seed']}  backend: {m['backend']}  generator: {m['generator_id']}",
             "versions: " + ", ".join(f"{k} {v}" for k, v in m["versions"].items() if k != "platform"),
             f"elapsed: {m['elapsed_s']} s  outputs: {', '.join(m.get('outputs', []))}"]
    s = m.get("summary") or {}
    for label, fit in (s.get("fits") or {}).items():
        lines.append(f"  {label}: theta_hat = {_fmt(fit['theta_hat'])} +- {_fmt(fit['stderr'])}")
    if "fit" in s:
        lines.append(f"  theta_hat = {_fmt(s['fit']['theta_hat'])} +- {_fmt(s['fit']['stderr'])}")
    for k in ("target", "first_failure", "failing", "sampler"):
        if s.get(k):
            lines.append(f"  {k}: {s[k]}")
    return "\n".join(lines)


def cmd_report(cfg: RunConfig, args) -> int:
    m = _load_manifest(cfg.input)
    print(json.dumps(m, indent=2) if getattr(args, "json", False) else format_report(m))
    return EXIT_OK if m.get("exit_code") == 0 else EXIT_FAIL


RUNNERS = {"verify": cmd_verify, "persist": cmd_persist, "sample": cmd_sample, "fit": cmd_fit}


def _label(cfg):
    return {"verify": f"verify-{cfg.target}", "persist": f"persist-{cfg.preset or 'adhoc'}",
            "sample": "sample", "fit": "fit"}[cfg.command]


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage errors already
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = resolve_config(args)
        prepare(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.command == "report":
        try:
            return cmd_report(cfg, args)
        except ConfigError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    rd = RunDir(cfg, _label(cfg))
    t0 = time.perf_counter()
    try:
        code, status, summary = RUNNERS[cfg.command](cfg, rd, args.quiet)
        write_manifest(rd, cfg, argv, status, code, time.perf_counter() - t0, summary)
        rd.commit()
    except ConfigError as exc:
        rd.abort()
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetError, InsufficientSurvivors) as exc:
        rd.abort()
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except BaseException:
        rd.abort()
        raise
    if not args.quiet:
        print(f"run directory: {rd.final}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
