import json
import os

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from persistlab.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_FAIL, EXIT_OK, ConfigError, RunConfig, main
from persistlab.storage import load_csv, load_ensemble, read_ladder_csv

ADHOC = ["persist", "--kernel", "dual_fbm", "--H", "0.3", "--shape", "INTERVAL", "--spacing", "0.1",
         "--ladder", "1", "2", "3", "4", "--n-trials", "2000", "--level", "0", "-q"]
SAMPLE = ["sample", "--kernel", "fbm", "--H", "0.7", "--shape", "INTERVAL", "--T", "2", "--n-grid", "12",
          "--n-trials", "500", "-q"]


def run_dirs(root):
    return sorted(p for p in os.listdir(root) if not p.startswith(".")) if os.path.isdir(root) else []


def manifest(root, name):
    with open(os.path.join(root, name, "run.json")) as fh:
        return json.load(fh)


def test_verify_writes_report_and_manifest(outdir):
    assert main(["verify", "lemma2", "-q", "--name", "v"]) == EXIT_OK
    m = manifest(outdir, "v")
    assert m["command"] == "verify" and m["status"] == "pass" and m["exit_code"] == 0
    for key in ("config_sha256", "seed", "versions", "backend", "generator_id", "argv"):
        assert key in m
    assert {"numpy", "scipy", "python", "persistlab"} <= set(m["versions"])
    rep = json.load(open(outdir / "v" / "report.json"))
    assert rep["passed"] and rep["first_failure"] is None
    assert sorted(m["outputs"]) == sorted(os.listdir(outdir / "v"))


def test_persist_adhoc_deterministic_and_worker_invariant(outdir):
    assert main(ADHOC + ["--name", "a"]) == EXIT_OK
    assert main(ADHOC + ["--name", "b", "--workers", "3"]) == EXIT_OK
    la, lb = (open(outdir / n / "ladder.csv").read() for n in "ab")
    assert la == lb
    rows = read_ladder_csv(outdir / "a" / "ladder.csv")
    rep = json.load(open(outdir / "a" / "report.json"))
    assert [r["p_hat"] for r in rows] == [e["p_hat"] for e in rep["estimates"]]
    assert rep["fit"]["psi_model"] == "LINEAR_T"


def test_rerun_from_saved_config_is_bit_identical(outdir):
    assert main(ADHOC + ["--name", "a"]) == EXIT_OK
    assert main(["persist", "--config", str(outdir / "a" / "config.yaml"), "--name", "b", "-q"]) == EXIT_OK
    assert open(outdir / "a" / "ladder.csv").read() == open(outdir / "b" / "ladder.csv").read()
    assert manifest(outdir, "a")["config_sha256"] == manifest(outdir, "b")["config_sha256"]


def test_persist_preset_and_fit_and_report(outdir, capsys):
    args = ["persist", "--preset", "fbs_triangle_dual", "--H", "0.5", "--n-trials", "20000", "--ladder", "1.5", "2", "2.5", "3", "--name", "t"]
    assert main(args) == EXIT_OK
    out = capsys.readouterr().out
    assert "theta_hat" in out
    rep = json.load(open(outdir / "t" / "report.json"))
    assert rep["params"]["H"] == 0.5 and rep["series"][0]["fit"]["psi_model"] == "LOG_T_SQ"
    assert main(["fit", str(outdir / "t"), "--name", "f", "-q"]) == EXIT_OK
    fit = json.load(open(outdir / "f" / "fit.json"))["fits"]
    (label, refit), = fit.items()
    assert refit["theta_hat"] == pytest.approx(rep["series"][0]["fit"]["theta_hat"], rel=1e-12)
    assert main(["report", str(outdir / "t")]) == EXIT_OK
    assert "theta_hat" in capsys.readouterr().out


def test_failing_predicate_exits_one(outdir, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"command": "persist", "preset": "sinai",
                                   "params": {"target": 0.9, "tol": 0.01, "ladder": [4, 8, 16, 32]},
                                   "budgets": {"n_trials": 2000}}))
    assert main(["persist", "--config", str(cfg), "--name", "s", "-q"]) == EXIT_FAIL
    m = manifest(outdir, "s")
    assert m["status"] == "fail" and "theta_vs_1/4" in m["summary"]["failing"]
    assert main(["report", str(outdir / "s")]) == EXIT_FAIL


@pytest.mark.parametrize("text", ["command: [persist\n", "command: persist\nbogus: 1\n",
                                  "command: persist\nformat_version: 99\npreset: sinai\n",
                                  "command: persist\npreset: sinai\nbudgets: {n_trials: -5}\n",
                                  "command: persist\npreset: nope\n", "command: sample\n",
                                  "- just\n- a list\n"])
def test_malformed_config_exit_two_no_outputs(outdir, tmp_path, text):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(text)
    cmd = "sample" if "sample" in text else "persist"
    assert main([cmd, "--config", str(cfg), "-q"]) == EXIT_CONFIG
    assert not os.path.exists(outdir) or os.listdir(outdir) == []


def test_bad_flags_exit_two(outdir):
    assert main(["persist", "--preset", "sinai", "--bogus"]) == EXIT_CONFIG
    assert main(["verify", "nothing"]) == EXIT_CONFIG
    assert main(["fit", "/no/such/ladder.csv"]) == EXIT_CONFIG
    assert main(SAMPLE[:3] + ["--shape", "SQUARE", "--T", "2"]) == EXIT_CONFIG  # 1-D kernel on a 2-D domain
    assert run_dirs(outdir) == []


def test_sample_roundtrip_bit_identical(outdir):
    assert main(SAMPLE + ["--format", "both", "--name", "s1"]) == EXIT_OK
    assert main(SAMPLE + ["--format", "bin", "--name", "s2"]) == EXIT_OK
    a = load_ensemble(outdir / "s1" / "ensemble")
    b = load_ensemble(outdir / "s2" / "ensemble.bin")
    assert a.values.tobytes() == b.values.tobytes()
    pts, vals = load_csv(outdir / "s1" / "ensemble.csv")
    assert vals.tobytes() == a.values.tobytes()
    assert (pts == a.grid.points).all()


def test_sample_check_cov_fbs(outdir):
    args = ["sample", "--kernel", "fbs", "--H", "0.5", "--shape", "SQUARE", "--T", "2", "--spacing", "0.5",
            "--n-trials", "4000", "--check-cov", "--name", "c", "-q"]
    assert main(args) == EXIT_OK
    cov = json.load(open(outdir / "c" / "cov_report.json"))
    assert cov["passed"] and manifest(outdir, "c")["summary"]["cov_report"]["worst_z"] <= 4


def test_budget_errors_exit_three(outdir):
    oversize = ["sample", "--kernel", "ifbm", "--H", "0.5", "--shape", "INTERVAL", "--n-grid", "9000",
                "--n-trials", "10", "-q"]
    assert main(oversize) == EXIT_BUDGET
    memory = SAMPLE[:-3] + ["--n-trials", str(2**27)]
    assert main(memory) == EXIT_BUDGET
    no_survivors = ["persist", "--kernel", "fbm", "--H", "0.5", "--shape", "INTERVAL", "--spacing", "0.5",
                    "--ladder", "100", "200", "400", "800", "--n-trials", "1000", "--level", "-2", "-q"]
    assert main(no_survivors) == EXIT_BUDGET
    assert run_dirs(outdir) == []


def test_output_dir_precedence(outdir, tmp_path):
    other = tmp_path / "other"
    assert main(SAMPLE + ["--name", "x", "--output-dir", str(other)]) == EXIT_OK
    assert (other / "x" / "run.json").exists() and run_dirs(outdir) == []
    assert main(SAMPLE + ["--name", "y"]) == EXIT_OK
    assert (outdir / "y" / "run.json").exists()


def test_flags_override_config(outdir, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"command": "sample", "seed": 1, "kernel": {"family": "sech"},
                                   "domain": {"shape": "INTERVAL", "T": 2.0, "n_grid": 8},
                                   "budgets": {"n_trials": 100}}))
    assert main(["sample", "--config", str(cfg), "--seed", "5", "--n-trials", "200", "--name", "o", "-q"]) == 0
    m = manifest(outdir, "o")
    assert m["seed"] == 5 and m["config"]["budgets"]["n_trials"] == 200 and m["summary"]["n_trials"] == 200
    cfg.write_text(yaml.safe_dump({"command": "persist", "preset": "sinai"}))
    assert main(["sample", "--config", str(cfg)]) == EXIT_CONFIG


# --- RunConfig -----------------------------------------------------------------------------

configs = st.builds(
    RunConfig,
    command=st.sampled_from(["verify", "persist"]),
    target=st.just("lemma2"),
    preset=st.sampled_from(["sinai", "sech_eta"]),
    params=st.dictionaries(st.sampled_from(["n_trials", "spacing"]), st.floats(0.01, 1e6), max_size=2),
    ladder=st.none() | st.lists(st.floats(0.5, 1e4), min_size=4, max_size=6),
    level=st.floats(-3, 3),
    seed=st.integers(0, 2**63),
)


@given(configs)
@settings(max_examples=100)
def test_runconfig_yaml_roundtrip(cfg):
    back = RunConfig.from_yaml(cfg.to_yaml())
    assert back == cfg
    assert back.hash() == cfg.hash()


def test_runconfig_rejects_unknown():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "verify", "target": "lemma2", "extra": 1})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "verify", "target": "lemma2", "budgets": {"cpus": 4}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "launch"})
