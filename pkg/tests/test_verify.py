import pytest

from persistlab.verify import SUITES, TARGETS, run_suite


def test_targets_registered():
    assert set(TARGETS) == set(SUITES)
    with pytest.raises(ValueError):
        run_suite("everything")


@pytest.mark.parametrize("target,kw", [("lemma2", {}), ("prop1", {"n_qmc": 2**12}),
                                       ("samplers", {"n_trials": 5000}), ("events", {"n_trials": 2000}),
                                       ("kernels", {})])
def test_suites_pass(target, kw):
    rep = run_suite(target, **kw)
    assert rep.passed, rep.first_failure
    d = rep.to_dict()
    assert d["first_failure"] is None and d["n_checks"] == len(rep.checks) > 0


def test_report_records_first_failure():
    from persistlab.verify import SuiteReport

    rep = SuiteReport("x")
    rep.add("ok", True)
    rep.add("bad", False, value=3, passed="shadowed")
    rep.add("bad2", False)
    assert not rep.passed and rep.first_failure.name == "bad"
    assert rep.to_dict()["first_failure"] == "bad"
