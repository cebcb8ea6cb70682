import pytest

# criterion number -> (passed, one-line summary); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {line}")


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    d = tmp_path / "runs"
    monkeypatch.setenv("PERSISTLAB_OUTPUT_DIR", str(d))
    return d
