import pytest

from qmarket.scenarios import Numerics, calibrate_lambda, run_grid

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one summary line per acceptance criterion."""

    def record(criterion, ok, detail=""):
        _ACCEPTANCE.append((criterion, bool(ok), detail))
        return ok

    return record


@pytest.fixture(scope="session")
def calibrated_lambda():
    return calibrate_lambda(4.0, "Ia/P1")


@pytest.fixture(scope="session")
def calibrated_grid(calibrated_lambda):
    rows, trajs = run_grid(numerics=Numerics(lam=calibrated_lambda), keep=True)
    return {(r.scenario, r.schedule): (r, t) for r, t in zip(rows, trajs)}


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(_ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {criterion}  {detail}")
