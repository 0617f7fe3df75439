import os
import shutil

import pytest

from vcforge.smt import SolverConfig


@pytest.fixture
def z3_config():
    cmd = os.environ.get("VCFORGE_SOLVER")
    if cmd is None and shutil.which("z3"):
        cmd = "z3 -smt2 {file}"
    if not cmd or cmd.strip().lower() == "none":
        pytest.skip("no SMT solver configured")
    return SolverConfig(cmd, timeout=20)


@pytest.fixture(autouse=True)
def _no_ambient_solver(monkeypatch, tmp_path):
    """CLI tests must not pick up a solver or config from the environment."""
    monkeypatch.delenv("VCFORGE_SOLVER", raising=False)
    yield



def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion that ran."""
    import sys

    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
