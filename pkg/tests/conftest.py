import pytest

from obslearn.sim import SimConfig, simulate_experiment


@pytest.fixture(scope="session")
def default_panel():
    """Full default experiment (151 subjects plus a 94-subject pool)."""
    return simulate_experiment(SimConfig(master_seed=11))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
