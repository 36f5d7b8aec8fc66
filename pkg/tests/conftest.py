import pytest

from qsmooth.config import ExperimentConfig
from qsmooth.engine import PropagationPlan, generate_observed_record


@pytest.fixture(scope="session")
def short_run():
    """A 300-step record on the default model (t_final = 0.3)."""
    cfg = ExperimentConfig(t_final=0.3, m_smooth=64, n_eval=64, seed=11)
    record, filtered = generate_observed_record(cfg.params, cfg.grid, cfg.seed)
    plan = PropagationPlan(record, cfg.params, filtered=filtered)
    return cfg, record, plan


@pytest.fixture(scope="session")
def jumpy_run():
    """Short record with a large ostensible rate so many trajectories jump."""
    cfg = ExperimentConfig(t_final=0.2, dt=1e-3, mu_ost=40.0, m_smooth=64, n_eval=64, seed=4)
    record, filtered = generate_observed_record(cfg.params, cfg.grid, cfg.seed)
    plan = PropagationPlan(record, cfg.params, filtered=filtered)
    return cfg, record, plan



# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def record_criterion(number, passed, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
