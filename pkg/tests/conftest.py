import numpy as np
import pytest

from evoset import embedding, evolving_set
from evoset.graphs import e2, e3

# acceptance lines collected by test_acceptance.py, printed at the end of the run
ACCEPTANCE: dict = {}

# worst |E[pi^(t+1)(S_{t+1})] - pi^(t)(S_t)| over every successor law built during the run
LAW_AUDIT = {"count": 0, "worst": 0.0, "exact_violations": 0}

_original_successor_law = evolving_set.successor_law


def _audited_successor_law(env, state):
    law = _original_successor_law(env, state)
    err = abs(law.expected_mass(env) - state.mass)
    LAW_AUDIT["count"] += 1
    if env.exact:
        LAW_AUDIT["exact_violations"] += err != 0
    else:
        LAW_AUDIT["worst"] = max(LAW_AUDIT["worst"], float(err))
    return law


evolving_set.successor_law = _audited_successor_law
embedding.successor_law = _audited_successor_law


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def env_e2():
    return e2()


@pytest.fixture
def env_e3():
    return e3()


@pytest.fixture
def acceptance():
    def record(number, title, passed, detail=""):
        ACCEPTANCE[number] = (title, bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
