import numpy as np
import pytest

from expofront.core import QueryInstance, dcg_exposure


def make_toy2(policy="size-proportional"):
    return QueryInstance.create([1.0, 0.2], [0, 1], [1.0, 0.5], policy, query_id="toy2")


def make_toy3(policy="size-proportional"):
    return QueryInstance.create([0.9, 0.6, 0.1], [0, 0, 1], dcg_exposure(3), policy,
                                query_id="toy3")


def random_instance(rng, n, policy="size-proportional", query_id="r"):
    """Random instance with ``2 <= g <= n - 1`` non-empty groups."""
    g = int(rng.integers(2, n))
    groups = np.concatenate([np.arange(g), rng.integers(0, g, n - g)])
    rng.shuffle(groups)
    return QueryInstance.create(rng.random(n), groups, dcg_exposure(n), policy, query_id=query_id)


@pytest.fixture
def toy2():
    return make_toy2()


@pytest.fixture
def toy3():
    return make_toy3()


# -- acceptance report -----------------------------------------------------------------

CRITERIA_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line; returns ``check(number, ok, detail)``."""
    def check(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        CRITERIA_LINES.append(line)
        print(line)
        return ok
    return check


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
