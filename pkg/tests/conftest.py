import numpy as np
import pytest

from nsqstab.blocks import BlockStructure, PlantMatrix


@pytest.fixture
def rng():
    """Fixed generator so failures replay."""
    return np.random.default_rng(20241016)


@pytest.fixture
def worked_plant():
    # 2x3 plant with groups (2, 1)
    return PlantMatrix(BlockStructure((2, 1)), np.array([[1., 2., 3.], [4., 5., 6.]]))


_criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    line = f"{'PASS' if rep.passed else 'FAIL'}  {mark.args[0]}  ({rep.duration:.1f}s)"
    _criteria.append(line)


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in _criteria:
            terminalreporter.write_line(line)
