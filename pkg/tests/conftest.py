import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


@pytest.fixture(scope="session")
def interval_spectrum():
    from fracbn.domain import CoefficientField, Interval, build_grid
    from fracbn.operator import assemble, decompose

    g = build_grid(Interval(), 201)
    return g, decompose(assemble(g, CoefficientField.constant([[1.0]])))


@pytest.fixture(scope="session")
def disc33():
    from fracbn.domain import CoefficientField, Disc, build_grid
    from fracbn.operator import assemble, decompose

    g = build_grid(Disc(), 33)
    f = CoefficientField.constant(np.eye(2))
    return g, f, decompose(assemble(g, f))


@pytest.fixture(scope="session")
def square17():
    from fracbn.domain import Box, CoefficientField, build_grid
    from fracbn.operator import assemble, decompose

    g = build_grid(Box(), 17)
    f = CoefficientField.constant(np.eye(2))
    return g, f, decompose(assemble(g, f))


_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        printed = [ln for ln in rep.capstdout.splitlines() if ln.startswith("criterion ")]
        detail = printed[-1].split(": ", 1)[1] if printed else mark.args[1]
        _ACCEPTANCE[mark.args[0]] = (detail, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title}")
