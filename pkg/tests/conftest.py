import time
import logging

import pytest

from oracles import Q_VALUES


@pytest.fixture(autouse=True)
def _quiet_truncation(caplog):
    caplog.set_level(logging.ERROR, logger="tsavg")


@pytest.fixture(params=Q_VALUES, ids=lambda q: f"q{q}")
def q(request):
    return request.param


_SESSION_START = time.perf_counter()
SUITE_BUDGET = 30.0


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    import test_acceptance

    lines = list(test_acceptance.LINES)
    if not lines:
        return
    elapsed = time.perf_counter() - _SESSION_START
    ok = elapsed < SUITE_BUDGET
    lines.append(f"{'PASS' if ok else 'FAIL'} criterion 6: full suite runtime {elapsed:.1f}s "
                 f"(budget {SUITE_BUDGET:.0f}s)")
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
    if not ok:
        terminalreporter._session.exitstatus = 1
