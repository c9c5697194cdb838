import time
from contextlib import contextmanager

import pytest

_CRITERIA = {}


@contextmanager
def criterion(number, title, limit_s=None):
    """Record PASS/FAIL (plus runtime) for one acceptance criterion."""
    details = []
    start = time.perf_counter()
    status = "FAIL"
    try:
        yield details
        elapsed = time.perf_counter() - start
        if limit_s is not None:
            details.append(f"runtime {elapsed:.1f}s (limit {limit_s}s)")
            assert elapsed < limit_s, f"runtime {elapsed:.1f}s exceeds {limit_s}s"
        status = "PASS"
    finally:
        elapsed = time.perf_counter() - start
        line = f"criterion {number:>2} {status}  {title}  [{elapsed:.1f}s]"
        if details:
            line += "  " + "; ".join(details)
        _CRITERIA[number] = line
        print(line)


@pytest.fixture
def acceptance():
    return criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[k])
