import time
from contextlib import contextmanager

import pytest

SUITE_LIMIT_SECONDS = 120
_results: dict[int, tuple[str, bool, str]] = {}
_started = time.perf_counter()


@contextmanager
def _criterion(number: int, title: str, limit: float):
    note = {"detail": ""}
    t0 = time.perf_counter()
    try:
        yield note
    except BaseException as exc:
        _results[number] = (title, False, f"{type(exc).__name__}: {exc}".splitlines()[0])
        raise
    elapsed = time.perf_counter() - t0
    ok = elapsed < limit
    detail = f"{note['detail']}; {elapsed:.2f}s (limit {limit:g}s)".lstrip("; ")
    _results[number] = (title, ok, detail)
    assert ok, f"criterion {number} took {elapsed:.2f}s, limit {limit}s"


@pytest.fixture
def criterion():
    """Context manager that times a criterion and records its outcome."""
    return _criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    total = time.perf_counter() - _started
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_results):
        title, ok, detail = _results[number]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
    suite_ok = total < SUITE_LIMIT_SECONDS
    tr.write_line(
        f"[{'PASS' if suite_ok else 'FAIL'}] 10b. whole suite runtime: {total:.1f}s (limit {SUITE_LIMIT_SECONDS}s)"
    )


@pytest.hookimpl(trylast=True)
def pytest_sessionfinish(session, exitstatus):
    if time.perf_counter() - _started >= SUITE_LIMIT_SECONDS and _results:
        session.exitstatus = 1
