import os

import pytest

# keep BLAS single-threaded so timings and results are stable on small boxes
os.environ.setdefault("OMP_NUM_THREADS", "1")

_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, passed, detail)`` for the end-of-run summary."""

    def record(criterion, passed, detail=""):
        _ACCEPTANCE.setdefault(str(criterion), []).append((bool(passed), detail))
        line = f"[acceptance {criterion}] {'PASS' if passed else 'FAIL'} {detail}"
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")

    def order(key):
        head = "".join(ch for ch in key if ch.isdigit())
        return (int(head) if head else 0, key)

    for crit in sorted(_ACCEPTANCE, key=order):
        parts = _ACCEPTANCE[crit]
        ok = all(p for p, _ in parts)
        detail = "; ".join(d for _, d in parts if d)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")
