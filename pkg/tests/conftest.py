from collections import OrderedDict

import pytest

_CRITERIA = OrderedDict()


@pytest.fixture
def criterion():
    """Record an acceptance result: ``criterion(number, part, passed, detail)``."""

    def record(number, part, passed, detail):
        _CRITERIA.setdefault(number, []).append((part, bool(passed), detail))
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        parts = _CRITERIA[number]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{part} {'ok' if ok else 'FAILED'}: {d}" for part, ok, d in parts)
        terminalreporter.write_line(f"criterion {number}: {status}  [{detail}]")
