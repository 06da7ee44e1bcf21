from contextlib import contextmanager

import pytest

_RESULTS = pytest.StashKey[dict]()


class _Line:
    def __init__(self, title):
        self.title = title
        self.status = "PASS"
        self.detail = ""


@pytest.fixture
def criterion(request):
    """Context manager recording one PASS/FAIL/WARN line per acceptance criterion."""
    results = request.config.stash.setdefault(_RESULTS, {})

    @contextmanager
    def record(number, title):
        line = _Line(title)
        results[number] = line
        try:
            yield line
        except BaseException as exc:
            line.status = "FAIL"
            msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
            line.detail = f"{line.detail}; {msg}" if line.detail else msg
            raise

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        line = results[number]
        detail = f"  ({line.detail})" if line.detail else ""
        terminalreporter.write_line(f"[{line.status}] criterion {number:2d}: {line.title}{detail}")
