import pytest


@pytest.fixture
def acceptance(request):
    """Record one acceptance criterion outcome and fail the test if it does not hold."""
    log = request.config.stash.setdefault(_LOG, [])

    def record(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        log.append(line)
        print(line)
        assert ok, line

    return record


_LOG = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_LOG, [])
    if log:
        terminalreporter.section("acceptance criteria")
        for line in log:
            terminalreporter.write_line(line)
