import pytest

RESULTS = pytest.StashKey[dict]()
CRITERIA = 10


def pytest_configure(config):
    config.stash[RESULTS] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome, then assert it."""
    results = request.config.stash[RESULTS]

    def record(number, title, ok, detail=""):
        results[number] = (title, bool(ok), detail)
        assert ok, f"criterion {number} ({title}) failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash[RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, CRITERIA + 1):
        if number not in results:
            terminalreporter.write_line(f"FAIL {number:2d}. no result recorded (not run or crashed)")
            continue
        title, ok, detail = results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {number:2d}. {title}: {detail}")
