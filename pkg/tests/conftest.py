import pytest

_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record a PASS/FAIL/SKIP line for an acceptance criterion, then assert it."""
    store = request.config.stash.setdefault(_VERDICTS, {})

    def record(number, ok, detail=""):
        store[number] = (ok, detail)
        label = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        print(f"criterion {number:2d}: {label}  {detail}")
        if ok is None:
            pytest.skip(detail)
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_VERDICTS, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 12):
        ok, detail = store.get(number, (False, "no verdict recorded (test errored or was deselected)"))
        label = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        terminalreporter.write_line(f"criterion {number:2d}: {label}  {detail}")
