import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for the calling acceptance test."""
    notes = {}

    def note(**kv):
        notes.update(kv)

    yield note
    rep = getattr(request.node, "rep_call", None)
    status = "PASS" if rep is not None and rep.passed else "FAIL"
    detail = " ".join(f"{k}={v}" for k, v in notes.items())
    ACCEPTANCE_LINES.append(f"{status} {request.node.name} {detail}".rstrip())


@pytest.hookimpl(wrapper=True, tryfirst=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
