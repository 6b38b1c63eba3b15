import pytest

from pktaccel import _backend

BACKENDS = ["python"] + (["compiled"] if _backend.COMPILED else [])

_verdicts = {}


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    n, title = m.args
    failed = rep.failed or (rep.when == "call" and rep.skipped)
    prev = _verdicts.get(n, (title, "PASS"))[1]
    if rep.when == "call" or failed:
        _verdicts[n] = (title, "FAIL" if failed or prev == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_verdicts):
        title, v = _verdicts[n]
        terminalreporter.write_line(f"CRITERION {n:2d} {v}  {title}")
