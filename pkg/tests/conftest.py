import pytest

from nbbfrac.core import builtin_descriptor


@pytest.fixture(scope="session")
def triangle():
    return builtin_descriptor("sierpinski-triangle")


@pytest.fixture(scope="session")
def carpet():
    return builtin_descriptor("sierpinski-carpet")


@pytest.fixture(scope="session")
def vicsek():
    return builtin_descriptor("vicsek")


_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for key, value in report.user_properties:
        if key == "acceptance":
            number, title = value
            _acceptance[number] = (title, report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance, key=int):
        title, outcome, duration = _acceptance[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{verdict}] {number}. {title} ({duration:.1f}s)")


@pytest.fixture(autouse=True)
def _record_acceptance(request):
    marker = request.node.get_closest_marker("acceptance")
    if marker is not None:
        request.node.user_properties.append(("acceptance", tuple(marker.args)))
