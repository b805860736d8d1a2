import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> (title, outcome, detail)
_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion carried by this test")


@pytest.fixture
def criterion_detail(request):
    """Call with a short string to attach measured values to the criterion line."""

    def record(text):
        request.node.user_properties.append(("criterion_detail", text))

    return record


def pytest_runtest_logreport(report):
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, title = marker
        detail = "; ".join(v for k, v in report.user_properties if k == "criterion_detail")
        entry = _CRITERIA.setdefault(number, [title, "PASS", []])
        if report.outcome != "passed":
            entry[1] = "FAIL"
        if detail:
            entry[2].append(detail)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result()._criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, details = _CRITERIA[number]
        extra = f" ({'; '.join(details)})" if details else ""
        terminalreporter.write_line(f"criterion {number} {status}: {title}{extra}")
