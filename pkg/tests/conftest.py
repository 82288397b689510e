import pytest

import acceptance_report


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    detail = "; ".join(v for k, v in report.user_properties if k == "detail")
    verdict = "PASS" if report.passed else "FAIL"
    line = f"criterion {number:>2} {verdict}  {title}" + (f"  [{detail}]" if detail else "")
    acceptance_report.LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if acceptance_report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance_report.LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
