"""Collects acceptance outcomes and prints one verdict line per criterion."""

_verdicts = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        label = dict(report.user_properties).get("criterion")
        if label is None:
            label = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("measured", "")
        _verdicts[report.nodeid] = (label, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict, detail in _verdicts.values():
        terminalreporter.write_line(f"{verdict}  {label}" + (f"  [{detail}]" if detail else ""))
