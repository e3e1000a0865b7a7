"""Prints one line per acceptance criterion at the end of the run."""

import pytest

_LABELS: dict[str, str] = {}
_OUTCOMES: dict[str, tuple[str, str]] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _LABELS[item.nodeid] = f"{mark.args[0]:>2}. {mark.args[1]}"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, label): acceptance criterion number and title")


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_logreport(report):
    if report.nodeid not in _LABELS:
        return
    if report.when == "call" or report.outcome != "passed":
        detail = "; ".join(str(v) for k, v in report.user_properties if k == "measured")
        _OUTCOMES.setdefault(report.nodeid, (report.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _LABELS:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, label in sorted(_LABELS.items(), key=lambda kv: int(kv[1].split(".")[0])):
        outcome, detail = _OUTCOMES.get(nodeid, ("not run", ""))
        word = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"{word}  {label}" + (f"  [{detail}]" if detail else ""))
