"""Per-criterion summary for the acceptance suite.

Every test named ``test_criterion_*`` contributes one line to a terminal
section printed after the run, PASS or FAIL, with the measured values the
test recorded in ``test_acceptance.DETAILS``. Outcomes come from pytest's
own reports, so a criterion that crashes before its bookkeeping still gets
its line.
"""
import sys

_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call":
        _outcomes[name] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and not report.passed:
        _outcomes[name] = "FAIL"


def _label(name: str) -> str:
    parts = name.removeprefix("test_criterion_").split("_")
    return f"criterion {parts[0]} ({' '.join(parts[1:])})"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _outcomes:
        return
    module = sys.modules.get("test_acceptance")
    details = getattr(module, "DETAILS", {}) if module else {}
    terminalreporter.section("acceptance criteria")
    for name, outcome in _outcomes.items():
        line = f"{_label(name)}: {outcome}"
        if name in details:
            line += f" [{details[name]}]"
        terminalreporter.write_line(line)
