from __future__ import annotations

import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            name = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in name:
                outcomes[int(name.split("test_criterion_")[1].split("_")[0])] = status
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(outcomes):
        line = mod.RESULTS.get(n)
        if line is None:
            line = f"criterion {n} ({mod.TITLES[n]}): FAIL - raised before a verdict"
        terminalreporter.write_line(line)
