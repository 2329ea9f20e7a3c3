"""Shared pytest hooks.

The acceptance tests print one "[acceptance N] title: PASS/FAIL" line each,
but stdout capture hides those on passing runs. This summary hook repeats
the verdicts after the run so they are visible regardless of capture mode.
"""

import re

_ACCEPTANCE = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            match = _ACCEPTANCE.search(getattr(report, "nodeid", ""))
            if match is None:
                continue
            number = int(match.group(1))
            title = match.group(2).replace("_", " ")
            # sticky failure: any non-passed phase report fails the criterion
            still_ok = verdicts.get(number, ("", True))[1]
            verdicts[number] = (title, outcome == "passed" and still_ok)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        title, passed = verdicts[number]
        terminalreporter.write_line(
            f"[acceptance {number}] {title}: {'PASS' if passed else 'FAIL'}")
