"""Shared pytest hooks: after a run that touched the acceptance suite, print
one PASS/FAIL line per shipped guarantee in the terminal summary."""

import re

CRITERIA = {
    1: "power invariants",
    2: "round-trip and shape suite",
    3: "structural equivalences",
    4: "gradient checks",
    5: "rate-baseline oracles",
    6: "diagnostic estimators",
    7: "toy-scale training trends",
    8: "fading consistency",
    9: "digital-baseline harness",
}

_NODE = re.compile(r"test_acceptance\.py::.*test_c(\d+)_")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[int, set[str]] = {}
    for category in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(category, []):
            match = _NODE.search(getattr(report, "nodeid", ""))
            if match:
                outcomes.setdefault(int(match.group(1)), set()).add(category)
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for n in sorted(CRITERIA):
        if n not in outcomes:
            continue
        got = outcomes[n]
        if {"failed", "error"} & got:
            verdict = "FAIL"
        elif "passed" in got:
            verdict = "PASS" + (" (partially skipped)" if "skipped" in got else "")
        else:
            verdict = "SKIP"
        terminalreporter.write_line(f"criterion {n} ({CRITERIA[n]}): {verdict}")
