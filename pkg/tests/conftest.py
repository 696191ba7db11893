"""Collects acceptance results and prints one PASS/FAIL line per criterion."""

from __future__ import annotations

_results: dict[int, dict] = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    entry = _results.setdefault(number, {"title": title, "outcomes": []})
    if call.excinfo is None:
        entry["outcomes"].append("pass")
    elif item.get_closest_marker("xfail") is not None:
        entry["outcomes"].append("xfail")
    else:
        entry["outcomes"].append("fail")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        entry = _results[number]
        outcomes = entry["outcomes"]
        if "fail" in outcomes or "xfail" in outcomes:
            status = "FAIL"
        else:
            status = "PASS"
        extra = " (expected failure, recorded in the decisions ledger)" if "xfail" in outcomes and "fail" not in outcomes else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']}{extra}")
