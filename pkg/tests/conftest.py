import sys
from collections import defaultdict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "equation unit suite",
    2: "flatness distance transform oracle",
    3: "steepness geometry on ramps",
    4: "footprint filtering on a ledge",
    5: "oracle precision and recall floor",
    6: "clustering equivalence and dedup invariant",
    7: "trajectory correctness",
    8: "planner sanity",
    9: "performance envelope",
    10: "determinism",
}

_outcomes: dict[int, list[str]] = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[marker.args[0]].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, name in CRITERIA.items():
        results = _outcomes.get(n)
        if not results:
            tr.write_line(f"criterion {n:2d} ({name}): NOT RUN")
            continue
        ok = all(r == "passed" for r in results)
        tr.write_line(f"criterion {n:2d} ({name}): {'PASS' if ok else 'FAIL'} "
                      f"({results.count('passed')}/{len(results)} checks)")
