import re
from collections import OrderedDict

import pytest

from kpplattice import media

CRITERIA = OrderedDict([
    (1, "dispersion calculus"),
    (2, "logistic oracle"),
    (3, "comparison principle"),
    (4, "envelope residuals"),
    (5, "front construction"),
    (6, "front speed"),
    (7, "spreading speed"),
    (8, "stability"),
    (9, "truncation robustness"),
])

_outcomes: dict = {}
_pattern = re.compile(r"test_acceptance\.py::test_criterion_(\d+)(\w*)")


def pytest_runtest_logreport(report):
    m = _pattern.search(report.nodeid)
    if not m:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        n = int(m.group(1))
        part = m.group(2).lstrip("_") or "main"
        _outcomes.setdefault(n, []).append((part, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        parts = _outcomes.get(n)
        if not parts:
            tr.write_line(f"criterion {n} ({title}): NOT RUN")
            continue
        failed = [p for p, o in parts if o != "passed"]
        status = "PASS" if not failed else "FAIL"
        extra = f"  [failing: {', '.join(failed)}]" if failed else ""
        tr.write_line(f"criterion {n} ({title}): {status}{extra}")


@pytest.fixture(scope="session")
def periodic_path():
    """a(t) = 1 + 0.5 sin t on [-100, 120]."""
    return media.build_media(media.sinusoid(horizon=(-100.0, 120.0)))


@pytest.fixture(scope="session")
def constant_path():
    return media.build_media(media.constant(1.0, horizon=(-100.0, 120.0)))


@pytest.fixture(scope="session")
def telegraph_path():
    return media.build_media(media.telegraph(0.5, 1.5, seed=42, horizon=(-100.0, 120.0)))


@pytest.fixture(scope="session")
def spline_path():
    return media.build_media(media.random_spline(0.3, 2.0, seed=7, horizon=(-100.0, 120.0)))
