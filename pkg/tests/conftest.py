import os
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def fractions(lo=-4, hi=4, max_den=12):
    return st.builds(lambda n, d: Fraction(n, d),
                     st.integers(lo * max_den, hi * max_den), st.integers(1, max_den))


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(12345)


# --- acceptance report: one pass/fail line per criterion --------------------

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    k = mark.args[0]
    prev = _CRITERIA.get(k, ("PASS", 0.0, item.name))
    failed = rep.failed or prev[0] == "FAIL"
    _CRITERIA[k] = ("FAIL" if failed else "PASS", prev[1] + rep.duration, mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        status, secs, title = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k}: {status}  {title}  ({secs:.1f} s)")
