import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from sfpoly.poly import Polynomial

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number")
    config._criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    table = item.config._criteria
    _, ok_prev, notes = table.get(n, (text, True, []))
    failed = rep.failed or (rep.when == "call" and rep.skipped)
    if rep.when == "call":
        notes += [f"{k}: {v}" for k, v in item.user_properties]
    table[n] = (text, ok_prev and not failed, notes)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config._criteria
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(table):
        text, ok, notes = table[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {text}")
        for note in notes:
            terminalreporter.write_line(f"              {note}")


# -- shared strategies --------------------------------------------------------

def exponents(n, max_deg):
    return st.lists(st.integers(0, max_deg), min_size=n, max_size=n).filter(
        lambda a: sum(a) <= max_deg)


coeffs = st.floats(-5, 5, allow_nan=False, allow_infinity=False).map(lambda c: round(c, 3))


@st.composite
def polynomials(draw, n=2, max_deg=3, max_terms=6):
    terms = draw(st.lists(st.tuples(exponents(n, max_deg), coeffs), max_size=max_terms))
    return Polynomial(n, [(tuple(a), c) for a, c in terms])


def points(n, lo=-2.0, hi=2.0):
    return st.lists(st.floats(lo, hi, allow_nan=False), min_size=n, max_size=n).map(np.array)


def rel_close(a, b, rtol):
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


SQRT2_2 = math.sqrt(2) / 2
