import os
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import HealthCheck, settings

from tripmine.geo import GeoPoint
from tripmine.ingest import TripRecord

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=300, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

TZ8 = timezone(timedelta(hours=8))
BEIJING = GeoPoint(116.397, 39.909)


def ts(y, mo, d, h, mi=0, s=0, tz=TZ8):
    return int(datetime(y, mo, d, h, mi, s, tzinfo=tz).timestamp())


def trip(r_id, origin, dest, o_time, duration_s=600, distance_km=1.0, p_id="U1", d_id="D1"):
    return TripRecord(r_id, p_id, d_id, origin, dest, o_time, o_time + duration_s, distance_km)


@pytest.fixture
def make_trip():
    return trip


def random_theta(f, rng):
    """Moderate parameter draws shared by the property tests."""
    from tripmine.distributions import Family

    f = Family(f)
    if f is Family.LOG_NORMAL:
        return [rng.uniform(-1, 3), rng.uniform(0.2, 1.5)]
    if f is Family.WEIBULL:
        return [rng.uniform(0.6, 5), rng.uniform(0.5, 30)]
    if f is Family.GAMMA:
        return [rng.uniform(0.6, 8), rng.uniform(0.1, 3)]
    if f is Family.STUDENT_T:
        return [rng.uniform(1, 30), rng.uniform(-5, 5), rng.uniform(0.2, 5)]
    if f is Family.EXP_WEIBULL:
        return [rng.uniform(0.6, 5), rng.uniform(0.5, 5), rng.uniform(0.5, 30)]
    return [rng.uniform(0.3, 6), rng.uniform(0.3, 1.5)]


_ACCEPTANCE = []


@pytest.fixture
def verdict(capsys):
    """Print and record one PASS/FAIL line, then return the outcome for asserting."""
    def _record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
