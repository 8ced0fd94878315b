from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import trip, ts
from oracles import greedy_labels, haversine_scalar, offset_m
from tripmine.errors import EmptyInputError
from tripmine.geo import GeoPoint
from tripmine.places import (MinerConfig, PlaceLabeling, detect_home, detect_work, generate_places,
                             mine_user, rank_places, user_places_from_json)

BASE = (116.40, 39.90)
CFG = MinerConfig()


def pt(east=0.0, north=0.0):
    return GeoPoint(*offset_m(*BASE, east, north))


def _trips(pairs, start=None):
    t0 = ts(2017, 3, 1, 8) if start is None else start
    return [trip(f"r{i:03d}", o, d, t0 + 3600 * i) for i, (o, d) in enumerate(pairs)]


def test_short_trip_single_place():
    lab = generate_places(_trips([(pt(), pt(300))]), CFG)
    assert (lab.origin_pids, lab.dest_pids, lab.max_pid) == ([0], [0], 0)


def test_long_trip_two_places():
    lab = generate_places(_trips([(pt(), pt(600))]), CFG)
    assert (lab.origin_pids, lab.dest_pids, lab.max_pid) == ([0], [1], 1)


def test_chaining_through_intermediate_point():
    a = pt(0, 0)
    b = pt(400, 0)
    # C is 400 m from B and 700 m from A
    cos_g = (400**2 + 400**2 - 700**2) / (2 * 400 * 400)
    ang = np.pi - np.arccos(cos_g)
    c = pt(400 + 400 * np.cos(ang), 400 * np.sin(ang))
    assert haversine_scalar(a.lng, a.lat, b.lng, b.lat) < 500
    assert haversine_scalar(b.lng, b.lat, c.lng, c.lat) < 500
    assert haversine_scalar(a.lng, a.lat, c.lng, c.lat) > 500
    # processing order: origins A, B then destinations C, C
    lab = generate_places(_trips([(a, c), (b, c)]), CFG)
    assert lab.origin_pids == [0, 0] and lab.dest_pids == [0, 0]


def test_nearest_prior_point_wins_over_lower_pid():
    # origins at 0, 1000 and 1600 m east get PIDs 0, 1, 2; the first destination
    # is 350 m from PID 1 and 250 m from PID 2
    trips = _trips([(pt(0), pt(1350)), (pt(1000), pt(5000)), (pt(1600), pt(9000))])
    lab = generate_places(trips, CFG)
    assert lab.origin_pids == [0, 1, 2]
    assert lab.dest_pids[0] == 2


def test_origin_first_flag_changes_precedence():
    # destination 420 m from its own origin (PID 0) and 380 m from PID 1
    trips = _trips([(pt(0), pt(420)), (pt(800), pt(5000))])
    strict = generate_places(trips, MinerConfig(strict_alg1_origin_first=True))
    loose = generate_places(trips, MinerConfig(strict_alg1_origin_first=False))
    assert strict.origin_pids == loose.origin_pids == [0, 1]
    assert strict.dest_pids[0] == 0
    assert loose.dest_pids[0] == 1


def test_empty_input():
    with pytest.raises(EmptyInputError):
        generate_places([], CFG)


def _random_user(rng, n_trips, spread_m=1500.0):
    centers = rng.uniform(-spread_m, spread_m, (rng.integers(1, 7), 2))
    pts = []
    for _ in range(2 * n_trips):
        c = centers[rng.integers(len(centers))]
        if rng.random() < 0.1 and pts:
            pts.append(pts[rng.integers(len(pts))])  # exact duplicates exercise ties
        else:
            pts.append(pt(*(c + rng.uniform(-350, 350, 2))))
    return _trips(list(zip(pts[:n_trips], pts[n_trips:])))


@pytest.mark.parametrize("origin_first", [True, False])
def test_matches_quadratic_oracle(origin_first):
    rng = np.random.default_rng(10)
    cfg = MinerConfig(strict_alg1_origin_first=origin_first)
    for _ in range(150):
        trips = _random_user(rng, int(rng.integers(1, 31)))
        lab = generate_places(trips, cfg)
        want = greedy_labels([(t.origin.lng, t.origin.lat) for t in trips],
                             [(t.dest.lng, t.dest.lat) for t in trips], cfg.d_th, origin_first)
        assert (lab.origin_pids, lab.dest_pids) == (list(want[0]), list(want[1]))


seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(1, 30))
def test_labeling_invariants(seed, n):
    rng = np.random.default_rng(seed)
    trips = _random_user(rng, n)
    lab = generate_places(trips, CFG)
    pids = lab.origin_pids + lab.dest_pids
    assert lab.origin_pids[0] == 0
    assert sorted(set(pids)) == list(range(lab.max_pid + 1))
    assert lab.n_places <= 2 * n
    # first appearances are issued in increasing order
    first = [p for i, p in enumerate(pids) if p not in pids[:i]]
    assert first == sorted(first)
    # every shared PID is reachable through the match edges actually taken
    parent = list(range(2 * n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    pts = [t.origin for t in trips] + [t.dest for t in trips]
    for k, j in lab.match_edges:
        assert j < k or (k >= n and j == k - n)
        assert haversine_scalar(pts[k].lng, pts[k].lat, pts[j].lng, pts[j].lat) < CFG.d_th
        parent[find(k)] = find(j)
    groups = {}
    for i, p in enumerate(pids):
        groups.setdefault(p, set()).add(find(i))
    assert all(len(g) == 1 for g in groups.values())
    # deterministic
    assert generate_places(trips, CFG) == lab


# --- home and work ------------------------------------------------------------

def _labeling(origin_pids, dest_pids):
    n = len(origin_pids)
    return PlaceLabeling("U1", [f"r{i:03d}" for i in range(n)], list(origin_pids), list(dest_pids),
                         max(origin_pids + dest_pids))


def _timed(hours):
    """Trips departing at the given local hours on consecutive days, lasting 20 minutes."""
    return [trip(f"r{i:03d}", pt(), pt(1000), ts(2017, 3, 1 + i, h), duration_s=1200)
            for i, h in enumerate(hours)]


def test_home_half_of_trips():
    trips = _timed([8] * 5 + [13] * 5)
    lab = _labeling([3] * 5 + [0, 1, 2, 4, 0], [0, 1, 2, 4, 0] * 2)
    assert detect_home(lab, trips, CFG) == (3, 0.5)


def test_home_forty_percent_is_not_enough():
    trips = _timed([8] * 4 + [13] * 6)
    lab = _labeling([3] * 4 + [0] * 6, [1] * 10)
    assert detect_home(lab, trips, CFG) is None


def test_no_window_trips():
    trips = _timed([13] * 10)
    lab = _labeling([0] * 10, [1] * 10)
    assert detect_home(lab, trips, CFG) is None
    assert detect_work(lab, trips, CFG, None) is None


def test_work_morning_arrivals():
    trips = _timed([8] * 6 + [13] * 4)
    lab = _labeling([0] * 10, [1] * 6 + [2] * 4)
    assert detect_work(lab, trips, CFG, home=0) == (1, 0.6)


def test_work_skips_home_pid():
    trips = _timed([8] * 6 + [8] * 4)
    lab = _labeling([5] * 10, [0] * 6 + [1] * 4)
    assert detect_work(lab, trips, CFG, home=0) is None
    assert detect_work(lab, trips, CFG, home=None) == (0, 0.6)


def test_work_tie_goes_to_lowest_pid():
    trips = _timed([8] * 10)
    lab = _labeling([0] * 10, [4] * 5 + [2] * 5)
    assert detect_work(lab, trips, CFG, home=0) == (2, 0.5)


def test_window_is_half_open():
    # 11:00 departure is outside [6, 11); a 10:59 departure is inside
    trips = _timed([11] * 10)
    lab = _labeling([0] * 10, [1] * 10)
    assert detect_home(lab, trips, CFG) is None
    trips = [trip(f"r{i:03d}", pt(), pt(1000), ts(2017, 3, 1 + i, 10, 59)) for i in range(10)]
    assert detect_home(lab, trips, CFG) == (0, 1.0)


def _commuter(n_days=20):
    home, work, shop = pt(0), pt(0, 5000), pt(3000)
    trips = []
    for d in range(n_days):
        trips.append(trip(f"m{d:02d}", home, work, ts(2017, 3, 1 + d, 8), 1800, 6.0))
        trips.append(trip(f"e{d:02d}", work, home, ts(2017, 3, 1 + d, 17), 1800, 6.0))
    trips.append(trip("s00", home, shop, ts(2017, 3, 25, 12), 900, 3.0))
    return trips


def test_mine_user_finds_home_and_work():
    up = mine_user(_commuter())
    assert up.home_pid == 0 and up.work_pid == 1
    assert up.home[1] == pytest.approx(40 / 41)
    doc = up.to_json()
    back = user_places_from_json(doc)
    assert (back.home_pid, back.work_pid) == (0, 1)
    assert back.labeling.origin_pids == up.labeling.origin_pids
    assert [p["function"] for p in doc["places"]] == [0, 1, 2]


@given(seeds, st.integers(1, 30))
def test_home_and_work_differ(seed, n):
    rng = np.random.default_rng(seed)
    trips = _random_user(rng, n, spread_m=800)
    up = mine_user(trips)
    if up.home_pid is not None:
        assert up.home_pid != up.work_pid


# --- ranking ----------------------------------------------------------------

def test_rank_example():
    lab = _labeling([0, 0, 0, 1, 2], [0, 0, 0, 1, 1])
    assert rank_places(lab) == [(1, 0, 6, 0.6), (2, 1, 3, 0.3), (3, 2, 1, 0.1)]


def test_rank_single_place():
    assert rank_places(_labeling([0], [0])) == [(1, 0, 2, 1.0)]


@given(st.lists(st.integers(0, 6), min_size=20, max_size=20))
def test_rank_matches_counting_oracle(pids):
    pids = [0] + pids[1:]
    # relabel so ids are the consecutive integers the labeling guarantees
    order = {p: i for i, p in enumerate(dict.fromkeys(pids))}
    pids = [order[p] for p in pids]
    lab = _labeling(pids[:10], pids[10:])
    counts = Counter(pids)
    want = sorted(counts, key=lambda p: (-counts[p], p))
    got = rank_places(lab)
    assert [g[1] for g in got] == want
    assert [g[0] for g in got] == list(range(1, len(want) + 1))
    probs = [g[3] for g in got]
    assert all(a >= b for a, b in zip(probs, probs[1:]))
    assert sum(probs) == pytest.approx(1.0, abs=1e-12)
