import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import cosine_law_m, gcj_forward, haversine_scalar, point_in_polygon
from tripmine.errors import ConfigError
from tripmine.geo import (DEFAULT_BOUNDS, Bounds, GeoPoint, GridSpec, Region, destination_point,
                          gcj02_to_wgs84, grid_index, haversine_distance, haversine_m, in_region,
                          load_geo_config, wgs84_to_gcj02)

lngs = st.floats(-180, 180, allow_nan=False)
lats = st.floats(-90, 90, allow_nan=False)
points = st.builds(GeoPoint, lngs, lats)


def box_points(lng0=116.0, lat0=39.6, size=1.0):
    return st.builds(GeoPoint, st.floats(lng0, lng0 + size), st.floats(lat0, lat0 + size))


def test_identity_distance_is_zero():
    p = GeoPoint(116.4, 39.9)
    assert haversine_distance(p, p) == 0.0


def test_antipodal_on_equator():
    d = haversine_distance(GeoPoint(0, 0), GeoPoint(180, 0))
    assert d == pytest.approx(math.pi * 6_371_000, abs=1e-6)
    assert d == pytest.approx(20_015_086.8, abs=0.1)


def test_short_beijing_distance_matches_cosine_law():
    a, b = GeoPoint(116.40, 39.90), GeoPoint(116.40, 39.91)
    assert haversine_distance(a, b) == pytest.approx(cosine_law_m(a.lng, a.lat, b.lng, b.lat), abs=0.01)


@given(points, points)
def test_symmetric(a, b):
    assert haversine_distance(a, b) == haversine_distance(b, a)


@given(box_points(), box_points(), box_points())
def test_triangle_inequality(a, b, c):
    assert haversine_distance(a, c) <= haversine_distance(a, b) + haversine_distance(b, c) + 1e-6


def test_vectorised_matches_scalar_oracle():
    rng = np.random.default_rng(0)
    lng1, lng2 = rng.uniform(-180, 180, (2, 200))
    lat1, lat2 = rng.uniform(-89, 89, (2, 200))
    got = haversine_m(lng1, lat1, lng2, lat2)
    want = [haversine_scalar(*v) for v in zip(lng1, lat1, lng2, lat2)]
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-6)


@given(st.floats(0, 2 * math.pi), st.floats(0, 5000))
def test_destination_point_distance(bearing, dist):
    p = GeoPoint(116.4, 39.9)
    q = destination_point(p, bearing, dist)
    assert haversine_distance(p, q) == pytest.approx(dist, abs=1e-6)


def test_bad_coordinates_rejected():
    with pytest.raises(ValueError):
        GeoPoint(116.0, 91.2)
    with pytest.raises(ValueError):
        GeoPoint(181.0, 0.0)


# --- GCJ-02 -----------------------------------------------------------------

def test_forward_matches_reference_transcription():
    rng = np.random.default_rng(1)
    for lng, lat in zip(rng.uniform(73, 135, 200), rng.uniform(18, 53, 200)):
        got = wgs84_to_gcj02(GeoPoint(lng, lat))
        want = gcj_forward(lng, lat)
        assert got.lng == pytest.approx(want[0], abs=1e-12)
        assert got.lat == pytest.approx(want[1], abs=1e-12)


def test_outside_china_is_identity():
    p = GeoPoint(72.0, 30.0)
    assert gcj02_to_wgs84(p) == p
    assert wgs84_to_gcj02(p) == p


def test_round_trip_1000_mainland_points():
    rng = np.random.default_rng(2)
    for lng, lat in zip(rng.uniform(75, 134, 1000), rng.uniform(20, 52, 1000)):
        gcj = gcj_forward(lng, lat)
        back = gcj02_to_wgs84(GeoPoint(*gcj))
        assert abs(back.lng - lng) < 1e-6 and abs(back.lat - lat) < 1e-6
        again = gcj_forward(back.lng, back.lat)
        assert abs(again[0] - gcj[0]) < 1e-6 and abs(again[1] - gcj[1]) < 1e-6


def test_beijing_shift_is_a_few_hundred_meters():
    gcj = GeoPoint(116.397, 39.909)
    wgs = gcj02_to_wgs84(gcj)
    assert 100 <= haversine_distance(gcj, wgs) <= 800


# --- regions ----------------------------------------------------------------

def test_box_membership():
    r = Region.box(DEFAULT_BOUNDS)
    assert in_region(GeoPoint(116.4, 39.9), r)
    assert not in_region(GeoPoint(120.0, 39.9), r)
    assert in_region(GeoPoint(116.0, 40.2), r)


UNIT_SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


@pytest.mark.parametrize("p", [(0.5, 0.0), (1.0, 0.3), (0.0, 0.0), (0.25, 1.0)])
def test_polygon_edge_points_inside(p):
    assert in_region(GeoPoint(*p), Region("polygon", UNIT_SQUARE))
    assert point_in_polygon(*p, UNIT_SQUARE)


CONCAVE = [(0, 0), (4, 0), (4, 4), (2, 1.5), (0, 4)]


@given(st.floats(-1, 5), st.floats(-1, 5))
def test_polygon_matches_ray_casting_oracle(x, y):
    assert in_region(GeoPoint(x, y), Region("polygon", CONCAVE)) == point_in_polygon(x, y, CONCAVE)


def test_self_intersecting_polygon_rejected():
    with pytest.raises(ConfigError):
        Region("polygon", [(0, 0), (1, 1), (1, 0), (0, 1)])


def test_closed_ring_accepted():
    r = Region("polygon", UNIT_SQUARE + [UNIT_SQUARE[0]])
    assert len(r.coords) == 4


# --- grid -------------------------------------------------------------------

def test_grid_corner_and_center():
    g = GridSpec(DEFAULT_BOUNDS, 30, 30)
    assert grid_index(GeoPoint(116.0, 40.2), g) == (0, 0)
    assert grid_index(GeoPoint(116.4, 39.9), g) == (15, 15)
    assert grid_index(GeoPoint(116.8, 39.6), g) == (29, 29)
    assert grid_index(GeoPoint(116.81, 39.9), g) is None


def test_cell_center_from_bounds_arithmetic():
    b = DEFAULT_BOUNDS
    g = GridSpec(b, 30, 30)
    w = (b.max_lng - b.min_lng) / 30
    h = (b.max_lat - b.min_lat) / 30
    p = GeoPoint(b.min_lng + 2.5 * w, b.max_lat - 3.5 * h)
    assert grid_index(p, g) == (2, 3)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 40), st.integers(1, 40))
def test_grid_partitions_bounds(u, v, nc, nr):
    b = Bounds(10.0, 20.0, 12.0, 21.0)
    g = GridSpec(b, nc, nr)
    p = GeoPoint(b.min_lng + u * 2.0, b.min_lat + v * 1.0)
    col, row = grid_index(p, g)
    assert 0 <= col < nc and 0 <= row < nr
    # the point lies inside the closed cell it was assigned
    w, h = 2.0 / nc, 1.0 / nr
    assert b.min_lng + col * w - 1e-9 <= p.lng <= b.min_lng + (col + 1) * w + 1e-9
    assert b.max_lat - (row + 1) * h - 1e-9 <= p.lat <= b.max_lat - row * h + 1e-9


def test_geo_config_round_trip(tmp_path):
    doc = {"region": {"kind": "polygon", "coords": [[116.1, 39.7], [116.7, 39.7], [116.4, 40.1]]},
           "grid": {"bounds": [116.0, 39.6, 116.8, 40.2], "n_cols": 10, "n_rows": 12}}
    path = tmp_path / "geo.json"
    path.write_text(json.dumps(doc))
    region, grid = load_geo_config(path)
    assert region.kind == "polygon" and len(region.coords) == 3
    assert (grid.n_cols, grid.n_rows) == (10, 12)
    assert in_region(GeoPoint(116.4, 39.8), region)
    assert not in_region(GeoPoint(116.1, 40.1), region)
