import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics.pairwise import haversine_distances

from phenosample.geogrid import (EARTH_RADIUS_KM, GeoPoint, GridSpec, generate_grid, grid_arrays,
                                 haversine_km, read_points, round_half_away, row_counts,
                                 row_latitudes, write_points)
from phenosample.raster import Raster, read_raster, write_raster


def test_row_count_and_equator_row():
    spec = GridSpec(23.0)
    assert spec.n_rows == 870
    lats = row_latitudes(spec)
    counts = row_counts(spec, lats)
    assert counts[np.argmin(np.abs(lats))] == 1740
    assert round(2 * math.pi * EARTH_RADIUS_KM / 23.0) == 1740


def test_row_latitudes_follow_fixed_step():
    spec = GridSpec(23.0)
    lats = row_latitudes(spec)
    step = math.degrees(23.0 / EARTH_RADIUS_KM)
    np.testing.assert_allclose(lats, -90 + (np.arange(870) + 0.5) * step, rtol=0, atol=1e-12)
    assert lats[0] > -90 and lats[-1] < 90
    assert row_counts(spec, lats).min() >= 1


def test_all_sea_mask_is_empty():
    sea = Raster.global_constant(0.0, 1.0, 1.0)
    assert generate_grid(GridSpec(), sea) == []


def test_nodata_cells_are_not_land():
    values = np.full((180, 360), -9999.0)
    mask = Raster(-90.0, -180.0, 1.0, 1.0, values)
    assert generate_grid(GridSpec(200.0), mask) == []


def test_mask_subset_and_ids_sequential():
    values = np.zeros((180, 360))
    values[90:120, 180:220] = 1.0  # lat 0..30, lon 0..40
    mask = Raster(-90.0, -180.0, 1.0, 1.0, values)
    pts = generate_grid(GridSpec(50.0), mask)
    assert [p.id for p in pts] == list(range(len(pts)))
    assert all(0 <= p.lat < 30 and 0 <= p.lon < 40 for p in pts)
    full_lat, full_lon = grid_arrays(GridSpec(50.0), Raster.global_constant(1.0, 1.0, 1.0))
    inside = (full_lat >= 0) & (full_lat < 30) & (full_lon >= 0) & (full_lon < 40)
    assert len(pts) == int(inside.sum())


def test_round_half_away():
    assert list(round_half_away(np.array([0.5, 1.5, 2.5, -0.5, 2.4]))) == [1, 2, 3, -1, 2]


def test_haversine_examples():
    a = GeoPoint(0, 0.0, 0.0)
    assert haversine_km(a, a) == 0.0
    assert haversine_km(a, GeoPoint(1, 0.0, 180.0)) == pytest.approx(math.pi * EARTH_RADIUS_KM)
    assert haversine_km(a, GeoPoint(1, 0.0, 1.0)) == pytest.approx(111.195, abs=1e-3)


coords = st.tuples(st.floats(-90, 90), st.floats(-180, 180, exclude_max=True))


@settings(max_examples=200, deadline=None)
@given(coords, coords)
def test_haversine_matches_sklearn(a, b):
    pa, pb = GeoPoint(0, *a), GeoPoint(1, *b)
    want = haversine_distances(np.radians([a]), np.radians([b]))[0, 0] * EARTH_RADIUS_KM
    assert haversine_km(pa, pb) == pytest.approx(want, rel=1e-9, abs=1e-6)
    assert haversine_km(pa, pb) == pytest.approx(haversine_km(pb, pa), rel=1e-12, abs=1e-9)


def test_geopoint_validation():
    with pytest.raises(ValueError):
        GeoPoint(0, 91.0, 0.0)
    with pytest.raises(ValueError):
        GeoPoint(0, 0.0, 180.5)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(0.0)


def test_points_round_trip(tmp_path):
    pts = [GeoPoint(i, -10.5 + i, 20.25 * i) for i in range(5)]
    write_points(pts, tmp_path / "g.jsonl")
    assert read_points(tmp_path / "g.jsonl") == pts


def test_raster_round_trip_and_sampling(tmp_path):
    values = np.arange(12, dtype=float).reshape(3, 4)
    values[0, 0] = -9999.0
    r = Raster(10.0, 20.0, 1.0, 1.0, values)
    write_raster(r, tmp_path / "r")
    back = read_raster(tmp_path / "r.json")
    np.testing.assert_array_equal(back.values, values.astype(np.float32))
    s = back.sample([10.5, 11.5, 50.0], [20.5, 21.5, 20.5])
    assert math.isnan(s[0]) and s[1] == 5.0 and math.isnan(s[2])
