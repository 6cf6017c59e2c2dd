import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phenosample.sampler import (LocationAttributes, WeightPolicy, draw_locations, draw_seasons,
                                 location_weight, ndvi, read_attributes, read_weights,
                                 rng_from_seed, weighted_season_batches, worker_rng,
                                 write_weights)


def test_ndvi_examples():
    assert ndvi(0.3, 0.3) == 0.0
    assert ndvi(0.8, 0.2) == pytest.approx(0.6)
    assert ndvi(0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        ndvi(-0.1, 0.2)


def attrs(vals, mountain=False):
    return LocationAttributes(0, tuple(vals), mountain)


def test_weight_examples():
    assert location_weight(attrs([0.05] * 4)).weight == 0.25
    assert location_weight(attrs([0.4, 0.5, 0.3, 0.2], True)).weight == 2.0
    assert location_weight(attrs([0.05] * 4, True)).weight == 0.5
    w = location_weight(attrs([0.05] * 4, True))
    assert w.factors == {"nonveg": 0.25, "mountain": 2.0}


def test_one_vegetated_season_keeps_full_weight():
    assert location_weight(attrs([0.05, 0.05, 0.3, 0.05])).weight == 1.0


def test_missing_ndvi_flagged():
    w = location_weight(attrs([None] * 4))
    assert w.weight == 1.0 and w.flags == ["no_ndvi"]
    assert location_weight(attrs([None, 0.05, None, 0.05])).weight == 0.25


def test_weight_policy_validation():
    with pytest.raises(ValueError):
        WeightPolicy(nonveg_divisor=0.0)


def test_single_weight_draws_zero():
    assert set(draw_locations([1.0], 1000, rng_from_seed(0)).tolist()) == {0}


def test_draws_are_deterministic():
    a = draw_locations([1, 2, 3], 500, rng_from_seed(11))
    b = draw_locations([1, 2, 3], 500, rng_from_seed(11))
    assert np.array_equal(a, b)
    assert not np.array_equal(worker_rng(11, 0).random(5), worker_rng(11, 1).random(5))
    assert np.array_equal(worker_rng(11, 3).random(5), worker_rng(11, 3).random(5))


@pytest.mark.parametrize("weights", [[0.0, 1.0], [-1.0], [], [math.inf]])
def test_bad_weights_rejected(weights):
    with pytest.raises(ValueError):
        draw_locations(weights, 10, rng_from_seed(0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=2, max_size=6), st.integers(0, 2**32 - 1))
def test_draw_frequencies_within_binomial_bound(weights, seed):
    n = 20_000
    draws = draw_locations(weights, n, rng_from_seed(seed))
    p = np.asarray(weights) / sum(weights)
    freq = np.bincount(draws, minlength=len(weights)) / n
    sigma = np.sqrt(p * (1 - p) / n)
    # 5 sigma per category keeps the family-wise false alarm rate negligible
    assert np.all(np.abs(freq - p) <= 5 * sigma)


def test_draw_seasons_contract():
    rng = rng_from_seed(1)
    two = draw_seasons([0, 1, 2, 3], 2, rng)
    assert len(set(two)) == 2
    assert sorted(draw_seasons([0, 1, 2, 3], 4, rng)) == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        draw_seasons([0, 1, 2, 3], 5, rng)
    with pytest.raises(ValueError):
        draw_seasons([0, 0, 1], 2, rng)


def test_season_batches():
    out = weighted_season_batches([1.0, 1.0], [[0, 2], [1, 2, 3]], 50, 2, rng_from_seed(2))
    assert len(out) == 50
    for i, seasons in out:
        assert len(seasons) == 2 and set(seasons) <= set([[0, 2], [1, 2, 3]][i])


def test_weights_and_attributes_io(tmp_path):
    ws = [location_weight(LocationAttributes(i, (0.05,) * 4, i % 2 == 1)) for i in range(3)]
    write_weights(ws, tmp_path / "w.jsonl")
    back = read_weights(tmp_path / "w.jsonl")
    assert [back[i].weight for i in range(3)] == [0.25, 0.5, 0.25]
    (tmp_path / "a.jsonl").write_text(
        '{"point_id": 4, "mean_ndvi": [0.1, null, 0.2, 0.3], "is_mountain": true}\n')
    a = read_attributes(tmp_path / "a.jsonl")[0]
    assert a.point_id == 4 and a.mean_ndvi_per_season == (0.1, None, 0.2, 0.3) and a.is_mountain
