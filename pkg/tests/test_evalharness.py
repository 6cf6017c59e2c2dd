import math

import numpy as np
import pytest

import oracles
from phenosample.errors import ConfigError
from phenosample.evalharness.biomassters import biomassters_bins, image_distribution
from phenosample.evalharness.folds import make_folds
from phenosample.evalharness.io import (align, format_table, read_embeddings, read_labels,
                                        write_embeddings, write_labels)
from phenosample.evalharness.knn import KnnConfig, grid_search_k, knn_predict
from phenosample.evalharness.probe import (ProbeConfig, loss_and_grads, scores_from_logits,
                                           train_linear_probe)
from phenosample.evalharness.protocol import aggregate, run_protocol
from phenosample.evalharness.tasks import TaskSpec
from phenosample.sampler import rng_from_seed

CLS2 = TaskSpec("classification", 2)


def blobs(n=200, d=8, gap=4.0, seed=0):
    rng = rng_from_seed(seed)
    y = rng.integers(0, 2, n)
    centres = np.zeros((2, d))
    centres[0, 0], centres[1, 1] = gap, gap
    return centres[y] + rng.normal(scale=0.5, size=(n, d)), y


# folds ----------------------------------------------------------------------

def test_fold_sizes_and_partition():
    plan = make_folds(100, 10, 0.1, seed=3)
    for f in plan:
        assert (len(f.test), len(f.train), len(f.val)) == (10, 81, 9)
        assert set(f.test) | set(f.train) | set(f.val) == set(range(100))
        assert not (set(f.test) & set(f.train)) and not (set(f.train) & set(f.val))
    tests = np.concatenate([f.test for f in plan])
    assert sorted(tests.tolist()) == list(range(100))


def test_folds_deterministic():
    a, b = make_folds(57, 5, 0.1, 9), make_folds(57, 5, 0.1, 9)
    assert all(np.array_equal(x.test, y.test) and np.array_equal(x.val, y.val)
               for x, y in zip(a, b))


def test_folds_errors():
    with pytest.raises(ValueError):
        make_folds(3, 10)


# knn ------------------------------------------------------------------------

def test_knn_identity_and_equal_weights():
    x, y = blobs(30)
    assert np.array_equal(np.argmax(knn_predict(x, y, x, KnnConfig(k=1), CLS2), 1), y)
    reg = TaskSpec("regression", 1)
    train = np.array([[1.0, 1.0], [2.0, 2.0]])
    out = knn_predict(train, [1.0, 3.0], [[1.0, 1.0]], KnnConfig(k=2), reg)
    assert out[0, 0] == pytest.approx(2.0)


def test_knn_distribution_renormalised():
    task = TaskSpec("distribution", 3, loss="kl")
    rng = rng_from_seed(1)
    p = rng.dirichlet(np.ones(3), size=10)
    out = knn_predict(rng.normal(size=(10, 4)), p, rng.normal(size=(5, 4)), KnnConfig(k=4), task)
    np.testing.assert_allclose(out.sum(1), 1.0, atol=1e-12)


def test_knn_matches_brute_force_50_points():
    rng = rng_from_seed(2)
    tx, ty = rng.normal(size=(40, 6)), rng.integers(0, 4, 40)
    qx = rng.normal(size=(10, 6))
    got = knn_predict(tx, ty, qx, KnnConfig(k=7), TaskSpec("classification", 4))
    _, want = oracles.knn_brute(tx, ty, qx, 7, 0.07, 4)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_knn_errors():
    with pytest.raises(ValueError, match="zero-norm"):
        knn_predict(np.zeros((2, 2)), [0, 1], [[1.0, 0.0]], KnnConfig(k=1), CLS2)
    with pytest.raises(ValueError, match="exceeds"):
        knn_predict(np.eye(2), [0, 1], [[1.0, 0.0]], KnnConfig(k=3), CLS2)
    with pytest.raises(ConfigError):
        KnnConfig(temperature=0)


def test_grid_search():
    x, y = blobs(100)
    assert grid_search_k(x[:80], y[:80], x[80:], y[80:], (5,), CLS2) == 5
    assert grid_search_k(x[:80], y[:80], x[80:], y[80:], (1, 3, 5, 10), CLS2) == 1
    same = np.ones((20, 3))
    assert grid_search_k(same[:15], np.zeros(15, int), same[15:], np.zeros(5, int),
                         (10, 3, 5), CLS2) == 3


# probe ----------------------------------------------------------------------

def test_zero_init_cross_entropy_is_log_c():
    for c in (2, 5):
        task = TaskSpec("classification", c)
        x = rng_from_seed(c).normal(size=(9, 4))
        loss, _, _ = loss_and_grads(task, np.zeros((4, c)), np.zeros(c), x, np.arange(9) % c)
        assert loss == pytest.approx(math.log(c))


def test_probe_fits_separable_data_and_is_deterministic():
    x, y = blobs(300, seed=5)
    cfg = ProbeConfig(max_epochs=200, patience=10)
    a = train_linear_probe(x[:250], y[:250], x[250:], y[250:], CLS2, cfg, rng_from_seed(1))
    b = train_linear_probe(x[:250], y[:250], x[250:], y[250:], CLS2, cfg, rng_from_seed(1))
    assert np.array_equal(a.weights, b.weights)
    assert np.mean(np.argmax(a.predict_scores(x), 1) == y) >= 0.99
    assert 1 <= a.best_epoch <= len(a.history)


def test_probe_early_stops_on_patience():
    rng = rng_from_seed(3)
    x, y = rng.normal(size=(60, 3)), rng.integers(0, 2, 60)
    m = train_linear_probe(x[:40], y[:40], x[40:], y[40:], CLS2,
                           ProbeConfig(learning_rate=0.05, patience=3, max_epochs=500), rng)
    assert len(m.history) == m.best_epoch + 3


def test_probe_regression_recovers_linear_map():
    rng = rng_from_seed(4)
    x = rng.normal(size=(400, 3)) * [1.0, 10.0, 0.1] + 5.0
    w = np.array([[1.0], [-0.5], [3.0]])
    y = x @ w + 2.0
    m = train_linear_probe(x, y, None, None, TaskSpec("regression", 1),
                           ProbeConfig(learning_rate=0.05, batch_size=64, max_epochs=300,
                                       patience=300, weight_decay=0.0), rng)
    np.testing.assert_allclose(m.predict_scores(x), y, atol=0.05)


def test_scores_from_logits():
    p = scores_from_logits(TaskSpec("distribution", 3, loss="kl"), np.array([[0.0, 0.0, 0.0]]))
    np.testing.assert_allclose(p, 1 / 3)
    s = scores_from_logits(TaskSpec("multilabel", 2), np.array([[0.0, 100.0]]))
    np.testing.assert_allclose(s, [[0.5, 1.0]])


def test_incompatible_loss_rejected():
    with pytest.raises(ConfigError):
        TaskSpec("regression", 1, loss="kl")
    with pytest.raises(ConfigError):
        ProbeConfig(learning_rate=0)


# biomassters ----------------------------------------------------------------

def test_merged_zero_bin():
    rng = rng_from_seed(6)
    images = []
    for _ in range(20):
        img = rng.uniform(1, 100, size=(10, 10))
        img[rng.random((10, 10)) < 0.3] = 0.0
        images.append(img)
    spec, dists = biomassters_bins(images)
    assert spec.n_bins == 8
    for img, d in zip(images, dists):
        assert d[0] >= np.mean(img == 0)
    np.testing.assert_allclose(dists.sum(1), 1.0, atol=1e-9)


def test_image_in_one_bin_is_one_hot():
    images = [np.arange(100.0).reshape(10, 10)]
    spec, _ = biomassters_bins(images)
    d = image_distribution(np.full((3, 3), 99.0), spec)
    assert d.tolist() == [0.0] * 7 + [1.0]


# protocol -------------------------------------------------------------------

def test_single_fold_has_no_std():
    x, y = blobs(40)
    m = run_protocol(x, y, CLS2, make_folds(40, 1, 0.1, 0), "knn", KnnConfig(k_grid=(1, 3)))
    assert m.std is None and m.n_folds == 1


def test_constant_labels_are_perfect():
    x = np.ones((30, 4))
    y = np.zeros(30, dtype=int)
    m = run_protocol(x, y, CLS2, make_folds(30, 3, 0.1, 0), "knn", KnnConfig(k_grid=(1, 5)))
    assert m.mean["macro_f1"] == 1.0 and m.std["macro_f1"] == 0.0
    assert m.skipped["macro_f1"] == 3


def test_aggregate_order_invariant():
    folds = [{"a": 0.1}, {"a": 0.7}, {"a": 0.3}, {"a": 0.9}]
    x, y = aggregate(folds), aggregate(folds[::-1])
    assert x.mean == y.mean and x.std == y.std
    assert x.std["a"] == pytest.approx(np.std([0.1, 0.7, 0.3, 0.9]))


def test_protocol_workers_agree():
    x, y = blobs(120, seed=7)
    plan = make_folds(120, 4, 0.1, 2)
    cfg = ProbeConfig(max_epochs=30, patience=5)
    a = run_protocol(x, y, CLS2, plan, "probe", cfg, workers=1)
    b = run_protocol(x, y, CLS2, plan, "probe", cfg, workers=4)
    assert a.mean == b.mean and a.fold_info == b.fold_info


# io -------------------------------------------------------------------------

@pytest.mark.parametrize("name", ["e.bin", "e.csv"])
def test_embedding_round_trip(tmp_path, name):
    values = rng_from_seed(8).normal(size=(5, 3)).astype(np.float32)
    write_embeddings(values, tmp_path / name)
    ids, back = read_embeddings(tmp_path / name)
    assert ids.tolist() == list(range(5))
    np.testing.assert_array_equal(back, values.astype(np.float64))


def test_truncated_binary_embeddings(tmp_path):
    write_embeddings(np.ones((4, 2)), tmp_path / "e.bin")
    raw = (tmp_path / "e.bin").read_bytes()
    (tmp_path / "e.bin").write_bytes(raw[:-4])
    with pytest.raises(ValueError, match="header says 4x2"):
        read_embeddings(tmp_path / "e.bin")


def test_labels_align_and_table(tmp_path):
    write_labels([0, 1, 2], [1, 0, [0.5, 0.5]], tmp_path / "l.jsonl")
    labels = read_labels(tmp_path / "l.jsonl")
    with pytest.raises(ValueError, match="no labels"):
        align(np.arange(4), np.zeros((4, 1)), labels)
    x, y = blobs(40)
    table = format_table(run_protocol(x, y, CLS2, make_folds(40, 2, 0.1, 0), "knn",
                                      KnnConfig(k_grid=(1,))))
    lines = table.splitlines()
    assert lines[0].split() == ["metric", "mean", "std"]
    assert len({len(line) for line in lines}) == 1
