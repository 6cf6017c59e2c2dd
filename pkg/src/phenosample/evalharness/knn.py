"""Cosine k-NN probe with softmax-temperature neighbour weighting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .metrics import compute_metrics
from .tasks import CLASSIFICATION, DISTRIBUTION, LOWER_IS_BETTER, MULTILABEL, TaskSpec

DEFAULT_K_GRID = (1, 3, 5, 10, 20, 50, 100, 200)


@dataclass(frozen=True)
class KnnConfig:
    k: int = 20
    temperature: float = 0.07
    k_grid: tuple = DEFAULT_K_GRID

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be positive")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if not self.k_grid or any(k < 1 for k in self.k_grid):
            raise ConfigError("k_grid must hold positive integers")


def normalize_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("embeddings contain non-finite values")
    norms = np.linalg.norm(x, axis=1)
    if (norms == 0).any():
        raise ValueError(f"zero-norm embedding at rows {np.flatnonzero(norms == 0)[:10].tolist()}")
    return x / norms[:, None]


def neighbours(train_unit: np.ndarray, query_unit: np.ndarray, k: int):
    """Indices and similarities of the ``k`` most similar training rows.

    Equal similarities rank by training index.
    """
    sims = query_unit @ train_unit.T
    order = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    return order, np.take_along_axis(sims, order, axis=1)


def _aggregate(nbr_idx, nbr_sim, train_y, temperature, task: TaskSpec) -> np.ndarray:
    # subtracting the row maximum leaves normalised weights unchanged
    logits = nbr_sim / temperature
    w = np.exp(logits - logits.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    if task.kind == CLASSIFICATION:
        labels = np.asarray(train_y, dtype=np.int64)[nbr_idx]
        scores = np.zeros((len(nbr_idx), task.n_outputs))
        rows = np.repeat(np.arange(len(nbr_idx)), nbr_idx.shape[1])
        np.add.at(scores, (rows, labels.ravel()), w.ravel())
        return scores
    targets = np.asarray(train_y, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    scores = np.einsum("qk,qkc->qc", w, targets[nbr_idx])
    if task.kind == DISTRIBUTION:
        scores /= scores.sum(axis=1, keepdims=True)
    return scores


def knn_predict(train_x, train_y, query_x, cfg: KnnConfig, task: TaskSpec,
                k: int | None = None) -> np.ndarray:
    """Score queries from their nearest training embeddings.

    Classification returns per-class weight sums (argmax is the prediction);
    multilabel, regression and distribution tasks return the weighted mean of
    the neighbours' targets.
    """
    k = cfg.k if k is None else k
    train_unit = normalize_rows(train_x)
    if len(train_unit) == 0:
        raise ValueError("empty training set")
    if k > len(train_unit):
        raise ValueError(f"k={k} exceeds training size {len(train_unit)}")
    idx, sim = neighbours(train_unit, normalize_rows(query_x), k)
    return _aggregate(idx, sim, train_y, cfg.temperature, task)


def predict_labels(scores: np.ndarray, task: TaskSpec) -> np.ndarray:
    if task.kind == CLASSIFICATION:
        return np.argmax(scores, axis=1)
    if task.kind == MULTILABEL:
        return scores >= 0.5
    return scores


def grid_search_k(train_x, train_y, val_x, val_y, grid, task: TaskSpec,
                  temperature: float = 0.07) -> int:
    """The k from ``grid`` with the best validation score; ties go to the smallest k."""
    train_unit = normalize_rows(train_x)
    candidates = sorted({k for k in grid if k <= len(train_unit)})
    if not candidates:
        raise ValueError(f"no k in {list(grid)} fits a training set of {len(train_unit)}")
    val_unit = normalize_rows(val_x)
    # neighbour lists for the largest k contain those for every smaller k
    idx, sim = neighbours(train_unit, val_unit, candidates[-1])
    metric = task.primary_metric
    sign = -1.0 if metric in LOWER_IS_BETTER else 1.0
    best_k, best = candidates[0], -np.inf
    for k in candidates:
        scores = _aggregate(idx[:, :k], sim[:, :k], train_y, temperature, task)
        value, _ = compute_metrics(scores, val_y, task)
        v = sign * value[metric]
        if np.isnan(v):
            v = -np.inf
        if v > best:
            best_k, best = k, v
    return best_k
