"""Cross-validated evaluation of embeddings with a k-NN or linear probe."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Union

import numpy as np

from .folds import FoldPlan
from .knn import KnnConfig, grid_search_k, knn_predict
from .metrics import MetricSet, compute_metrics
from .probe import ProbeConfig, train_linear_probe
from .tasks import TaskSpec


def _take(y, idx):
    return np.asarray(y)[idx]


def evaluate_fold(x, y, task: TaskSpec, fold, method: str,
                  cfg: Union[KnnConfig, ProbeConfig], seed: int) -> tuple[dict, dict, dict]:
    x = np.asarray(x, dtype=np.float64)
    tr, va, te = fold.train, fold.val, fold.test
    info = {}
    if method == "knn":
        if len(va):
            k = grid_search_k(x[tr], _take(y, tr), x[va], _take(y, va), cfg.k_grid, task,
                              cfg.temperature)
        else:
            k = min(cfg.k, len(tr))
        info["k"] = k
        scores = knn_predict(x[tr], _take(y, tr), x[te], cfg, task, k=k)
    elif method == "probe":
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 1])))
        model = train_linear_probe(x[tr], _take(y, tr), x[va] if len(va) else None,
                                   _take(y, va) if len(va) else None, task, cfg, rng)
        info["best_epoch"] = model.best_epoch
        scores = model.predict_scores(x[te])
    else:
        raise ValueError(f"unknown method {method!r}")
    values, skipped = compute_metrics(scores, _take(y, te), task)
    return values, skipped, info


def aggregate(per_fold: list[dict]) -> MetricSet:
    """Mean and population std across folds, independent of fold order."""
    names = sorted({k for d in per_fold for k in d})
    mean, std = {}, {}
    for name in names:
        vals = np.sort(np.array([d[name] for d in per_fold if name in d], dtype=np.float64))
        mean[name] = float(np.mean(vals))
        std[name] = float(np.std(vals))
    return MetricSet(mean, std if len(per_fold) > 1 else None, len(per_fold))


def run_protocol(embeddings, labels, task: TaskSpec, plan: FoldPlan, method: str = "knn",
                 cfg: Union[KnnConfig, ProbeConfig, None] = None,
                 workers: int = 1) -> MetricSet:
    if cfg is None:
        cfg = KnnConfig() if method == "knn" else ProbeConfig()
    x = np.asarray(embeddings, dtype=np.float64)
    if len(x) != len(labels):
        raise ValueError(f"{len(x)} embeddings but {len(labels)} labels")

    def one(i):
        seed = int(np.random.SeedSequence([plan.seed, i]).generate_state(1)[0])
        return evaluate_fold(x, labels, task, plan.folds[i], method, cfg, seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(len(plan.folds))))
    else:
        results = [one(i) for i in range(len(plan.folds))]
    metrics = aggregate([r[0] for r in results])
    skipped: dict = {}
    for _, s, _ in results:
        for k, v in s.items():
            skipped[k] = skipped.get(k, 0) + v
    metrics.skipped = skipped
    metrics.fold_info = [r[2] for r in results]
    return metrics
