"""Evaluation metrics for the four task kinds.

Average precision is the step-wise (non-interpolated) definition: the mean,
over positives, of the precision at that positive's rank. Equal scores keep
their input order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tasks import CLASSIFICATION, DISTRIBUTION, MULTILABEL, REGRESSION, TaskSpec


@dataclass
class MetricSet:
    mean: dict = field(default_factory=dict)
    std: dict | None = None
    n_folds: int = 1
    skipped: dict = field(default_factory=dict)
    fold_info: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"n_folds": self.n_folds, "mean": self.mean, "std": self.std,
                "skipped": self.skipped, "folds": self.fold_info}


def average_precision(labels, scores) -> np.ndarray:
    """Per-column AP for 2-D inputs (NaN where a column has no positives)."""
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    squeeze = labels.ndim == 1
    if squeeze:
        labels, scores = labels[:, None], scores[:, None]
    order = np.argsort(-scores, axis=0, kind="stable")
    ranked = np.take_along_axis(labels, order, axis=0)
    hits = np.cumsum(ranked, axis=0)
    ranks = np.arange(1, labels.shape[0] + 1)[:, None]
    n_pos = ranked.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ap = (ranked * hits / ranks).sum(axis=0) / n_pos
    ap[n_pos == 0] = np.nan
    return ap[0] if squeeze else ap


def roc_auc(labels, scores) -> np.ndarray:
    """Per-column AUROC via the rank-sum statistic, ties counted as one half."""
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    squeeze = labels.ndim == 1
    if squeeze:
        labels, scores = labels[:, None], scores[:, None]
    out = np.full(labels.shape[1], np.nan)
    for j in range(labels.shape[1]):
        y = labels[:, j] > 0.5
        n_pos, n_neg = int(y.sum()), int((~y).sum())
        if n_pos == 0 or n_neg == 0:
            continue
        ranks = _average_ranks(scores[:, j])
        out[j] = (ranks[y].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)
    return out[0] if squeeze else out


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    sx = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return np.where(denom > 0, 2 * tp / np.where(denom > 0, denom, 1), np.nan)


def f1_scores(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[float, float, int]:
    """(micro F1, macro F1, skipped labels) for binary indicator matrices.

    Labels with no positives in either truth or prediction are skipped from
    the macro mean.
    """
    y_true = np.asarray(y_true, dtype=bool)
    y_pred = np.asarray(y_pred, dtype=bool)
    tp = (y_true & y_pred).sum(axis=0)
    fp = (~y_true & y_pred).sum(axis=0)
    fn = (y_true & ~y_pred).sum(axis=0)
    per_label = _f1(tp, fp, fn)
    defined = ~np.isnan(per_label)
    macro = float(per_label[defined].mean()) if defined.any() else float("nan")
    micro = float(_f1(tp.sum(), fp.sum(), fn.sum()))
    return micro, macro, int((~defined).sum())


def r2_per_output(y_true, y_pred) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.ndim == 1:
        y_true, y_pred = y_true[:, None], y_pred[:, None]
    ss_res = ((y_true - y_pred) ** 2).sum(axis=0)
    ss_tot = ((y_true - y_true.mean(axis=0)) ** 2).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = 1.0 - ss_res / ss_tot
    r2[ss_tot == 0] = np.nan
    return r2


def mae(y_true, y_pred) -> float:
    return float(np.mean(np.abs(np.asarray(y_true, float) - np.asarray(y_pred, float))))


def rmse(y_true, y_pred) -> float:
    return float(np.sqrt(np.mean((np.asarray(y_true, float) - np.asarray(y_pred, float)) ** 2)))


def kl_divergence(p, q, eps: float = 1e-12) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"distribution shapes differ: {p.shape} vs {q.shape}")
    if (p < 0).any() or (q < 0).any():
        raise ValueError("distributions must be non-negative")
    q = np.maximum(q, eps)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / q[nz])))


def _nanmean(values, name, skipped):
    values = np.asarray(values, dtype=np.float64)
    bad = int(np.isnan(values).sum())
    if bad:
        skipped[name] = bad
    return float(np.nanmean(values)) if bad < values.size else float("nan")


def one_hot(y, n_classes) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    out = np.zeros((len(y), n_classes), dtype=bool)
    out[np.arange(len(y)), y] = True
    return out


def compute_metrics(predictions, labels, task: TaskSpec) -> tuple[dict, dict]:
    """Compute every requested metric.

    ``predictions`` are scores in probability space: class probabilities for
    classification, per-label probabilities for multilabel, values for
    regression, and bin proportions for distributions. Returns the metric
    values and the number of undefined per-label terms skipped per metric.
    """
    scores = np.asarray(predictions, dtype=np.float64)
    skipped: dict = {}
    values: dict = {}
    wanted = set(task.metrics)

    if task.kind == CLASSIFICATION:
        y = np.asarray(labels, dtype=np.int64)
        if scores.ndim == 1:
            pred = scores.astype(np.int64)
            scores = one_hot(pred, task.n_outputs).astype(float)
        else:
            pred = np.argmax(scores, axis=1)
        truth = one_hot(y, task.n_outputs)
        values["accuracy"] = float(np.mean(pred == y))
        micro, macro, n_skip = f1_scores(truth, one_hot(pred, task.n_outputs))
        values["micro_f1"], values["macro_f1"] = micro, macro
        if n_skip:
            skipped["macro_f1"] = n_skip
        if wanted & {"macro_auroc", "micro_auroc"}:
            values["macro_auroc"] = _nanmean(roc_auc(truth, scores), "macro_auroc", skipped)
            values["micro_auroc"] = float(roc_auc(truth.ravel(), scores.ravel()))
        if wanted & {"macro_map", "micro_map"}:
            values["macro_map"] = _nanmean(average_precision(truth, scores), "macro_map", skipped)
            values["micro_map"] = float(average_precision(truth.ravel(), scores.ravel()))

    elif task.kind == MULTILABEL:
        truth = np.asarray(labels) > 0.5
        micro, macro, n_skip = f1_scores(truth, scores >= 0.5)
        values["micro_f1"], values["macro_f1"] = micro, macro
        if n_skip:
            skipped["macro_f1"] = n_skip
        values["macro_map"] = _nanmean(average_precision(truth, scores), "macro_map", skipped)
        values["micro_map"] = float(average_precision(truth.ravel(), scores.ravel()))
        values["macro_auroc"] = _nanmean(roc_auc(truth, scores), "macro_auroc", skipped)
        values["micro_auroc"] = float(roc_auc(truth.ravel(), scores.ravel()))
        values["accuracy"] = float(np.mean(np.all(truth == (scores >= 0.5), axis=1)))

    elif task.kind in (REGRESSION, DISTRIBUTION):
        y = np.asarray(labels, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        if scores.ndim == 1:
            scores = scores[:, None]
        values["r2"] = _nanmean(r2_per_output(y, scores), "r2", skipped)
        values["mae"] = mae(y, scores)
        values["rmse"] = rmse(y, scores)
        if task.kind == DISTRIBUTION:
            values["kl"] = float(np.mean([kl_divergence(a, b) for a, b in zip(y, scores)]))

    return {k: values[k] for k in task.metrics if k in values}, skipped
