"""Linear probe on frozen embeddings, trained with AdamW and early stopping.

Losses return the mean loss together with its gradient with respect to the
logits; the parameter gradients follow from the affine layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ProbeDivergedError
from .tasks import CLASSIFICATION, DISTRIBUTION, MULTILABEL, TaskSpec


@dataclass(frozen=True)
class ProbeConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 1000
    patience: int = 20
    weight_decay: float = 1e-2
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    standardize: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("learning_rate, batch_size and max_epochs must be positive")
        if self.patience < 1:
            raise ConfigError("patience must be positive")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _log_sigmoid(z):
    return -np.logaddexp(0.0, -z)


def _sigmoid(z):
    return np.exp(_log_sigmoid(z))


def cross_entropy(z, y):
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    logp = _log_softmax(z)
    loss = -logp[np.arange(n), y].mean()
    grad = np.exp(logp)
    grad[np.arange(n), y] -= 1.0
    return loss, grad / n


def multilabel_soft_margin(z, y):
    n, c = z.shape
    loss = -(y * _log_sigmoid(z) + (1 - y) * _log_sigmoid(-z)).mean()
    return loss, (_sigmoid(z) - y) / (n * c)


def presence_weighted_bce(z, y, pos_weight=12.0):
    n, c = z.shape
    loss = -(pos_weight * y * _log_sigmoid(z) + (1 - y) * _log_sigmoid(-z)).mean()
    s = _sigmoid(z)
    grad = -pos_weight * y * (1 - s) + (1 - y) * s
    return loss, grad / (n * c)


def mse(z, y):
    n, c = z.shape
    diff = z - y
    return (diff ** 2).mean(), 2.0 * diff / (n * c)


def kl_loss(z, p):
    """Batch-mean KL(p || softmax(z))."""
    n = len(z)
    logq = _log_softmax(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    loss = (plogp - p * logq).sum() / n
    grad = np.exp(logq) * p.sum(axis=1, keepdims=True) - p
    return loss, grad / n


def task_loss(task: TaskSpec, z, y):
    if task.loss == "cross_entropy":
        return cross_entropy(z, y)
    if task.loss == "multilabel_soft_margin":
        return multilabel_soft_margin(z, y)
    if task.loss == "presence_weighted_bce":
        return presence_weighted_bce(z, y, task.pos_weight)
    if task.loss == "mse":
        return mse(z, y)
    if task.loss == "kl":
        return kl_loss(z, y)
    raise ConfigError(f"unknown loss {task.loss!r}")


def loss_and_grads(task: TaskSpec, weights, bias, x, y):
    z = x @ weights + bias
    loss, dz = task_loss(task, z, y)
    return loss, x.T @ dz, dz.sum(axis=0)


def scores_from_logits(task: TaskSpec, z) -> np.ndarray:
    if task.kind in (CLASSIFICATION, DISTRIBUTION) and task.loss != "mse":
        return np.exp(_log_softmax(z))
    if task.kind == MULTILABEL:
        return _sigmoid(z)
    return z


@dataclass
class LinearProbe:
    weights: np.ndarray  # d x C, standardisation folded in
    bias: np.ndarray  # C
    task: TaskSpec
    best_epoch: int = 0
    history: list = field(default_factory=list)

    def logits(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias

    def predict_scores(self, x) -> np.ndarray:
        return scores_from_logits(self.task, self.logits(x))


def _prepare_targets(task: TaskSpec, y) -> np.ndarray:
    if task.kind == CLASSIFICATION:
        return np.asarray(y, dtype=np.int64)
    y = np.asarray(y, dtype=np.float64)
    return y[:, None] if y.ndim == 1 else y


class _AdamW:
    def __init__(self, params, cfg: ProbeConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, decay_mask):
        cfg = self.cfg
        b1, b2 = cfg.betas
        self.t += 1
        for p, g, m, v, decay in zip(params, grads, self.m, self.v, decay_mask):
            if decay:
                p *= 1.0 - cfg.learning_rate * cfg.weight_decay
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


def train_linear_probe(train_x, train_y, val_x, val_y, task: TaskSpec,
                       cfg: ProbeConfig = ProbeConfig(),
                       rng: np.random.Generator | None = None) -> LinearProbe:
    rng = rng if rng is not None else np.random.Generator(np.random.PCG64(0))
    x = np.asarray(train_x, dtype=np.float64)
    if x.ndim != 2 or not np.all(np.isfinite(x)):
        raise ValueError("training embeddings must be a finite 2-D array")
    y = _prepare_targets(task, train_y)
    has_val = val_x is not None and len(val_x) > 0
    if has_val:
        vx = np.asarray(val_x, dtype=np.float64)
        vy = _prepare_targets(task, val_y)

    if cfg.standardize:
        mu = x.mean(axis=0)
        sigma = x.std(axis=0)
        sigma[sigma == 0] = 1.0
    else:
        mu, sigma = np.zeros(x.shape[1]), np.ones(x.shape[1])
    xs = (x - mu) / sigma
    if has_val:
        vxs = (vx - mu) / sigma

    n, d = xs.shape
    w = np.zeros((d, task.n_outputs))
    b = np.zeros(task.n_outputs)
    opt = _AdamW([w, b], cfg)
    best = (np.inf, w.copy(), b.copy(), 0)
    history = []
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = perm[start:start + cfg.batch_size]
            _, gw, gb = loss_and_grads(task, w, b, xs[batch], y[batch])
            opt.step([w, b], [gw, gb], (True, False))
        train_loss = task_loss(task, xs @ w + b, y)[0]
        val_loss = task_loss(task, vxs @ w + b, vy)[0] if has_val else train_loss
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise ProbeDivergedError(epoch)
        history.append((float(train_loss), float(val_loss)))
        if val_loss < best[0]:
            best = (val_loss, w.copy(), b.copy(), epoch)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    _, bw, bb, best_epoch = best
    folded_w = bw / sigma[:, None]
    folded_b = bb - mu @ folded_w
    return LinearProbe(folded_w, folded_b, task, best_epoch, history)
