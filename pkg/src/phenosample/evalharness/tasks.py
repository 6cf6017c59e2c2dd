from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError

CLASSIFICATION = "classification"
MULTILABEL = "multilabel"
REGRESSION = "regression"
DISTRIBUTION = "distribution"
KINDS = (CLASSIFICATION, MULTILABEL, REGRESSION, DISTRIBUTION)

COMPATIBLE_LOSSES = {
    CLASSIFICATION: ("cross_entropy",),
    MULTILABEL: ("multilabel_soft_margin", "presence_weighted_bce"),
    REGRESSION: ("mse",),
    DISTRIBUTION: ("kl", "mse"),
}

DEFAULT_METRICS = {
    CLASSIFICATION: ("macro_f1", "accuracy", "micro_f1", "macro_auroc"),
    MULTILABEL: ("micro_map", "macro_map", "micro_f1", "macro_f1", "micro_auroc", "macro_auroc"),
    REGRESSION: ("r2", "mae", "rmse"),
    DISTRIBUTION: ("r2", "mae", "rmse", "kl"),
}

# metrics where smaller is better
LOWER_IS_BETTER = {"mae", "rmse", "kl"}


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    n_outputs: int
    loss: str = ""
    pos_weight: float = 12.0
    metrics: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown task kind {self.kind!r}; expected one of {KINDS}")
        if self.n_outputs < 1:
            raise ConfigError("n_outputs must be at least 1")
        if not self.loss:
            object.__setattr__(self, "loss", COMPATIBLE_LOSSES[self.kind][0])
        if self.loss not in COMPATIBLE_LOSSES[self.kind]:
            raise ConfigError(f"loss {self.loss!r} does not fit a {self.kind} task")
        if self.pos_weight <= 0:
            raise ConfigError("pos_weight must be positive")
        if not self.metrics:
            object.__setattr__(self, "metrics", DEFAULT_METRICS[self.kind])

    @property
    def primary_metric(self) -> str:
        return self.metrics[0]
