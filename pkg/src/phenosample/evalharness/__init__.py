from .biomassters import BinSpec, biomassters_bins
from .folds import Fold, FoldPlan, make_folds
from .knn import KnnConfig, grid_search_k, knn_predict
from .metrics import MetricSet, average_precision, compute_metrics, kl_divergence
from .probe import LinearProbe, ProbeConfig, train_linear_probe
from .protocol import run_protocol
from .tasks import TaskSpec

__all__ = [
    "BinSpec", "biomassters_bins", "Fold", "FoldPlan", "make_folds", "KnnConfig",
    "grid_search_k", "knn_predict", "MetricSet", "average_precision", "compute_metrics",
    "kl_divergence", "LinearProbe", "ProbeConfig", "train_linear_probe", "run_protocol",
    "TaskSpec",
]
