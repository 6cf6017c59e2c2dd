"""Turn per-pixel biomass maps into per-image bin distributions.

Decile edges are computed over every pixel of the dataset. The lowest
``merge_first`` deciles are dominated by zero-biomass ground pixels and are
merged into one bin, so ten deciles become eight bins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BinSpec:
    edges: np.ndarray  # interior edges after merging; len == n_bins - 1
    decile_edges: np.ndarray  # the raw n_deciles - 1 quantile edges

    @property
    def n_bins(self) -> int:
        return len(self.edges) + 1


def decile_edges(pixel_values: Sequence, n_deciles: int = 10) -> np.ndarray:
    if not len(pixel_values):
        raise ValueError("no images given")
    flat = []
    for i, img in enumerate(pixel_values):
        arr = np.asarray(img, dtype=np.float64).ravel()
        if arr.size == 0:
            raise ValueError(f"image {i} is empty")
        flat.append(arr)
    allpix = np.concatenate(flat)
    qs = np.arange(1, n_deciles) / n_deciles
    return np.quantile(allpix, qs)


def assign_bins(image, spec: BinSpec) -> np.ndarray:
    """Bin index per pixel: the number of interior edges strictly below it."""
    arr = np.asarray(image, dtype=np.float64).ravel()
    return np.searchsorted(spec.edges, arr, side="left")


def image_distribution(image, spec: BinSpec) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("empty image")
    counts = np.bincount(assign_bins(arr, spec), minlength=spec.n_bins)
    return counts / arr.size


def biomassters_bins(pixel_values: Sequence, n_deciles: int = 10,
                     merge_first: int = 3) -> tuple[BinSpec, np.ndarray]:
    if not 1 <= merge_first <= n_deciles:
        raise ValueError("merge_first must be between 1 and n_deciles")
    raw = decile_edges(pixel_values, n_deciles)
    spec = BinSpec(raw[merge_first - 1:], raw)
    dists = np.stack([image_distribution(img, spec) for img in pixel_values])
    return spec, dists
