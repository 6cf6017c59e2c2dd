"""Pretraining sampling weights and seeded draws.

All randomness goes through ``numpy.random.Generator`` on a PCG64 bit
generator, so a seed reproduces the same stream on every platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DecodeError


@dataclass(frozen=True)
class WeightPolicy:
    nonveg_divisor: float = 4.0
    nonveg_threshold: float = 0.1
    mountain_multiplier: float = 2.0

    def __post_init__(self):
        if self.nonveg_divisor <= 0 or self.mountain_multiplier <= 0:
            raise ConfigError("nonveg_divisor and mountain_multiplier must be positive")
        if self.nonveg_threshold <= 0:
            raise ConfigError("nonveg_threshold must be positive")


@dataclass(frozen=True)
class LocationAttributes:
    point_id: int
    mean_ndvi_per_season: tuple = (None, None, None, None)
    is_mountain: bool = False

    def __post_init__(self):
        for v in self.mean_ndvi_per_season:
            if v is not None and not -1.0 <= v <= 1.0:
                raise ValueError(f"NDVI {v} outside [-1, 1]")


@dataclass
class LocationWeight:
    point_id: int
    weight: float
    factors: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"point_id": self.point_id, "weight": self.weight,
                "factors": self.factors, "flags": self.flags}


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def worker_rng(base_seed: int, worker_index: int) -> np.random.Generator:
    """Independent stream for one worker, derived from (base seed, index)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([base_seed, worker_index])))


def ndvi(b8, b4):
    b8 = np.asarray(b8, dtype=np.float64)
    b4 = np.asarray(b4, dtype=np.float64)
    if (b8 < 0).any() or (b4 < 0).any():
        raise ValueError("reflectances must be non-negative")
    total = b8 + b4
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(total == 0, 0.0, (b8 - b4) / np.where(total == 0, 1.0, total))
    return float(out) if out.ndim == 0 else out


def location_weight(attrs: LocationAttributes, policy: WeightPolicy = WeightPolicy()) -> LocationWeight:
    weight = 1.0
    factors = {}
    flags = []
    present = [v for v in attrs.mean_ndvi_per_season if v is not None]
    if not present:
        flags.append("no_ndvi")
    elif all(v < policy.nonveg_threshold for v in present):
        weight /= policy.nonveg_divisor
        factors["nonveg"] = 1.0 / policy.nonveg_divisor
    if attrs.is_mountain:
        weight *= policy.mountain_multiplier
        factors["mountain"] = policy.mountain_multiplier
    return LocationWeight(attrs.point_id, weight, factors, flags)


def draw_locations(weights: Sequence[float], n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` categorical draws with replacement, probability proportional to weight."""
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ValueError("weights must be non-empty")
    if not np.all(np.isfinite(w)) or (w <= 0).any():
        raise ValueError("all weights must be finite and positive")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    cdf = np.cumsum(w)
    u = rng.random(n) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, w.size - 1)


def draw_seasons(available: Sequence[int], m: int, rng: np.random.Generator) -> list[int]:
    """``m`` distinct seasons, in random order. Never repeats a season."""
    available = list(available)
    if len(set(available)) != len(available):
        raise ValueError("available seasons contain duplicates")
    if not 1 <= m <= len(available):
        raise ValueError(f"cannot draw {m} distinct seasons from {len(available)}")
    order = rng.permutation(len(available))[:m]
    return [available[i] for i in order]


def attributes_from_rasters(points, ndvi_rasters: Sequence, mountain_raster=None) -> list[LocationAttributes]:
    lats = np.array([p.lat for p in points])
    lons = np.array([p.lon for p in points])
    per_season = [r.sample(lats, lons) if r is not None else np.full(len(points), np.nan)
                  for r in ndvi_rasters]
    mountain = (mountain_raster.sample(lats, lons) if mountain_raster is not None
                else np.zeros(len(points)))
    out = []
    for i, p in enumerate(points):
        vals = tuple(None if math.isnan(s[i]) else float(s[i]) for s in per_season)
        out.append(LocationAttributes(p.id, vals, bool(mountain[i] == 1.0)))
    return out


def read_attributes(path) -> list[LocationAttributes]:
    """JSON-lines ``{"point_id", "mean_ndvi": [4 values or null], "is_mountain"}``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                ndvi_vals = tuple(obj.get("mean_ndvi") or (None,) * 4)
                out.append(LocationAttributes(int(obj["point_id"]), ndvi_vals,
                                              bool(obj.get("is_mountain", False))))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DecodeError(f"{path}:{lineno}: bad attribute record: {exc}") from exc
    return out


def write_weights(weights: Iterable[LocationWeight], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w in weights:
            fh.write(json.dumps(w.to_json(), sort_keys=True) + "\n")


def read_weights(path) -> dict[int, LocationWeight]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out[int(obj["point_id"])] = LocationWeight(
                    int(obj["point_id"]), float(obj["weight"]),
                    dict(obj.get("factors", {})), list(obj.get("flags", [])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DecodeError(f"{path}:{lineno}: bad weight record: {exc}") from exc
    return out


def weighted_season_batches(weights: Sequence[float], available: Sequence[Sequence[int]],
                            n: int, m: int, rng: np.random.Generator,
                            ) -> list[tuple[int, list[int]]]:
    """Draw ``n`` locations by weight and ``m`` distinct seasons for each.

    Locations with fewer than ``m`` seasons contribute all of theirs.
    """
    picks = draw_locations(weights, n, rng)
    out = []
    for i in picks.tolist():
        seasons = available[i]
        out.append((i, draw_seasons(seasons, min(m, len(seasons)), rng)))
    return out

