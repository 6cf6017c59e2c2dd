"""Equal-area sampling grid over a land mask.

Latitude rows are spaced by the angular equivalent of the grid spacing and
each row gets a number of longitudes proportional to its circumference, so
every point stands for roughly ``spacing_km ** 2`` of surface. Points sit at
cell centres (half-step offsets in both directions).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DecodeError
from .raster import Raster

EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True)
class GeoPoint:
    id: int
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of range")


@dataclass(frozen=True)
class GridSpec:
    spacing_km: float = 23.0
    earth_radius_km: float = EARTH_RADIUS_KM

    def __post_init__(self):
        if not self.earth_radius_km > 0:
            raise ConfigError("earth_radius_km must be positive")
        if not 0 < self.spacing_km < math.pi * self.earth_radius_km:
            raise ConfigError(
                "spacing_km must be in (0, pi * earth_radius_km), got "
                f"{self.spacing_km}"
            )

    @property
    def row_step_deg(self) -> float:
        return math.degrees(self.spacing_km / self.earth_radius_km)

    @property
    def n_rows(self) -> int:
        return int(math.floor(180.0 / self.row_step_deg))


def round_half_away(x):
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def row_latitudes(spec: GridSpec) -> np.ndarray:
    i = np.arange(spec.n_rows, dtype=np.float64)
    return -90.0 + (i + 0.5) * spec.row_step_deg


def row_counts(spec: GridSpec, lats: np.ndarray | None = None) -> np.ndarray:
    """Number of candidate longitudes in each latitude row."""
    if lats is None:
        lats = row_latitudes(spec)
    circumference = 2.0 * math.pi * spec.earth_radius_km * np.cos(np.radians(lats))
    n = round_half_away(circumference / spec.spacing_km).astype(np.int64)
    return np.maximum(n, 1)


def grid_arrays(spec: GridSpec, land_mask: Raster) -> tuple[np.ndarray, np.ndarray]:
    """Latitudes and longitudes of all land grid points, in (lat, lon) order."""
    lats = row_latitudes(spec)
    counts = row_counts(spec, lats)
    out_lat, out_lon = [], []
    for lat, n in zip(lats, counts):
        lon = -180.0 + (np.arange(n, dtype=np.float64) + 0.5) * (360.0 / n)
        vals = land_mask.sample(np.full(n, lat), lon)
        keep = vals == 1.0
        if keep.any():
            out_lon.append(lon[keep])
            out_lat.append(np.full(int(keep.sum()), lat))
    if not out_lat:
        return np.empty(0), np.empty(0)
    return np.concatenate(out_lat), np.concatenate(out_lon)


def generate_grid(spec: GridSpec, land_mask: Raster) -> list[GeoPoint]:
    lats, lons = grid_arrays(spec, land_mask)
    return [
        GeoPoint(i, float(a), float(b))
        for i, (a, b) in enumerate(zip(lats.tolist(), lons.tolist()))
    ]


def haversine_km(a: GeoPoint, b: GeoPoint, radius_km: float = EARTH_RADIUS_KM) -> float:
    lat1, lon1 = math.radians(a.lat), math.radians(a.lon)
    lat2, lon2 = math.radians(b.lat), math.radians(b.lon)
    h = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2.0 * radius_km * math.asin(min(1.0, math.sqrt(h)))


def write_points(points: Iterable[GeoPoint], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in points:
            fh.write(json.dumps({"id": p.id, "lat": p.lat, "lon": p.lon}) + "\n")


def read_points(path) -> list[GeoPoint]:
    points = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                points.append(GeoPoint(int(obj["id"]), float(obj["lat"]), float(obj["lon"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DecodeError(f"{Path(path)}:{lineno}: bad grid point: {exc}") from exc
    return points


def points_by_id(points: Sequence[GeoPoint]) -> dict[int, GeoPoint]:
    return {p.id: p for p in points}
