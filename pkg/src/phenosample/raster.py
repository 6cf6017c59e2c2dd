"""Minimal lat/lon raster container and its on-disk format.

A raster lives in two files: ``<name>.json`` holding the header
(``lat0, lon0, dlat, dlon, rows, cols, nodata``) and ``<name>.bin`` holding
``rows * cols`` little-endian float32 values in row-major order. ``lat0`` /
``lon0`` are the coordinates of the outer corner of cell (0, 0); ``dlat`` may
be negative for north-up rasters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DecodeError

HEADER_KEYS = ("lat0", "lon0", "dlat", "dlon", "rows", "cols", "nodata")


@dataclass(eq=False)
class Raster:
    lat0: float
    lon0: float
    dlat: float
    dlon: float
    values: np.ndarray
    nodata: float = -9999.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.size == 0:
            raise ConfigError("raster values must be a non-empty 2-D grid")
        if self.dlat == 0 or self.dlon == 0:
            raise ConfigError("raster cell sizes must be nonzero")
        lat_a, lat_b = self.lat0, self.lat0 + self.rows * self.dlat
        lon_a, lon_b = self.lon0, self.lon0 + self.cols * self.dlon
        eps = 1e-9
        if min(lat_a, lat_b) < -90 - eps or max(lat_a, lat_b) > 90 + eps:
            raise ConfigError("raster latitude extent outside [-90, 90]")
        if min(lon_a, lon_b) < -180 - eps or max(lon_a, lon_b) > 180 + eps:
            raise ConfigError("raster longitude extent outside [-180, 180]")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def header(self) -> dict:
        return {
            "lat0": self.lat0,
            "lon0": self.lon0,
            "dlat": self.dlat,
            "dlon": self.dlon,
            "rows": self.rows,
            "cols": self.cols,
            "nodata": self.nodata,
        }

    def cell_index(self, lat, lon):
        """Row/column of the cell containing each coordinate, -1 if outside."""
        lat = np.asarray(lat, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        r = np.floor((lat - self.lat0) / self.dlat).astype(np.int64)
        c = np.floor((lon - self.lon0) / self.dlon).astype(np.int64)
        inside = (r >= 0) & (r < self.rows) & (c >= 0) & (c < self.cols)
        return np.where(inside, r, -1), np.where(inside, c, -1)

    def sample(self, lat, lon) -> np.ndarray:
        """Cell values at the given coordinates; NaN for no-data or outside."""
        r, c = self.cell_index(lat, lon)
        out = np.full(r.shape, np.nan)
        ok = r >= 0
        vals = self.values[r[ok], c[ok]]
        vals = np.where(vals == self.nodata, np.nan, vals)
        out[ok] = vals
        return out

    @classmethod
    def global_constant(cls, value: float, dlat: float = 1.0, dlon: float = 1.0):
        rows = int(round(180 / abs(dlat)))
        cols = int(round(360 / abs(dlon)))
        return cls(-90.0, -180.0, dlat, dlon, np.full((rows, cols), value))


def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".bin"):
        p = p.with_suffix("")
    return p.with_suffix(".json"), p.with_suffix(".bin")


def write_raster(raster: Raster, path) -> None:
    header_path, data_path = _paths(path)
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header_path.write_text(json.dumps(raster.header(), sort_keys=True) + "\n")
    raster.values.astype("<f4").tofile(data_path)


def read_raster(path) -> Raster:
    header_path, data_path = _paths(path)
    try:
        header = json.loads(header_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DecodeError(f"{header_path}: cannot read raster header: {exc}") from exc
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise DecodeError(f"{header_path}: header missing keys {missing}")
    rows, cols = int(header["rows"]), int(header["cols"])
    data = np.fromfile(data_path, dtype="<f4")
    if data.size != rows * cols:
        raise DecodeError(
            f"{data_path}: expected {rows * cols} values, found {data.size}"
        )
    nodata = float(header["nodata"])
    values = data.reshape(rows, cols).astype(np.float64)
    # float32 storage rounds the sentinel; compare in float32 space.
    if not math.isnan(nodata):
        values[data.reshape(rows, cols) == np.float32(nodata)] = nodata
    return Raster(
        float(header["lat0"]),
        float(header["lon0"]),
        float(header["dlat"]),
        float(header["dlon"]),
        values,
        nodata,
    )
