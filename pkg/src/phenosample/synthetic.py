"""Deterministic synthetic inputs for the full pipeline.

``make_fixture`` writes a land mask, yearly transition-date rasters, seasonal
NDVI rasters, a mountain mask, a scene catalog and a config file into one
directory. The land mask is trimmed so the grid has exactly ``n_points``
locations.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import numpy as np
import yaml

from .catalog import SceneRecord, write_catalog
from .geogrid import GridSpec, grid_arrays
from .phenology import VARIABLES, DoubleLogistic, detect_transitions, synth_evi
from .raster import Raster, write_raster

NODATA = -9999.0
LAT0, LAT1, LON0, LON1 = -10.0, 70.0, 0.0, 10.0
MASK_RES = 0.05
ATTR_RES = 0.25

# (name, lat range, lon range)
REGIONS = (
    ("tropical", (-2.0, 1.0), (0.0, 3.0)),
    ("desert", (20.0, 22.5), (2.0, 5.0)),
    ("temperate", (45.0, 48.0), (1.0, 4.5)),
    ("boreal", (60.0, 62.5), (0.0, 7.0)),
)


def _region_of(lat: float, lon: float):
    for name, (a, b), (c, d) in REGIONS:
        if a <= lat < b and c <= lon < d:
            return name
    return None


def _land_mask(n_points: int, spec: GridSpec, rng: np.random.Generator) -> Raster:
    rows = int(round((LAT1 - LAT0) / MASK_RES))
    cols = int(round((LON1 - LON0) / MASK_RES))
    values = np.zeros((rows, cols))
    mask = Raster(LAT0, LON0, MASK_RES, MASK_RES, values, NODATA)
    lat_c = LAT0 + (np.arange(rows) + 0.5) * MASK_RES
    lon_c = LON0 + (np.arange(cols) + 0.5) * MASK_RES
    for _, (a, b), (c, d) in REGIONS:
        r = (lat_c >= a) & (lat_c < b)
        k = (lon_c >= c) & (lon_c < d)
        values[np.ix_(r, k)] = 1.0
    lats, lons = grid_arrays(spec, mask)
    if len(lats) < n_points:
        raise ValueError(f"fixture regions only hold {len(lats)} points, need {n_points}")
    drop = rng.choice(len(lats), size=len(lats) - n_points, replace=False)
    r, c = mask.cell_index(lats[drop], lons[drop])
    values[r, c] = 0.0
    return mask


def _attr_grid():
    rows = int(round((LAT1 - LAT0) / ATTR_RES))
    cols = int(round((LON1 - LON0) / ATTR_RES))
    lat_c = LAT0 + (np.arange(rows) + 0.5) * ATTR_RES
    lon_c = LON0 + (np.arange(cols) + 0.5) * ATTR_RES
    return rows, cols, lat_c, lon_c


def _phenology_rasters(out: Path, years, rng: np.random.Generator) -> None:
    rows, cols, lat_c, lon_c = _attr_grid()
    stacks = {(v, y): np.full((rows, cols), NODATA) for v in VARIABLES for y in years}
    for i, lat in enumerate(lat_c):
        for j, lon in enumerate(lon_c):
            region = _region_of(lat, lon)
            # deserts and evergreen tropics have no transition dates
            if region in (None, "desert"):
                continue
            if region == "tropical" and rng.random() < 0.6:
                continue
            center = {"tropical": 150, "temperate": 170, "boreal": 190}[region]
            half = {"tropical": 90, "temperate": 65, "boreal": 40}[region]
            base_center = center + rng.integers(-15, 16)
            for y in years:
                if rng.random() < 0.1:
                    continue
                c = base_center + rng.normal(0, 5)
                params = DoubleLogistic(
                    base=float(rng.uniform(0.05, 0.15)),
                    amplitude=float(rng.uniform(0.3, 0.5)),
                    rise_day=float(c - half), rise_rate=float(rng.uniform(0.08, 0.15)),
                    fall_day=float(c + half), fall_rate=float(rng.uniform(0.05, 0.12)),
                )
                dates = detect_transitions(synth_evi(params, y))
                for v, d in zip(VARIABLES, dates.as_tuple()):
                    if d is not None:
                        stacks[(v, y)][i, j] = d
    for (v, y), values in stacks.items():
        write_raster(Raster(LAT0, LON0, ATTR_RES, ATTR_RES, values, NODATA),
                     out / "evi" / f"{v}_{y}")


def _attribute_rasters(out: Path, rng: np.random.Generator) -> None:
    rows, cols, lat_c, lon_c = _attr_grid()
    ndvi = np.full((4, rows, cols), NODATA)
    mountain = np.zeros((rows, cols))
    for i, lat in enumerate(lat_c):
        for j, lon in enumerate(lon_c):
            region = _region_of(lat, lon)
            if region is None:
                continue
            if region == "desert":
                ndvi[:, i, j] = rng.uniform(0.0, 0.09, size=4)
            elif region == "boreal":
                ndvi[:, i, j] = [0.3, 0.6, 0.35, 0.05]
                mountain[i, j] = 1.0 if lon >= 4.0 else 0.0
            else:
                ndvi[:, i, j] = rng.uniform(0.2, 0.8, size=4)
                if region == "tropical":
                    ndvi[rng.random(4) < 0.3, i, j] = NODATA
            if region == "temperate" and lat >= 47.0:
                mountain[i, j] = 1.0
    for s in range(4):
        write_raster(Raster(LAT0, LON0, ATTR_RES, ATTR_RES, ndvi[s], NODATA),
                     out / "ndvi" / f"season_{s}")
    write_raster(Raster(LAT0, LON0, ATTR_RES, ATTR_RES, mountain, NODATA), out / "mountains")


def _catalog(out: Path, lats, lons, years, rng: np.random.Generator) -> None:
    records = []
    for pid, (lat, lon) in enumerate(zip(lats, lons)):
        region = _region_of(lat, lon)
        cloudy = region == "tropical"
        for y in years:
            day = dt.date(y, 1, 1) + dt.timedelta(days=int(rng.integers(0, 20)))
            while day.year == y:
                if cloudy:
                    cloud = float(rng.uniform(0.15, 1.0)) if rng.random() < 0.5 else 1.0
                else:
                    cloud = float(rng.beta(1.2, 3.0))
                cloud = round(cloud, 4)
                records.append(SceneRecord(f"S2_{pid:05d}_{day:%Y%m%d}", pid, day, cloud))
                day += dt.timedelta(days=int(rng.integers(15, 30)))
    write_catalog(records, out / "catalog.jsonl")


def make_fixture(directory, n_points: int = 500, seed: int = 0) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.Generator(np.random.PCG64(seed))
    spec = GridSpec()
    years = list(range(2017, 2025))
    mask = _land_mask(n_points, spec, rng)
    write_raster(mask, out / "land_mask")
    _phenology_rasters(out, years, rng)
    _attribute_rasters(out, rng)
    lats, lons = grid_arrays(spec, mask)
    _catalog(out, lats, lons, years, rng)
    config = {
        "seed": seed,
        "grid": {"spacing_km": spec.spacing_km},
        "selection": {"max_cloud": 0.2, "year_start": 2017, "year_end": 2024, "min_images": 2},
        "run": {"workers": 8},
        "paths": {
            "land_mask": "land_mask.json",
            "evi_rasters": "evi",
            "catalog": "catalog.jsonl",
            "ndvi_rasters": [f"ndvi/season_{s}.json" for s in range(4)],
            "mountain_mask": "mountains.json",
            "output_dir": "out",
        },
    }
    (out / "config.yaml").write_text(yaml.safe_dump(config, sort_keys=True))
    return out
