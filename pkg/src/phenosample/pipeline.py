"""Pipeline stages. Each stage reads earlier artifacts from the output
directory and writes its own, so stages can be rerun independently."""

from __future__ import annotations

import logging
import re
from dataclasses import asdict
from pathlib import Path

from .catalog import build_dataset, open_catalog, read_selections, write_selections
from .config import PipelineConfig
from .errors import ConfigError
from .geogrid import generate_grid, read_points, write_points
from .manifest import (ManifestHeader, build_manifest, creation_timestamp, summarize,
                       write_manifest)
from .phenology import (PhenoDates, VARIABLES, detect_transitions,
                        fill_missing, median_phenology, pheno_record, read_daily_csv,
                        read_pheno_table, season_windows, windows_from_record,
                        write_pheno_table)
from .raster import read_raster
from .sampler import (attributes_from_rasters, location_weight, read_attributes,
                      read_weights, write_weights)

log = logging.getLogger(__name__)

GRID_FILE = "grid.jsonl"
PHENO_FILE = "pheno.jsonl"
SELECTION_FILE = "selections.jsonl"
WEIGHTS_FILE = "weights.jsonl"
MANIFEST_FILE = "manifest.jsonl"


def _out(cfg: PipelineConfig, name: str) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir / name


def _need(cfg: PipelineConfig, name: str) -> Path:
    path = cfg.output_dir / name
    if not path.exists():
        raise ConfigError(f"{path} missing; run the stage that produces it first")
    return path


def _require(value, key: str):
    if value is None:
        raise ConfigError(f"paths.{key} is required for this stage")
    return value


def stage_grid(cfg: PipelineConfig) -> dict:
    mask = read_raster(_require(cfg.paths.land_mask, "land_mask"))
    points = generate_grid(cfg.grid, mask)
    write_points(points, _out(cfg, GRID_FILE))
    return {"points": len(points)}


def _yearly_dates_from_rasters(points, directory: Path, years) -> dict[int, list[PhenoDates]]:
    pattern = re.compile(r"^(%s)_(\d{4})\.json$" % "|".join(VARIABLES))
    found: dict[int, dict[str, Path]] = {}
    for path in sorted(Path(directory).glob("*.json")):
        m = pattern.match(path.name)
        if m and years[0] <= int(m.group(2)) <= years[-1]:
            found.setdefault(int(m.group(2)), {})[m.group(1)] = path
    if not found:
        raise ConfigError(f"no <variable>_<year> rasters for {years[0]}-{years[-1]} in {directory}")
    lats = [p.lat for p in points]
    lons = [p.lon for p in points]
    per_point: dict[int, list[PhenoDates]] = {p.id: [] for p in points}
    for year in sorted(found):
        sampled = {}
        for var in VARIABLES:
            if var in found[year]:
                sampled[var] = read_raster(found[year][var]).sample(lats, lons)
        for i, p in enumerate(points):
            vals = {}
            for var in VARIABLES:
                v = sampled[var][i] if var in sampled else float("nan")
                vals[var] = None if v != v else int(round(v))
            per_point[p.id].append(PhenoDates(**vals))
    return per_point


def stage_pheno(cfg: PipelineConfig) -> dict:
    points = read_points(_need(cfg, GRID_FILE))
    year_length = cfg.seasons.year_length
    records = []
    if cfg.seasons.mode == "calendar":
        wins = season_windows(None, "calendar", year_length)
        records = [pheno_record(p.id, PhenoDates(), wins) for p in points]
        write_pheno_table(records, _out(cfg, PHENO_FILE))
        return {"points": len(points), "gap_filled": 0, "calendar_fallback": 0}

    years = list(range(cfg.selection.year_start, cfg.selection.year_end + 1))
    if cfg.paths.evi_rasters:
        per_year = _yearly_dates_from_rasters(points, Path(cfg.paths.evi_rasters), years)
    elif cfg.paths.evi_csv:
        curves = read_daily_csv(cfg.paths.evi_csv)
        per_year = {
            p.id: [detect_transitions(c, cfg.pheno) for c in curves.get(p.id, [])
                   if years[0] <= c.year <= years[-1]]
            for p in points
        }
    else:
        raise ConfigError("paths.evi_rasters or paths.evi_csv is required for phenological seasons")
    known = {pid: median_phenology(v) for pid, v in per_year.items()}
    filled = fill_missing(points, known)
    n_filled = n_fallback = 0
    for p in points:
        was_filled = not known[p.id].complete
        wins = season_windows(filled[p.id], "phenological", year_length)
        n_filled += was_filled
        n_fallback += wins.fallback
        records.append(pheno_record(p.id, filled[p.id], wins, filled=was_filled))
    write_pheno_table(records, _out(cfg, PHENO_FILE))
    return {"points": len(points), "gap_filled": n_filled, "calendar_fallback": n_fallback}


def stage_select(cfg: PipelineConfig) -> dict:
    points = read_points(_need(cfg, GRID_FILE))
    table = read_pheno_table(_need(cfg, PHENO_FILE))
    windows = {pid: windows_from_record(rec) for pid, rec in table.items()}
    backend = open_catalog(_require(cfg.paths.catalog, "catalog"))
    try:
        report = build_dataset(points, windows, backend, cfg.selection,
                               workers=cfg.run.workers,
                               max_failure_fraction=cfg.run.max_failure_fraction)
    finally:
        if hasattr(backend, "close"):
            backend.close()
    write_selections(report.selections, _out(cfg, SELECTION_FILE))
    return {"points": len(report.selections), "excluded": report.n_excluded,
            "failed": len(report.failures)}


def stage_weights(cfg: PipelineConfig) -> dict:
    points = read_points(_need(cfg, GRID_FILE))
    if cfg.paths.attributes:
        attrs = read_attributes(cfg.paths.attributes)
    elif cfg.paths.ndvi_rasters:
        ndvi = [read_raster(p) for p in cfg.paths.ndvi_rasters]
        mountain = read_raster(cfg.paths.mountain_mask) if cfg.paths.mountain_mask else None
        attrs = attributes_from_rasters(points, ndvi, mountain)
    else:
        raise ConfigError("paths.ndvi_rasters or paths.attributes is required for weights")
    weights = [location_weight(a, cfg.weights) for a in sorted(attrs, key=lambda a: a.point_id)]
    write_weights(weights, _out(cfg, WEIGHTS_FILE))
    return {
        "points": len(weights),
        "nonveg": sum("nonveg" in w.factors for w in weights),
        "mountain": sum("mountain" in w.factors for w in weights),
    }


def manifest_header(cfg: PipelineConfig) -> ManifestHeader:
    return ManifestHeader(
        grid=asdict(cfg.grid),
        policy=asdict(cfg.selection),
        pheno={**asdict(cfg.pheno), "mode": cfg.seasons.mode},
        weights=asdict(cfg.weights),
        created=creation_timestamp(),
    )


def stage_manifest(cfg: PipelineConfig) -> dict:
    points = read_points(_need(cfg, GRID_FILE))
    table = read_pheno_table(_need(cfg, PHENO_FILE))
    windows = {pid: windows_from_record(rec) for pid, rec in table.items()}
    selections = read_selections(_need(cfg, SELECTION_FILE))
    weights_path = cfg.output_dir / WEIGHTS_FILE
    weights = read_weights(weights_path) if weights_path.exists() else {}
    manifest = build_manifest(points, selections, windows, weights, manifest_header(cfg),
                              cfg.manifest.patch_px, cfg.manifest.gsd_m)
    write_manifest(manifest, _out(cfg, MANIFEST_FILE))
    return summarize(manifest)


STAGES = {
    "grid": stage_grid,
    "pheno": stage_pheno,
    "select": stage_select,
    "weights": stage_weights,
    "manifest": stage_manifest,
}


def run_all(cfg: PipelineConfig) -> dict:
    return {name: fn(cfg) for name, fn in STAGES.items()}

