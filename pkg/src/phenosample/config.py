"""Pipeline configuration: one YAML (or JSON) file with a section per stage."""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .catalog import SelectionPolicy
from .errors import ConfigError
from .evalharness.knn import KnnConfig
from .evalharness.probe import ProbeConfig
from .geogrid import GridSpec
from .phenology import CALENDAR, PHENOLOGICAL, PhenoConfig
from .sampler import WeightPolicy


@dataclass(frozen=True)
class SeasonOptions:
    mode: str = PHENOLOGICAL
    year_length: int = 365

    def __post_init__(self):
        if self.mode not in (PHENOLOGICAL, CALENDAR):
            raise ConfigError(f"mode must be {PHENOLOGICAL!r} or {CALENDAR!r}")
        if self.year_length not in (365, 366):
            raise ConfigError("year_length must be 365 or 366")


@dataclass(frozen=True)
class RunOptions:
    workers: int = 8
    max_failure_fraction: float = 0.0

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not 0 <= self.max_failure_fraction <= 1:
            raise ConfigError("max_failure_fraction must be in [0, 1]")


@dataclass(frozen=True)
class FoldOptions:
    k_folds: int = 10
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.k_folds < 1:
            raise ConfigError("k_folds must be positive")
        if not 0 <= self.val_fraction < 1:
            raise ConfigError("val_fraction must be in [0, 1)")


@dataclass(frozen=True)
class ManifestOptions:
    patch_px: int = 256
    gsd_m: float = 10.0

    def __post_init__(self):
        if self.patch_px < 1 or self.gsd_m <= 0:
            raise ConfigError("patch_px and gsd_m must be positive")


@dataclass(frozen=True)
class Paths:
    land_mask: Optional[str] = None
    evi_rasters: Optional[str] = None  # directory of <variable>_<year> rasters
    evi_csv: Optional[str] = None  # per-point daily EVI
    catalog: Optional[str] = None  # JSON-lines file or http(s) URL
    ndvi_rasters: Optional[list] = None  # four rasters, one per season
    mountain_mask: Optional[str] = None
    attributes: Optional[str] = None  # JSON-lines alternative to the rasters
    output_dir: str = "out"


SECTIONS = {
    "grid": GridSpec,
    "pheno": PhenoConfig,
    "seasons": SeasonOptions,
    "selection": SelectionPolicy,
    "run": RunOptions,
    "weights": WeightPolicy,
    "knn": KnnConfig,
    "probe": ProbeConfig,
    "folds": FoldOptions,
    "manifest": ManifestOptions,
    "paths": Paths,
}
TOP_LEVEL = {"seed"}


@dataclass(frozen=True)
class PipelineConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    pheno: PhenoConfig = field(default_factory=PhenoConfig)
    seasons: SeasonOptions = field(default_factory=SeasonOptions)
    selection: SelectionPolicy = field(default_factory=SelectionPolicy)
    run: RunOptions = field(default_factory=RunOptions)
    weights: WeightPolicy = field(default_factory=WeightPolicy)
    knn: KnnConfig = field(default_factory=KnnConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    folds: FoldOptions = field(default_factory=FoldOptions)
    manifest: ManifestOptions = field(default_factory=ManifestOptions)
    paths: Paths = field(default_factory=Paths)
    seed: int = 0

    @property
    def output_dir(self) -> Path:
        return Path(self.paths.output_dir)

    def replace(self, section: str, **changes) -> "PipelineConfig":
        import dataclasses

        sub = dataclasses.replace(getattr(self, section), **changes)
        return dataclasses.replace(self, **{section: sub})


def _all_keys() -> list[str]:
    keys = list(SECTIONS) + sorted(TOP_LEVEL)
    for name, cls in SECTIONS.items():
        keys += [f"{name}.{f.name}" for f in fields(cls)]
    return keys


def _unknown(key: str, choices, where: str) -> ConfigError:
    candidates = list(choices) + _all_keys()
    bare = {c.split(".")[-1]: c for c in candidates}
    hits = difflib.get_close_matches(key, list(bare), n=1, cutoff=0.6)
    hint = f"; did you mean {bare[hits[0]]!r}?" if hits else ""
    return ConfigError(f"unknown key {key!r} in {where}{hint}")


def _coerce(cls, name: str, value):
    if cls is KnnConfig and name == "k_grid" or cls is ProbeConfig and name == "betas":
        return tuple(value)
    return value


def _resolve_paths(raw: Mapping, base: Path) -> dict:
    out = {}
    for key, value in raw.items():
        if value is None:
            out[key] = None
        elif key == "ndvi_rasters":
            if not isinstance(value, list) or len(value) != 4:
                raise ConfigError("paths.ndvi_rasters must list four rasters (one per season)")
            out[key] = [str(base / v) for v in value]
        elif key == "catalog" and str(value).startswith(("http://", "https://")):
            out[key] = str(value)
        else:
            out[key] = str(base / value)
    for key, value in out.items():
        if key == "output_dir" or value is None:
            continue
        items = value if isinstance(value, list) else [value]
        for item in items:
            if item.startswith(("http://", "https://")):
                continue
            p = Path(item)
            if not (p.exists() or p.with_suffix(".json").exists()):
                raise ConfigError(f"paths.{key}: {item} does not exist")
    return out


def config_from_mapping(raw: Mapping[str, Any] | None, base_dir=".") -> PipelineConfig:
    raw = dict(raw or {})
    kwargs: dict = {}
    for key, value in raw.items():
        if key in TOP_LEVEL:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{key} must be an integer")
            kwargs[key] = value
            continue
        if key not in SECTIONS:
            raise _unknown(key, list(SECTIONS) + sorted(TOP_LEVEL), "config")
        cls = SECTIONS[key]
        if not isinstance(value, Mapping):
            raise ConfigError(f"section {key!r} must be a mapping")
        names = {f.name for f in fields(cls)}
        for sub in value:
            if sub not in names:
                raise _unknown(sub, [f"{key}.{n}" for n in names], f"section {key!r}")
        if cls is Paths:
            value = _resolve_paths(value, Path(base_dir))
        try:
            kwargs[key] = cls(**{k: _coerce(cls, k, v) for k, v in value.items()})
        except ConfigError as exc:
            raise ConfigError(f"{key}: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: invalid value: {exc}") from exc
    return PipelineConfig(**kwargs)


def parse_config(source=None) -> PipelineConfig:
    """Load and validate a config file; ``None`` or an empty file gives defaults."""
    if source is None:
        return PipelineConfig()
    path = Path(source)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    if raw is not None and not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_mapping(raw, path.parent)
