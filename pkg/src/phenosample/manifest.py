"""Dataset manifest: a JSON-lines file with one header line and one line per location.

See ``docs/manifest.md`` for the field-by-field format.
"""

from __future__ import annotations

import datetime as dt
import io
import json
import os
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import MANIFEST_FORMAT_VERSION
from .catalog import SeasonalSelection, SelectionPolicy, day_of_year_365
from .errors import PhenoSampleError, ValidationError
from .geogrid import GeoPoint, GridSpec
from .phenology import PhenoConfig, SeasonWindows
from .sampler import LocationWeight, WeightPolicy

FORMAT_NAME = "phenosample-manifest"
SUPPORTED_VERSIONS = (1,)


@dataclass
class SeasonEntry:
    season: int
    start: int
    end: int
    target: int
    scene_id: str
    acquisition: str  # ISO date
    cloud_fraction: float


@dataclass
class ManifestRecord:
    point_id: int
    lat: float
    lon: float
    seasons: list
    weight: float = 1.0
    patch_px: int = 256
    gsd_m: float = 10.0

    @property
    def patch_extent_m(self) -> float:
        return self.patch_px * self.gsd_m

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: Mapping) -> "ManifestRecord":
        known = {"point_id", "lat", "lon", "seasons", "weight", "patch_px", "gsd_m"}
        extra = set(obj) - known
        if extra:
            raise KeyError(f"unknown record keys {sorted(extra)}")
        return cls(
            point_id=obj["point_id"],
            lat=obj["lat"],
            lon=obj["lon"],
            seasons=[SeasonEntry(**s) for s in obj["seasons"]],
            weight=obj["weight"],
            patch_px=obj.get("patch_px", 256),
            gsd_m=obj.get("gsd_m", 10.0),
        )


@dataclass
class ManifestHeader:
    grid: dict = field(default_factory=lambda: asdict(GridSpec()))
    policy: dict = field(default_factory=lambda: asdict(SelectionPolicy()))
    pheno: dict = field(default_factory=lambda: {**asdict(PhenoConfig()), "mode": "phenological"})
    weights: dict = field(default_factory=lambda: asdict(WeightPolicy()))
    created: str = "1970-01-01T00:00:00Z"
    format: str = FORMAT_NAME
    format_version: int = MANIFEST_FORMAT_VERSION

    @property
    def selection_policy(self) -> SelectionPolicy:
        return SelectionPolicy(**self.policy)


@dataclass
class DatasetManifest:
    header: ManifestHeader
    records: list = field(default_factory=list)


def creation_timestamp() -> str:
    """Timestamp for new manifests.

    Honours ``SOURCE_DATE_EPOCH`` and otherwise uses the Unix epoch, so
    rebuilding from identical inputs yields identical bytes.
    """
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return dt.datetime.fromtimestamp(epoch, dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# --- validation -------------------------------------------------------------


def _check_header(obj: Mapping, line: int = 1) -> ManifestHeader:
    if not isinstance(obj, dict) or obj.get("format") != FORMAT_NAME:
        raise ValidationError("format", f"not a {FORMAT_NAME} file", line)
    version = obj.get("format_version")
    if version not in SUPPORTED_VERSIONS:
        raise ValidationError("format version", f"unsupported format_version {version!r}", line)
    try:
        header = ManifestHeader(**obj)
        header.selection_policy
        GridSpec(**header.grid)
        PhenoConfig(**{k: v for k, v in header.pheno.items() if k != "mode"})
        WeightPolicy(**header.weights)
    except (TypeError, ValueError) as exc:
        raise ValidationError("header", str(exc), line) from exc
    return header


def validate_record(rec: ManifestRecord, policy: SelectionPolicy, line=None) -> None:
    n = len(rec.seasons)
    if n < policy.min_images:
        raise ValidationError("min seasons", f"point {rec.point_id} has {n} season(s), "
                              f"need at least {policy.min_images}", line)
    if n > 4:
        raise ValidationError("max seasons", f"point {rec.point_id} has {n} seasons", line)
    if not isinstance(rec.point_id, int) or isinstance(rec.point_id, bool) or rec.point_id < 0:
        raise ValidationError("point id", f"bad point_id {rec.point_id!r}", line)
    if not (-90 <= rec.lat <= 90 and -180 <= rec.lon <= 180):
        raise ValidationError("coordinates", f"point {rec.point_id} at ({rec.lat}, {rec.lon})", line)
    if not rec.weight > 0:
        raise ValidationError("weight", f"point {rec.point_id} weight {rec.weight} not positive", line)
    if not (isinstance(rec.patch_px, int) and rec.patch_px > 0 and rec.gsd_m > 0):
        raise ValidationError("patch", f"point {rec.point_id} patch {rec.patch_px} px @ {rec.gsd_m} m", line)
    seen = set()
    for s in rec.seasons:
        if s.season not in (0, 1, 2, 3):
            raise ValidationError("season index", f"point {rec.point_id} season {s.season}", line)
        if s.season in seen:
            raise ValidationError("duplicate season", f"point {rec.point_id} season {s.season}", line)
        seen.add(s.season)
        if not 0 <= s.cloud_fraction < policy.max_cloud:
            raise ValidationError("cloud bound", f"point {rec.point_id} scene {s.scene_id} "
                                  f"cloud {s.cloud_fraction} >= {policy.max_cloud}", line)
        try:
            when = dt.date.fromisoformat(s.acquisition)
        except (TypeError, ValueError) as exc:
            raise ValidationError("acquisition", f"bad date {s.acquisition!r}", line) from exc
        if not policy.year_start <= when.year <= policy.year_end:
            raise ValidationError("year range", f"scene {s.scene_id} acquired {when}", line)
        length = (s.end - s.start) % 365 or 365
        if not (1 <= s.start <= 366 and (day_of_year_365(when) - s.start) % 365 < length):
            raise ValidationError("window", f"scene {s.scene_id} acquired {when} outside "
                                  f"[{s.start}, {s.end})", line)
    if sorted(seen) != [s.season for s in rec.seasons]:
        raise ValidationError("season order", f"point {rec.point_id} seasons not ascending", line)


def validate(manifest: DatasetManifest) -> None:
    policy = manifest.header.selection_policy
    prev = None
    for i, rec in enumerate(manifest.records):
        validate_record(rec, policy, line=i + 2)
        if prev is not None and rec.point_id <= prev:
            rule = "duplicate point_id" if rec.point_id == prev else "point order"
            raise ValidationError(rule, f"point_id {rec.point_id} after {prev}", i + 2)
        prev = rec.point_id


# --- io ---------------------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, allow_nan=False)


def write_manifest(manifest: DatasetManifest, destination) -> None:
    validate(manifest)
    buf = io.StringIO()
    buf.write(_dumps(asdict(manifest.header)) + "\n")
    for rec in manifest.records:
        buf.write(_dumps(rec.to_json()) + "\n")
    path = Path(destination)
    try:
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise PhenoSampleError(f"cannot write manifest {path}: {exc}") from exc


def iter_manifest(source):
    """Yield the header, then each record, validating as it streams."""
    path = Path(source)
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise PhenoSampleError(f"cannot read manifest {path}: {exc}") from exc
    with fh:
        header = None
        policy = None
        prev = None
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError("json", f"malformed line: {exc.msg}", lineno) from exc
            if header is None:
                header = _check_header(obj, lineno)
                policy = header.selection_policy
                yield header
                continue
            try:
                rec = ManifestRecord.from_json(obj)
            except (KeyError, TypeError) as exc:
                raise ValidationError("record", f"malformed record: {exc}", lineno) from exc
            validate_record(rec, policy, lineno)
            if prev is not None and rec.point_id <= prev:
                rule = "duplicate point_id" if rec.point_id == prev else "point order"
                raise ValidationError(rule, f"point_id {rec.point_id} after {prev}", lineno)
            prev = rec.point_id
            yield rec
        if header is None:
            raise ValidationError("header", "empty manifest file", 1)


def read_manifest(source) -> DatasetManifest:
    items = iter_manifest(source)
    header = next(items)
    return DatasetManifest(header, list(items))


# --- assembly & reporting ---------------------------------------------------


def build_manifest(points: Sequence[GeoPoint], selections: Iterable[SeasonalSelection],
                   windows_map: Mapping[int, SeasonWindows],
                   weights: Mapping[int, LocationWeight], header: ManifestHeader,
                   patch_px: int = 256, gsd_m: float = 10.0) -> DatasetManifest:
    by_id = {p.id: p for p in points}
    records = []
    for sel in sorted(selections, key=lambda s: s.point_id):
        if sel.excluded:
            continue
        p = by_id[sel.point_id]
        wins = windows_map[sel.point_id]
        entries = []
        for i, scene in enumerate(sel.scenes):
            if scene is None:
                continue
            w = wins[i]
            entries.append(SeasonEntry(i, w.start, w.end, w.target, scene.scene_id,
                                       scene.acquisition.isoformat(), scene.cloud_fraction))
        weight = weights[sel.point_id].weight if sel.point_id in weights else 1.0
        records.append(ManifestRecord(p.id, p.lat, p.lon, entries, weight, patch_px, gsd_m))
    return DatasetManifest(header, records)


def summarize(manifest: DatasetManifest) -> dict:
    coverage = Counter(len(r.seasons) for r in manifest.records)
    clouds = [s.cloud_fraction for r in manifest.records for s in r.seasons]
    weights = Counter(repr(r.weight) for r in manifest.records)
    return {
        "n_records": len(manifest.records),
        "n_scenes": len(clouds),
        "coverage": {k: coverage.get(k, 0) for k in (2, 3, 4)},
        "mean_cloud": sum(clouds) / len(clouds) if clouds else 0.0,
        "weight_histogram": dict(sorted(weights.items(), key=lambda kv: float(kv[0]))),
    }
