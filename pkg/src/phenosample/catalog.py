"""Scene catalogs and per-season scene selection under a cloud budget."""

from __future__ import annotations

import datetime as dt
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Protocol, Sequence

import httpx

from .errors import ConfigError, DecodeError, PhenoSampleError, TransportError
from .geogrid import GeoPoint
from .phenology import SeasonWindows, Window

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SceneRecord:
    scene_id: str
    point_id: int
    acquisition: dt.date
    cloud_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.cloud_fraction <= 1.0:
            raise ValueError(f"cloud_fraction {self.cloud_fraction} outside [0, 1]")

    @property
    def doy(self) -> int:
        return day_of_year_365(self.acquisition)

    def to_json(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "point_id": self.point_id,
            "datetime": self.acquisition.isoformat() + "T00:00:00Z",
            "cloud_fraction": self.cloud_fraction,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "SceneRecord":
        stamp = str(obj["datetime"])
        if stamp.endswith("Z"):
            stamp = stamp[:-1] + "+00:00"
        when = dt.datetime.fromisoformat(stamp)
        if when.tzinfo is not None:
            when = when.astimezone(dt.timezone.utc)
        return cls(
            scene_id=str(obj["scene_id"]),
            point_id=int(obj["point_id"]),
            acquisition=when.date(),
            cloud_fraction=float(obj["cloud_fraction"]),
        )


@dataclass(frozen=True)
class SelectionPolicy:
    max_cloud: float = 0.20
    year_start: int = 2017
    year_end: int = 2024
    min_images: int = 2

    def __post_init__(self):
        if not 0 < self.max_cloud <= 1:
            raise ConfigError(f"max_cloud must be in (0, 1], got {self.max_cloud}")
        if self.year_start > self.year_end:
            raise ConfigError("year_start must not exceed year_end")
        if self.min_images < 1:
            raise ConfigError("min_images must be at least 1")


@dataclass
class SeasonalSelection:
    point_id: int
    scenes: list  # four entries, SceneRecord or None, in season order
    excluded: bool = False
    reason: Optional[str] = None

    @property
    def n_chosen(self) -> int:
        return sum(s is not None for s in self.scenes)

    def to_json(self) -> dict:
        return {
            "point_id": self.point_id,
            "scenes": [s.to_json() if s is not None else None for s in self.scenes],
            "excluded": self.excluded,
            "reason": self.reason,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "SeasonalSelection":
        return cls(
            int(obj["point_id"]),
            [SceneRecord.from_json(s) if s is not None else None for s in obj["scenes"]],
            bool(obj["excluded"]),
            obj.get("reason"),
        )


def day_of_year_365(day: dt.date) -> int:
    """Day of year on a 365-day calendar; Feb 29 shares Feb 28's index."""
    doy = day.timetuple().tm_yday
    if _is_leap(day.year) and doy >= 60:
        doy -= 1
    return doy


def in_window(record: SceneRecord, window: Window, policy: SelectionPolicy) -> bool:
    if not policy.year_start <= record.acquisition.year <= policy.year_end:
        return False
    return window.contains(record.doy)


def _is_leap(year: int) -> bool:
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def _first_date(doy: int, year: int) -> dt.date:
    """Earliest calendar date in ``year`` whose 365-day index is ``doy`` (366 = next Jan 1)."""
    shift = 1 if _is_leap(year) and doy >= 60 else 0
    return dt.date(year, 1, 1) + dt.timedelta(days=doy - 1 + shift)


def date_ranges(window: Window, policy: SelectionPolicy) -> list[tuple[dt.date, dt.date]]:
    """Half-open date ranges covering exactly the days of ``window`` in each policy year."""
    inside = [window.contains(d) for d in range(1, 366)] + [False]
    runs, run_start = [], None
    for d, flag in enumerate(inside, start=1):
        if flag and run_start is None:
            run_start = d
        elif not flag and run_start is not None:
            runs.append((run_start, d))
            run_start = None
    return [(_first_date(a, year), _first_date(b, year))
            for year in range(policy.year_start, policy.year_end + 1) for a, b in runs]


def _sort_key(r: SceneRecord):
    return (r.acquisition, r.scene_id)


class CatalogBackend(Protocol):
    def query(self, point: GeoPoint, window: Window, policy: SelectionPolicy) -> list[SceneRecord]:
        ...


class LocalCatalog:
    """In-memory catalog loaded from a JSON-lines file of scene records."""

    def __init__(self, records: Iterable[SceneRecord] = ()):
        self._by_point: dict[int, list[SceneRecord]] = {}
        for r in records:
            self._by_point.setdefault(r.point_id, []).append(r)
        for recs in self._by_point.values():
            recs.sort(key=_sort_key)

    @classmethod
    def from_jsonl(cls, path) -> "LocalCatalog":
        records = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    records.append(SceneRecord.from_json(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise DecodeError(f"{path}:{lineno}: malformed scene record: {exc}") from exc
        return cls(records)

    def __len__(self):
        return sum(len(v) for v in self._by_point.values())

    def records(self) -> list[SceneRecord]:
        return [r for pid in sorted(self._by_point) for r in self._by_point[pid]]

    def query(self, point: GeoPoint, window: Window, policy: SelectionPolicy) -> list[SceneRecord]:
        return [r for r in self._by_point.get(point.id, ()) if in_window(r, window, policy)]


def write_catalog(records: Iterable[SceneRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


class RemoteCatalog:
    """Client for a small STAC-like search endpoint.

    Each request is a POST with ``{"point", "datetime", "limit", "token"}``;
    the response carries ``{"records", "next_token"}``. Pages are followed
    until ``next_token`` is null. 5xx responses and transport failures are
    retried with exponential backoff.
    """

    def __init__(self, url: str, *, limit: int = 100, attempts: int = 3,
                 backoff: float = 0.5, timeout: float = 30.0,
                 client: httpx.Client | None = None, sleep=time.sleep):
        self.url = url
        self.limit = limit
        self.attempts = attempts
        self.backoff = backoff
        self._sleep = sleep
        self._client = client or httpx.Client(timeout=timeout)

    def close(self):
        self._client.close()

    def _post(self, body: dict) -> dict:
        last_exc: Exception | None = None
        for attempt in range(self.attempts):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.url, json=body)
            except httpx.TransportError as exc:
                last_exc = exc
                log.warning("catalog request failed (%s), attempt %d", exc, attempt + 1)
                continue
            if resp.status_code >= 500:
                last_exc = TransportError(f"HTTP {resp.status_code} from {self.url}")
                log.warning("catalog returned %d, attempt %d", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code} from {self.url}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise DecodeError(f"non-JSON response from {self.url}") from exc
        raise TransportError(
            f"catalog request failed after {self.attempts} attempts: {last_exc}"
        ) from last_exc

    def query(self, point: GeoPoint, window: Window, policy: SelectionPolicy) -> list[SceneRecord]:
        ranges = [
            f"{a.isoformat()}T00:00:00Z/{b.isoformat()}T00:00:00Z"
            for a, b in date_ranges(window, policy)
        ]
        body = {
            "point": {"id": point.id, "lat": point.lat, "lon": point.lon},
            "datetime": ranges,
            "limit": self.limit,
            "token": None,
        }
        out: list[SceneRecord] = []
        page = 0
        while True:
            payload = self._post(body)
            for i, obj in enumerate(payload.get("records", [])):
                try:
                    rec = SceneRecord.from_json(obj)
                except (KeyError, TypeError, ValueError) as exc:
                    raise DecodeError(
                        f"malformed record {i} on page {page} for point {point.id}: {exc}"
                    ) from exc
                if rec.point_id == point.id and in_window(rec, window, policy):
                    out.append(rec)
            token = payload.get("next_token")
            if not token:
                break
            body = {**body, "token": token}
            page += 1
        out.sort(key=_sort_key)
        return out


def open_catalog(source: str, **kwargs):
    if source.startswith(("http://", "https://")):
        return RemoteCatalog(source, **kwargs)
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"catalog not found: {path}")
    return LocalCatalog.from_jsonl(path)


def query(backend: CatalogBackend, point: GeoPoint, window: Window,
          policy: SelectionPolicy) -> list[SceneRecord]:
    return sorted(backend.query(point, window, policy), key=_sort_key)


# --- selection --------------------------------------------------------------


def _target_distance(record: SceneRecord, window: Window) -> int:
    d = abs(record.doy - window.target) % window.year_length
    return min(d, window.year_length - d)


def pick_scene(candidates: Sequence[SceneRecord], window: Window,
               policy: SelectionPolicy) -> Optional[SceneRecord]:
    valid = [c for c in candidates if c.cloud_fraction < policy.max_cloud]
    if not valid:
        return None
    return min(valid, key=lambda c: (c.cloud_fraction, _target_distance(c, window), c.scene_id))


def select_seasonal_scenes(point: GeoPoint, windows: SeasonWindows,
                           backend: CatalogBackend, policy: SelectionPolicy) -> SeasonalSelection:
    chosen = [pick_scene(query(backend, point, w, policy), w, policy) for w in windows]
    n = sum(c is not None for c in chosen)
    sel = SeasonalSelection(point.id, chosen)
    if n < policy.min_images:
        sel.excluded = True
        sel.reason = f"only {n} season(s) with a scene below {policy.max_cloud:g} cloud"
    return sel


@dataclass
class BuildReport:
    selections: list
    failures: dict = field(default_factory=dict)

    @property
    def n_excluded(self) -> int:
        return sum(s.excluded for s in self.selections)


class BuildFailed(PhenoSampleError):
    pass


def build_dataset(points: Sequence[GeoPoint], windows_map: Mapping[int, SeasonWindows],
                  backend: CatalogBackend, policy: SelectionPolicy, *,
                  workers: int = 8, max_failure_fraction: float = 0.0) -> BuildReport:
    """Select scenes for every point, concurrently, returning results by point id.

    Points whose selection raises are kept in the output as excluded with the
    error as reason; the whole run fails once the failure share exceeds
    ``max_failure_fraction``.
    """
    missing = [p.id for p in points if p.id not in windows_map]
    if missing:
        raise ConfigError(f"no season windows for points {missing[:10]}")

    def one(p: GeoPoint):
        try:
            return select_seasonal_scenes(p, windows_map[p.id], backend, policy), None
        except PhenoSampleError as exc:
            return SeasonalSelection(p.id, [None] * 4, True, f"error: {exc}"), exc

    ordered = sorted(points, key=lambda p: p.id)
    if workers <= 1:
        results = [one(p) for p in ordered]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, ordered))
    failures = {sel.point_id: exc for sel, exc in results if exc is not None}
    if points and len(failures) / len(points) > max_failure_fraction:
        first = next(iter(failures.items()))
        raise BuildFailed(
            f"{len(failures)}/{len(points)} points failed; first: point {first[0]}: {first[1]}"
        )
    return BuildReport([sel for sel, _ in results], failures)


def write_selections(selections: Iterable[SeasonalSelection], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in selections:
            fh.write(json.dumps(s.to_json(), sort_keys=True) + "\n")


def read_selections(path) -> list[SeasonalSelection]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(SeasonalSelection.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DecodeError(f"{path}:{lineno}: bad selection: {exc}") from exc
    return out
