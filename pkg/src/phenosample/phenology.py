"""Phenological transition dates and the local season windows built from them.

Days are 1-based day-of-year values throughout. Windows are half-open cyclic
intervals ``[start, start + length)`` on a year of ``year_length`` days.
"""

from __future__ import annotations

import calendar
import csv
import datetime
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DecodeError, MissingPhenologyError
from .geogrid import GeoPoint, haversine_km

VARIABLES = ("greenup", "maturity", "senescence", "dormancy")
SEASONS = ("spring", "summer", "autumn", "winter")
PHENOLOGICAL = "phenological"
CALENDAR = "calendar"

# relative distance below which two gap-fill donors count as equidistant
TIE_RTOL = 1e-12

# Meteorological seasons: start months (Mar, Jun, Sep, Dec) and the month
# whose 15th is the target day.
_CALENDAR_STARTS = (3, 6, 9, 12)
_CALENDAR_TARGETS = (4, 7, 10, 1)


@dataclass(frozen=True)
class PhenoConfig:
    low_fraction: float = 0.15
    high_fraction: float = 0.90

    def __post_init__(self):
        if not 0 < self.low_fraction < self.high_fraction < 1:
            raise ConfigError(
                "need 0 < low_fraction < high_fraction < 1, got "
                f"{self.low_fraction}, {self.high_fraction}"
            )


@dataclass(frozen=True)
class PhenoDates:
    greenup: Optional[int] = None
    maturity: Optional[int] = None
    senescence: Optional[int] = None
    dormancy: Optional[int] = None

    def as_tuple(self) -> tuple:
        return (self.greenup, self.maturity, self.senescence, self.dormancy)

    @property
    def complete(self) -> bool:
        return all(v is not None for v in self.as_tuple())

    @property
    def empty(self) -> bool:
        return all(v is None for v in self.as_tuple())


@dataclass
class EviCurve:
    year: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        n_days = 366 if calendar.isleap(self.year) else 365
        if self.values.shape != (n_days,):
            raise ValueError(
                f"EVI curve for {self.year} needs {n_days} daily values, "
                f"got {self.values.shape}"
            )
        valid = self.values[~np.isnan(self.values)]
        if valid.size and (valid.min() < -1 or valid.max() > 1):
            raise ValueError("EVI values must lie in [-1, 1]")


@dataclass(frozen=True)
class Window:
    start: int
    length: int
    target: int
    year_length: int = 365

    @property
    def end(self) -> int:
        """Exclusive cyclic end day."""
        return wrap_day(self.start + self.length, self.year_length)

    def contains(self, doy: int) -> bool:
        return (doy - self.start) % self.year_length < self.length


@dataclass(frozen=True)
class SeasonWindows:
    windows: tuple  # four Window objects: spring, summer, autumn, winter
    mode: str = PHENOLOGICAL
    fallback: bool = False
    repaired: bool = False

    def __iter__(self):
        return iter(self.windows)

    def __getitem__(self, i) -> Window:
        return self.windows[i]


def wrap_day(day: int, year_length: int) -> int:
    return (day - 1) % year_length + 1


# --- transition detection ---------------------------------------------------


def detect_transitions(curve: EviCurve, cfg: PhenoConfig = PhenoConfig()) -> PhenoDates:
    values = curve.values
    valid = ~np.isnan(values)
    if valid.sum() < 2:
        return PhenoDates()
    lo = values[valid].min()
    amplitude = values[valid].max() - lo
    if amplitude <= 0:
        return PhenoDates()
    t_low = lo + cfg.low_fraction * amplitude
    t_high = lo + cfg.high_fraction * amplitude
    # NaN compares False, so no-data days never count as crossings.
    above_low = np.flatnonzero(values >= t_low)
    above_high = np.flatnonzero(values >= t_high)
    return PhenoDates(
        greenup=int(above_low[0]) + 1,
        maturity=int(above_high[0]) + 1,
        senescence=int(above_high[-1]) + 1,
        dormancy=int(above_low[-1]) + 1,
    )


def median_phenology(per_year: Iterable[PhenoDates]) -> PhenoDates:
    per_year = list(per_year)
    out = {}
    for name in VARIABLES:
        vals = sorted(getattr(p, name) for p in per_year if getattr(p, name) is not None)
        if not vals:
            out[name] = None
            continue
        mid = len(vals) // 2
        if len(vals) % 2:
            out[name] = vals[mid]
        else:
            out[name] = (vals[mid - 1] + vals[mid]) // 2
    return PhenoDates(**out)


# --- gap filling ------------------------------------------------------------


def _unit_vectors(lat, lon) -> np.ndarray:
    lat = np.radians(np.asarray(lat, dtype=np.float64))
    lon = np.radians(np.asarray(lon, dtype=np.float64))
    return np.column_stack(
        [np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)]
    )


def fill_missing(
    points: Sequence[GeoPoint], known: Mapping[int, PhenoDates]
) -> dict[int, PhenoDates]:
    """Give every point complete dates, borrowing from its nearest complete neighbour.

    Absent variables are taken from the closest point (great-circle distance)
    with complete dates; donors equidistant within a relative ``TIE_RTOL``
    resolve to the lowest point id.
    Values already present are kept.
    """
    donors = sorted(
        (p for p in points if known.get(p.id) is not None and known[p.id].complete),
        key=lambda p: p.id,
    )
    if not donors:
        raise MissingPhenologyError("no point with complete phenology to fill from")
    out: dict[int, PhenoDates] = {}
    needy = []
    for p in points:
        dates = known.get(p.id, PhenoDates())
        if dates.complete:
            out[p.id] = dates
        else:
            needy.append(p)
    if not needy:
        return out

    donor_xyz = _unit_vectors([d.lat for d in donors], [d.lon for d in donors])
    tree = cKDTree(donor_xyz)
    query_xyz = _unit_vectors([p.lat for p in needy], [p.lon for p in needy])
    chord, _ = tree.query(query_xyz, k=1)
    for p, xyz, d0 in zip(needy, query_xyz, chord):
        # Chord distance is monotone in arc length, but float noise can reorder
        # near-ties; re-rank a small neighbourhood with exact haversine.
        radius = d0 * (1 + 1e-9) + 1e-12
        candidates = tree.query_ball_point(xyz, radius)
        dist = {j: haversine_km(p, donors[j]) for j in candidates}
        nearest = min(dist.values())
        # distances equal up to rounding count as ties and go to the lowest id
        best = min((j for j in candidates if dist[j] <= nearest * (1 + TIE_RTOL)),
                   key=lambda j: donors[j].id)
        donor = known[donors[best].id]
        own = known.get(p.id, PhenoDates())
        out[p.id] = PhenoDates(
            *(o if o is not None else d for o, d in zip(own.as_tuple(), donor.as_tuple()))
        )
    return out


# --- season windows ---------------------------------------------------------


def _calendar_windows(year_length: int, fallback: bool = False) -> SeasonWindows:
    ref_year = 2001 if year_length == 365 else 2000
    starts = [_doy(ref_year, m, 1) for m in _CALENDAR_STARTS]
    windows = []
    for i, month in enumerate(_CALENDAR_TARGETS):
        length = (starts[(i + 1) % 4] - starts[i]) % year_length
        windows.append(Window(starts[i], length, _doy(ref_year, month, 15), year_length))
    return SeasonWindows(tuple(windows), CALENDAR, fallback=fallback)


def _doy(year: int, month: int, day: int) -> int:
    return datetime.date(year, month, day).timetuple().tm_yday


def _ordered_offsets(dates: tuple, year_length: int):
    """Cyclic offsets of the four dates from greenup, or None if out of order.

    Ties (zero-length seasons) are repaired by pushing the later variable
    forward one day at a time; any other ordering violation cannot be repaired.
    """
    offsets = [(d - dates[0]) % year_length for d in dates]
    if not offsets[1] <= offsets[2] <= offsets[3]:
        return None, False
    repaired = False
    fixed = [0]
    for o in offsets[1:]:
        if o <= fixed[-1]:
            o = fixed[-1] + 1
            repaired = True
        fixed.append(o)
    if fixed[3] >= year_length:
        return None, False
    return fixed, repaired


def season_windows(
    pheno: Optional[PhenoDates], mode: str = PHENOLOGICAL, year_length: int = 365
) -> SeasonWindows:
    if year_length not in (365, 366):
        raise ConfigError(f"year_length must be 365 or 366, got {year_length}")
    if mode == CALENDAR:
        return _calendar_windows(year_length)
    if mode != PHENOLOGICAL:
        raise ConfigError(f"unknown season mode {mode!r}")
    if pheno is None or not pheno.complete:
        raise MissingPhenologyError("phenological windows need complete dates")

    dates = tuple(wrap_day(d, year_length) for d in pheno.as_tuple())
    offsets, repaired = _ordered_offsets(dates, year_length)
    if offsets is None:
        return _calendar_windows(year_length, fallback=True)
    bounds = offsets + [year_length]
    windows = []
    for i in range(4):
        length = bounds[i + 1] - bounds[i]
        start = wrap_day(dates[0] + bounds[i], year_length)
        target = wrap_day(start + length // 2, year_length)
        windows.append(Window(start, length, target, year_length))
    return SeasonWindows(tuple(windows), PHENOLOGICAL, repaired=repaired)


# --- synthetic curves -------------------------------------------------------


@dataclass(frozen=True)
class DoubleLogistic:
    """Smooth green-up/brown-down curve: ``base + amplitude * (rise - fall)``."""

    base: float = 0.1
    amplitude: float = 0.5
    rise_day: float = 120.0
    rise_rate: float = 0.1
    fall_day: float = 270.0
    fall_rate: float = 0.1

    def validate(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.rise_rate <= 0 or self.fall_rate <= 0:
            raise ValueError("rise_rate and fall_rate must be positive")
        if not (-1 <= self.base <= 1 and -1 <= self.base + self.amplitude <= 1):
            raise ValueError("curve would leave the EVI range [-1, 1]")


def synth_evi(params: DoubleLogistic, year: int) -> EviCurve:
    params.validate()
    n_days = 366 if calendar.isleap(year) else 365
    t = np.arange(1, n_days + 1, dtype=np.float64)
    rise = 1.0 / (1.0 + np.exp(-params.rise_rate * (t - params.rise_day)))
    fall = 1.0 / (1.0 + np.exp(-params.fall_rate * (t - params.fall_day)))
    values = params.base + params.amplitude * (rise - fall)
    # the difference of logistics can undershoot zero by rounding
    values = np.clip(values, params.base, params.base + params.amplitude)
    return EviCurve(year, values)


def random_double_logistic(rng: np.random.Generator) -> DoubleLogistic:
    rise_day = rng.uniform(40, 200)
    return DoubleLogistic(
        base=float(rng.uniform(-0.1, 0.3)),
        amplitude=float(rng.uniform(0.05, 0.6)),
        rise_day=float(rise_day),
        rise_rate=float(rng.uniform(0.03, 0.3)),
        fall_day=float(rise_day + rng.uniform(30, 150)),
        fall_rate=float(rng.uniform(0.03, 0.3)),
    )


# --- serialization ----------------------------------------------------------


def pheno_record(point_id: int, dates: PhenoDates, windows: SeasonWindows | None = None,
                 filled: bool = False) -> dict:
    rec = {"point_id": point_id, **asdict(dates), "filled": filled}
    if windows is not None:
        rec["mode"] = windows.mode
        rec["fallback"] = windows.fallback
        rec["repaired"] = windows.repaired
        rec["windows"] = [
            {"season": SEASONS[i], "start": w.start, "end": w.end,
             "length": w.length, "target": w.target}
            for i, w in enumerate(windows)
        ]
    return rec


def windows_from_record(rec: Mapping) -> SeasonWindows:
    wins = rec["windows"]
    year_length = sum(w["length"] for w in wins)
    return SeasonWindows(
        tuple(Window(w["start"], w["length"], w["target"], year_length) for w in wins),
        rec.get("mode", PHENOLOGICAL),
        fallback=rec.get("fallback", False),
        repaired=rec.get("repaired", False),
    )


def write_pheno_table(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_pheno_table(path) -> dict[int, dict]:
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                table[int(rec["point_id"])] = rec
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DecodeError(f"{path}:{lineno}: bad phenology record: {exc}") from exc
    return table


def dates_from_record(rec: Mapping) -> PhenoDates:
    return PhenoDates(*(rec.get(k) for k in VARIABLES))


def read_daily_csv(path) -> dict[int, list[EviCurve]]:
    """Per-point daily EVI: rows of ``point_id, year, v1 .. vN``.

    Empty cells and ``nan`` mark no-data days.
    """
    curves: dict[int, list[EviCurve]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].strip().lower() in ("point_id", "#"):
                continue
            try:
                pid, year = int(row[0]), int(row[1])
                vals = [float(v) if v.strip() else math.nan for v in row[2:]]
                curves.setdefault(pid, []).append(EviCurve(year, np.array(vals)))
            except ValueError as exc:
                raise DecodeError(f"{path}:{lineno}: {exc}") from exc
    return curves
