"""Synthetic trip populations with planted homes, workplaces and trip classes.

Place centres are kept at least ``d_th + 2 * jitter_m`` apart and endpoints
scatter uniformly in a disc of radius ``jitter_m`` around their centre, so
the place labeling recovers exactly one place per planted centre.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import distributions as dist
from .errors import SpecInfeasibleError
from .geo import (GeoPoint, GridSpec, Region, destination_point, grid_from_json,
                  haversine_m, in_region, region_from_json)
from .ingest import SchemaConfig, TripRecord, emit_table

COMMUTING = "commuting"
NON_COMMUTING = "non_commuting"


def _commuting_profile():
    w = [0.0] * 24
    for h, v in {6: 2, 7: 5, 8: 8, 9: 4, 10: 1, 15: 1, 16: 2, 17: 5, 18: 8, 19: 3}.items():
        w[h] = float(v)
    return w


def _non_commuting_profile():
    return [round(0.03 + math.exp(-((h - 15.0) ** 2) / (2 * 4.0 ** 2)), 6) for h in range(24)]


@dataclass
class SynthSpec:
    seed: int
    n_users: int = 500
    window_start: date = date(2017, 3, 1)
    window_end: date = date(2017, 6, 30)
    region: Region = field(default_factory=Region.box)
    grid: GridSpec = field(default_factory=GridSpec)
    commuter_fraction: float = 0.7
    trips_per_month: Tuple[int, int] = (12, 24)
    places_per_user: Tuple[int, int] = (8, 12)
    home_trip_ratio: float = 0.5
    hourly_profiles: Dict[str, List[float]] = field(default_factory=lambda: {
        COMMUTING: _commuting_profile(), NON_COMMUTING: _non_commuting_profile()})
    distance_model: Dict[str, Tuple[str, List[float]]] = field(default_factory=lambda: {
        COMMUTING: ("power_log_normal", [5.64, 1.00]),
        NON_COMMUTING: ("power_log_normal", [0.95, 0.74])})
    duration_model: Dict[str, Tuple[str, List[float]]] = field(default_factory=lambda: {
        COMMUTING: ("exp_weibull", [11.00, 0.77, 4.93]),
        NON_COMMUTING: ("log_normal", [3.16, 0.52])})
    jitter_m: float = 100.0
    d_th: float = 500.0
    morning_window: Tuple[int, int] = (6, 11)
    evening_window: Tuple[int, int] = (15, 20)
    weekend_multiplier: float = 1.0
    commute_weekend_factor: float = 0.1
    speed_cap_kmh: float = 120.0
    tz_offset_hours: float = 8.0

    def validate(self):
        if self.n_users < 0:
            raise SpecInfeasibleError("n_users must be >= 0")
        if self.window_end < self.window_start:
            raise SpecInfeasibleError("empty window")
        if not 0 <= self.commuter_fraction <= 1:
            raise SpecInfeasibleError("commuter_fraction must lie in [0, 1]")
        if not 0 < self.home_trip_ratio <= 1:
            raise SpecInfeasibleError("home_trip_ratio must lie in (0, 1]")
        lo, hi = self.trips_per_month
        if lo < 11 or hi < lo:
            raise SpecInfeasibleError("trips_per_month must be a range with minimum >= 11")
        lo, hi = self.places_per_user
        if lo < 3 or hi < lo:
            raise SpecInfeasibleError("places_per_user must be a range with minimum >= 3")
        if not 0 <= self.jitter_m < self.d_th / 2:
            raise SpecInfeasibleError("jitter_m must be below d_th / 2")
        for key in (COMMUTING, NON_COMMUTING):
            w = self.hourly_profiles[key]
            if len(w) != 24 or min(w) < 0 or sum(w) <= 0:
                raise SpecInfeasibleError(f"bad hourly profile for {key}")
            for model in (self.distance_model[key], self.duration_model[key]):
                dist.check_params(model[0], model[1])

    @property
    def separation_m(self) -> float:
        return self.d_th + 2 * self.jitter_m + 1e-3

    @property
    def schema(self) -> SchemaConfig:
        return SchemaConfig(tz_offset_hours=self.tz_offset_hours)

    def to_json(self):
        doc = asdict(self)
        doc["window_start"] = self.window_start.isoformat()
        doc["window_end"] = self.window_end.isoformat()
        doc["region"] = self.region.to_json()
        doc["grid"] = {"bounds": self.grid.bounds.as_list(), "n_cols": self.grid.n_cols, "n_rows": self.grid.n_rows}
        for k in ("distance_model", "duration_model"):
            doc[k] = {c: {"family": m[0], "params": list(m[1])} for c, m in getattr(self, k).items()}
        return doc

    @classmethod
    def from_json(cls, doc, seed: Optional[int] = None) -> "SynthSpec":
        doc = dict(doc)
        if seed is not None:
            doc["seed"] = seed
        if "seed" not in doc:
            raise SpecInfeasibleError("a seed is required")
        kw = {}
        for key, val in doc.items():
            if key in ("window_start", "window_end"):
                val = date.fromisoformat(val)
            elif key == "region":
                val = region_from_json(val)
            elif key == "grid":
                val = grid_from_json(val)
            elif key in ("distance_model", "duration_model"):
                val = {c: (m["family"], list(m["params"])) for c, m in val.items()}
            elif key in ("trips_per_month", "places_per_user", "morning_window", "evening_window"):
                val = tuple(val)
            kw[key] = val
        return cls(**kw)


@dataclass
class UserTruth:
    p_id: str
    commuter: bool
    home: Optional[GeoPoint]
    work: Optional[GeoPoint]
    places: List[GeoPoint]
    trip_labels: Dict[str, str]

    def to_json(self):
        pt = lambda p: None if p is None else [p.lng, p.lat]
        return {"p_id": self.p_id, "commuter": self.commuter, "home": pt(self.home), "work": pt(self.work),
                "places": [pt(p) for p in self.places], "trip_labels": self.trip_labels}

    @classmethod
    def from_json(cls, doc):
        pt = lambda v: None if v is None else GeoPoint(*v)
        return cls(doc["p_id"], doc["commuter"], pt(doc["home"]), pt(doc["work"]),
                   [GeoPoint(*v) for v in doc["places"]], dict(doc["trip_labels"]))


@dataclass
class GroundTruth:
    users: List[UserTruth]

    def to_json(self):
        return {"users": [u.to_json() for u in self.users]}

    @classmethod
    def from_json(cls, doc):
        return cls([UserTruth.from_json(u) for u in doc["users"]])


@dataclass
class Population:
    records: List[TripRecord]
    truth: GroundTruth
    spec: SynthSpec


# --- helpers ----------------------------------------------------------------

def _disc_inside(center: GeoPoint, radius: float, region: Region) -> bool:
    if not in_region(center, region):
        return False
    n = 4 if region.kind == "box" else 16
    return all(in_region(destination_point(center, 2 * math.pi * i / n, radius), region) for i in range(n))


def _uniform_point(rng, b) -> GeoPoint:
    return GeoPoint(float(rng.uniform(b.min_lng, b.max_lng)), float(rng.uniform(b.min_lat, b.max_lat)))


def _central_point(rng, b) -> GeoPoint:
    c = b.center
    return GeoPoint(float(rng.normal(c.lng, (b.max_lng - b.min_lng) / 8)),
                    float(rng.normal(c.lat, (b.max_lat - b.min_lat) / 8)))


def _place_centers(rng, spec: SynthSpec, n: int, central_index: Optional[int]) -> List[GeoPoint]:
    b = spec.region.bounds
    margin = spec.jitter_m + 1.0
    centers: List[GeoPoint] = []
    for idx in range(n):
        for _ in range(2000):
            p = _central_point(rng, b) if idx == central_index else _uniform_point(rng, b)
            if not (b.min_lng <= p.lng <= b.max_lng and b.min_lat <= p.lat <= b.max_lat):
                continue
            if not _disc_inside(p, margin, spec.region):
                continue
            if centers:
                d = haversine_m(p.lng, p.lat, np.array([c.lng for c in centers]), np.array([c.lat for c in centers]))
                if d.min() < spec.separation_m:
                    continue
            centers.append(p)
            break
        else:
            raise SpecInfeasibleError(f"cannot place {n} centres {spec.separation_m:.0f} m apart in the region")
    return centers


def _jitter(rng, center: GeoPoint, radius: float) -> GeoPoint:
    if radius <= 0:
        return center
    r = radius * math.sqrt(float(rng.random()))
    return destination_point(center, float(rng.uniform(0, 2 * math.pi)), r)


class _Clock:
    """Turns (local date, second of day) into epoch seconds for one window."""

    def __init__(self, spec: SynthSpec):
        self.offset = int(round(spec.tz_offset_hours * 3600))
        self.epoch = date(1970, 1, 1)

    def epoch_seconds(self, day: date, second_of_day: int) -> int:
        return (day - self.epoch).days * 86400 + second_of_day - self.offset

    def local_hour(self, ts: int) -> int:
        return ((ts + self.offset) // 3600) % 24


def _months(spec: SynthSpec) -> List[List[date]]:
    out: Dict[Tuple[int, int], List[date]] = {}
    d = spec.window_start
    while d <= spec.window_end:
        out.setdefault((d.year, d.month), []).append(d)
        d += timedelta(days=1)
    return list(out.values())


class _UserGen:
    def __init__(self, spec: SynthSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.clock = _Clock(spec)
        self.hour_p = {k: np.asarray(v, float) / sum(v) for k, v in spec.hourly_profiles.items()}

    def day(self, days: Sequence[date], klass: str) -> date:
        weekend = self.spec.commute_weekend_factor if klass == COMMUTING else self.spec.weekend_multiplier
        w = np.array([weekend if d.weekday() >= 5 else 1.0 for d in days])
        if w.sum() <= 0:
            w = np.ones(len(days))
        return days[int(self.rng.choice(len(days), p=w / w.sum()))]

    def duration_s(self, klass: str, distance_km: float) -> int:
        fam, theta = self.spec.duration_model[klass]
        cap = self.spec.speed_cap_kmh
        for _ in range(100):
            s = max(1, int(round(float(dist.sample(fam, theta, self.rng, 1)[0]) * 60)))
            if distance_km * 3600.0 / s <= cap:
                return s
        return int(math.ceil(distance_km / cap * 3600.0)) + 1

    def distance_km(self, klass: str) -> float:
        fam, theta = self.spec.distance_model[klass]
        while True:
            v = float(dist.sample(fam, theta, self.rng, 1)[0])
            if v > 0 and math.isfinite(v):
                return v

    def times(self, days, klass: str, window: Optional[Tuple[int, int]], distance_km: float) -> Tuple[int, int]:
        """Start and end epoch seconds; commuting trips retry until both ends
        fall inside ``window``."""
        for _ in range(100):
            hour = int(self.rng.choice(24, p=self.hour_p[klass]))
            day = self.day(days, klass)
            start = self.clock.epoch_seconds(day, hour * 3600 + int(self.rng.integers(0, 3600)))
            end = start + self.duration_s(klass, distance_km)
            if window is None:
                return start, end
            lo, hi = window
            if lo <= self.clock.local_hour(start) < hi and lo <= self.clock.local_hour(end) < hi:
                return start, end
        return start, end


def _generate_user(spec: SynthSpec, idx: int, rng: np.random.Generator):
    gen = _UserGen(spec, rng)
    p_id = f"P{idx:06d}"
    commuter = bool(rng.random() < spec.commuter_fraction)
    n_places = int(rng.integers(spec.places_per_user[0], spec.places_per_user[1] + 1))
    centers = _place_centers(rng, spec, n_places, central_index=1 if commuter else None)
    home, work = (0, 1) if commuter else (None, None)
    others = list(range(2, n_places)) if commuter else list(range(n_places))

    # (place_o, place_d, klass, start, end, distance)
    plan = []
    to_cover = list(rng.permutation(others))
    for days in _months(spec):
        m = int(rng.integers(spec.trips_per_month[0], spec.trips_per_month[1] + 1))
        n_comm = min(m, int(math.ceil(spec.home_trip_ratio * m))) if commuter else 0
        for _ in range(n_comm):
            km = gen.distance_km(COMMUTING)
            # direction follows the half of the day the start hour falls in
            for _ in range(100):
                start, end = gen.times(days, COMMUTING, None, km)
                is_morning = gen.clock.local_hour(start) < 12
                window = spec.morning_window if is_morning else spec.evening_window
                lo, hi = window
                if lo <= gen.clock.local_hour(start) < hi and lo <= gen.clock.local_hour(end) < hi:
                    break
            o, d = (home, work) if is_morning else (work, home)
            plan.append((o, d, COMMUTING, start, end, km))
        for _ in range(m - n_comm):
            if to_cover:
                d = int(to_cover.pop())
            else:
                d = int(rng.choice(others))
            # d is never home or work, so this can't form the home-work pair
            o = int(rng.choice([p for p in range(n_places) if p != d]))
            km = gen.distance_km(NON_COMMUTING)
            start, end = gen.times(days, NON_COMMUTING, None, km)
            plan.append((o, d, NON_COMMUTING, start, end, km))

    plan.sort(key=lambda row: row[3])
    records, labels = [], {}
    visited = set()
    for k, (o, d, klass, start, end, km) in enumerate(plan):
        r_id = f"{p_id}-{k:05d}"
        records.append(TripRecord(
            r_id=r_id, p_id=p_id, d_id=f"D{int(rng.integers(0, 1_000_000)):06d}",
            origin=_jitter(rng, centers[o], spec.jitter_m), dest=_jitter(rng, centers[d], spec.jitter_m),
            o_time=int(start), d_time=int(end), distance_km=km))
        labels[r_id] = klass
        visited.update((o, d))
    truth = UserTruth(p_id, commuter,
                      centers[home] if commuter else None, centers[work] if commuter else None,
                      [centers[i] for i in sorted(visited)], labels)
    return records, truth


def generate_population(spec: SynthSpec) -> Population:
    """Deterministic in ``spec.seed``; users draw from independent child seeds."""
    spec.validate()
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_users)
    records: List[TripRecord] = []
    users: List[UserTruth] = []
    for idx, ss in enumerate(children):
        recs, truth = _generate_user(spec, idx, np.random.default_rng(ss))
        records.extend(recs)
        users.append(truth)
    return Population(records, GroundTruth(users), spec)


def emit_records(population, schema: Optional[SchemaConfig] = None) -> bytes:
    """Delimited trip-table text for a population (or any record sequence)."""
    records = population.records if isinstance(population, Population) else population
    if schema is None:
        schema = population.spec.schema if isinstance(population, Population) else SchemaConfig()
    return emit_table(records, schema)


def truth_bytes(truth: GroundTruth) -> bytes:
    return (json.dumps(truth.to_json(), indent=1, sort_keys=True) + "\n").encode("utf-8")
