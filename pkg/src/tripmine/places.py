"""Visited-place labeling and home/work inference for a single user.

Labeling is greedy and order dependent: every origin is labeled in trip order,
then every destination.  A point closer than ``d_th`` to some already labeled
point joins that point's place (the nearest one; ties go to the lower PID),
otherwise it opens a new place.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from datetime import timezone
from enum import IntEnum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptyInputError
from .geo import GeoPoint, haversine_m
from .ingest import SchemaConfig, TripRecord

DEFAULT_TZ = SchemaConfig().tz


class PlaceKind(IntEnum):
    HOME = 0
    WORK = 1
    OTHER = 2


@dataclass(frozen=True)
class MinerConfig:
    d_th: float = 500.0
    home_work_ratio: float = 0.40
    morning_window: Tuple[int, int] = (6, 11)
    evening_window: Tuple[int, int] = (15, 20)
    strict_alg1_origin_first: bool = True
    tz: timezone = DEFAULT_TZ

    def __post_init__(self):
        if self.d_th <= 0:
            raise ValueError("d_th must be positive")
        if not 0 < self.home_work_ratio < 1:
            raise ValueError("home_work_ratio must lie in (0, 1)")
        for lo, hi in (self.morning_window, self.evening_window):
            if not (0 <= lo < hi <= 24):
                raise ValueError(f"bad hour window [{lo}, {hi})")


@dataclass
class PlaceLabeling:
    user: str
    r_ids: List[str]
    origin_pids: List[int]
    dest_pids: List[int]
    max_pid: int
    anchor_points: Dict[int, List[GeoPoint]] = field(default_factory=dict)
    # (point index, matched index) pairs; indices are 0..n-1 for origins, n..2n-1 for dests
    match_edges: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def n_places(self) -> int:
        return self.max_pid + 1

    def index_of(self, r_id: str) -> int:
        if not hasattr(self, "_index"):
            self._index = {r: i for i, r in enumerate(self.r_ids)}
        return self._index[r_id]

    def centroid(self, pid: int) -> GeoPoint:
        pts = self.anchor_points[pid]
        return GeoPoint(sum(p.lng for p in pts) / len(pts), sum(p.lat for p in pts) / len(pts))


@dataclass(frozen=True)
class PlaceFunction:
    pid: int
    kind: PlaceKind
    support_ratio: float


def sort_user_trips(trips: Sequence[TripRecord]) -> List[TripRecord]:
    return sorted(trips, key=lambda t: t.o_time)


def generate_places(user_trips: Sequence[TripRecord], cfg: MinerConfig = MinerConfig()) -> PlaceLabeling:
    """Label each origin and destination of one user's trips with a place id.

    ``user_trips`` must already be in processing order (ascending ``o_time``).
    With ``cfg.strict_alg1_origin_first`` a destination within ``d_th`` of its
    own trip's origin takes that origin's PID before any nearer point is
    considered.
    """
    n = len(user_trips)
    if n == 0:
        raise EmptyInputError("cannot label an empty trip sequence")
    lng = np.empty(2 * n)
    lat = np.empty(2 * n)
    for i, t in enumerate(user_trips):
        lng[i], lat[i] = t.origin.lng, t.origin.lat
        lng[n + i], lat[n + i] = t.dest.lng, t.dest.lat
    pids = np.full(2 * n, -1, dtype=np.int64)
    edges = []
    pids[0] = 0
    max_pid = 0

    def assign(k: int, prior: np.ndarray):
        # prior: indices of already-labeled points to compare against
        nonlocal max_pid
        if prior.size:
            d = haversine_m(lng[k], lat[k], lng[prior], lat[prior])
            close = d < cfg.d_th
            if close.any():
                cand = prior[close]
                dc = d[close]
                best = dc.min()
                tied = cand[dc == best]
                j = tied[np.argmin(pids[tied])]
                pids[k] = pids[j]
                edges.append((k, int(j)))
                return
        max_pid += 1
        pids[k] = max_pid

    for i in range(1, n):
        assign(i, np.arange(i))
    for i in range(n):
        k = n + i
        if cfg.strict_alg1_origin_first:
            if float(haversine_m(lng[k], lat[k], lng[i], lat[i])) < cfg.d_th:
                pids[k] = pids[i]
                edges.append((k, i))
                continue
        assign(k, np.arange(k))

    anchors: Dict[int, List[GeoPoint]] = {}
    for k in range(2 * n):
        anchors.setdefault(int(pids[k]), []).append(GeoPoint(float(lng[k]), float(lat[k])))
    return PlaceLabeling(
        user=user_trips[0].p_id,
        r_ids=[t.r_id for t in user_trips],
        origin_pids=[int(p) for p in pids[:n]],
        dest_pids=[int(p) for p in pids[n:]],
        max_pid=max_pid,
        anchor_points=anchors,
        match_edges=edges,
    )


def _hour(ts: int, tz: timezone) -> int:
    return int(((ts + tz.utcoffset(None).total_seconds()) // 3600) % 24)


def _in_window(ts: int, window: Tuple[int, int], tz: timezone) -> bool:
    return window[0] <= _hour(ts, tz) < window[1]


def _pick(counts: Counter, total: int, ratio: float, exclude: Optional[int]):
    cands = [(c, pid) for pid, c in counts.items() if pid != exclude and c > 0]
    if not cands or total == 0:
        return None
    best = max(c for c, _ in cands)
    pid = min(p for c, p in cands if c == best)
    share = best / total
    if share > ratio:
        return pid, share
    return None


def _window_counts(labeling: PlaceLabeling, trips: Sequence[TripRecord], cfg: MinerConfig,
                   origin_window, dest_window) -> Counter:
    counts: Counter = Counter()
    for t in trips:
        i = labeling.index_of(t.r_id)
        if _in_window(t.o_time, origin_window, cfg.tz):
            counts[labeling.origin_pids[i]] += 1
        if _in_window(t.d_time, dest_window, cfg.tz):
            counts[labeling.dest_pids[i]] += 1
    return counts


def detect_home(labeling: PlaceLabeling, trips: Sequence[TripRecord],
                cfg: MinerConfig = MinerConfig()) -> Optional[Tuple[int, float]]:
    """Morning origins plus evening destinations per place; the top place is
    home if its count exceeds ``home_work_ratio`` of all the user's trips."""
    counts = _window_counts(labeling, trips, cfg, cfg.morning_window, cfg.evening_window)
    return _pick(counts, len(trips), cfg.home_work_ratio, None)


def detect_work(labeling: PlaceLabeling, trips: Sequence[TripRecord], cfg: MinerConfig = MinerConfig(),
                home: Optional[int] = None) -> Optional[Tuple[int, float]]:
    """Mirror of :func:`detect_home` (morning destinations, evening origins),
    never returning the home PID."""
    counts = _window_counts(labeling, trips, cfg, cfg.evening_window, cfg.morning_window)
    return _pick(counts, len(trips), cfg.home_work_ratio, home)


def endpoint_counts(labeling: PlaceLabeling) -> Counter:
    return Counter(labeling.origin_pids) + Counter(labeling.dest_pids)


def rank_places(labeling: PlaceLabeling) -> List[Tuple[int, int, int, float]]:
    """``(rank, pid, visit_count, visit_probability)`` with rank 1 most visited."""
    counts = endpoint_counts(labeling)
    total = sum(counts.values())
    if total == 0:
        raise EmptyInputError("empty labeling")
    order = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(r, pid, c, c / total) for r, (pid, c) in enumerate(order, start=1)]


def place_functions(labeling: PlaceLabeling, home, work) -> Dict[int, PlaceFunction]:
    out = {}
    for pid in range(labeling.n_places):
        if home is not None and pid == home[0]:
            out[pid] = PlaceFunction(pid, PlaceKind.HOME, home[1])
        elif work is not None and pid == work[0]:
            out[pid] = PlaceFunction(pid, PlaceKind.WORK, work[1])
        else:
            out[pid] = PlaceFunction(pid, PlaceKind.OTHER, 0.0)
    return out


@dataclass
class UserPlaces:
    labeling: PlaceLabeling
    home: Optional[Tuple[int, float]]
    work: Optional[Tuple[int, float]]

    @property
    def home_pid(self) -> Optional[int]:
        return None if self.home is None else self.home[0]

    @property
    def work_pid(self) -> Optional[int]:
        return None if self.work is None else self.work[0]

    def to_json(self):
        lab = self.labeling
        funcs = place_functions(lab, self.home, self.work)
        places = []
        for pid in range(lab.n_places):
            c = lab.centroid(pid)
            f = funcs[pid]
            places.append({
                "pid": pid,
                "function": int(f.kind),
                "support_ratio": f.support_ratio,
                "member_count": len(lab.anchor_points[pid]),
                "centroid": [c.lng, c.lat],
            })
        return {
            "p_id": lab.user,
            "places": places,
            "r_ids": lab.r_ids,
            "origin_pids": lab.origin_pids,
            "dest_pids": lab.dest_pids,
        }


def mine_user(trips: Sequence[TripRecord], cfg: MinerConfig = MinerConfig()) -> UserPlaces:
    trips = sort_user_trips(trips)
    lab = generate_places(trips, cfg)
    home = detect_home(lab, trips, cfg)
    work = detect_work(lab, trips, cfg, None if home is None else home[0])
    return UserPlaces(lab, home, work)


def user_places_from_json(doc) -> UserPlaces:
    """Rebuild the parts of a :class:`UserPlaces` needed downstream."""
    places = doc["places"]
    home = work = None
    anchors = {}
    for p in places:
        if p["function"] == PlaceKind.HOME:
            home = (p["pid"], p["support_ratio"])
        elif p["function"] == PlaceKind.WORK:
            work = (p["pid"], p["support_ratio"])
        anchors[p["pid"]] = [GeoPoint(*p["centroid"])]
    lab = PlaceLabeling(doc["p_id"], list(doc["r_ids"]), list(doc["origin_pids"]), list(doc["dest_pids"]),
                        len(places) - 1, anchors)
    return UserPlaces(lab, home, work)
