"""Commuting classification and the temporal / spatial aggregate statistics."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InconsistencyError
from .geo import GridSpec, grid_index
from .ingest import SchemaConfig, TripRecord, month_key
from .places import PlaceLabeling, UserPlaces, rank_places

DEFAULT_TZ = SchemaConfig().tz


class TripClass(str, Enum):
    COMMUTING = "commuting"
    NON_COMMUTING = "non_commuting"


CLASSES = (TripClass.COMMUTING, TripClass.NON_COMMUTING)


@dataclass(frozen=True)
class ClassifiedTrip:
    base: TripRecord
    klass: TripClass
    duration_min: float
    origin_cell: Optional[Tuple[int, int]]
    dest_cell: Optional[Tuple[int, int]]
    origin_pid: int = -1
    dest_pid: int = -1


@dataclass
class GapSeries:
    user: str
    gaps_min: List[float]


@dataclass
class HistogramSet:
    daily_counts: Dict[date, Tuple[int, int]]
    hourly_profile: Dict[TripClass, List[float]]
    gap_histogram: List[Tuple[float, int]] = field(default_factory=list)
    place_count_histogram: Dict[int, int] = field(default_factory=dict)


def classify_trip(t: TripRecord, labeling: PlaceLabeling, home: Optional[int], work: Optional[int],
                  grid: GridSpec = GridSpec()) -> ClassifiedTrip:
    """Commuting iff the endpoint places are exactly {home, work}, either way."""
    try:
        i = labeling.index_of(t.r_id)
    except KeyError:
        raise InconsistencyError(f"trip {t.r_id} not in labeling of {labeling.user}") from None
    o, d = labeling.origin_pids[i], labeling.dest_pids[i]
    commuting = home is not None and work is not None and {o, d} == {home, work}
    return ClassifiedTrip(
        base=t,
        klass=TripClass.COMMUTING if commuting else TripClass.NON_COMMUTING,
        duration_min=(t.d_time - t.o_time) / 60.0,
        origin_cell=grid_index(t.origin, grid),
        dest_cell=grid_index(t.dest, grid),
        origin_pid=o,
        dest_pid=d,
    )


def classify_user(trips: Sequence[TripRecord], up: UserPlaces, grid: GridSpec = GridSpec()) -> List[ClassifiedTrip]:
    return [classify_trip(t, up.labeling, up.home_pid, up.work_pid, grid) for t in trips]


def gap_times(user_trips: Sequence[TripRecord]) -> GapSeries:
    starts = sorted(t.o_time for t in user_trips)
    user = user_trips[0].p_id if user_trips else ""
    return GapSeries(user, [(b - a) / 60.0 for a, b in zip(starts, starts[1:])])


def mean_gap_by_monthly_trips(users: Mapping[str, Sequence[TripRecord]], tz: timezone = DEFAULT_TZ) -> Dict[int, float]:
    """Pooled mean gap (min) keyed by a user's trip count within a calendar month.

    Each (user, month) with at least two trips contributes its within-month
    gaps to the group for its trip count.
    """
    pooled: Dict[int, List[float]] = defaultdict(list)
    for trips in users.values():
        by_month: Dict[Tuple[int, int], List[TripRecord]] = defaultdict(list)
        for t in trips:
            by_month[month_key(t.o_time, tz)].append(t)
        for month_trips in by_month.values():
            if len(month_trips) >= 2:
                pooled[len(month_trips)].extend(gap_times(month_trips).gaps_min)
    return {k: float(np.mean(v)) for k, v in sorted(pooled.items())}


def _local(ts: int, tz: timezone) -> datetime:
    return datetime.fromtimestamp(ts, tz)


def gap_histogram(gaps: Iterable[float], bin_width: float = 10.0, max_min: float = 45_000.0) -> List[Tuple[float, int]]:
    """Fixed-width bins over [0, max_min); gaps beyond the range land in the last bin."""
    n_bins = int(np.ceil(max_min / bin_width))
    counts = np.zeros(n_bins, dtype=np.int64)
    for g in gaps:
        counts[min(int(g // bin_width), n_bins - 1)] += 1
    return [(i * bin_width, int(c)) for i, c in enumerate(counts)]


def temporal_histograms(classified: Sequence[ClassifiedTrip], window: Tuple[date, date],
                        tz: timezone = DEFAULT_TZ, gap_bin_width: float = 10.0,
                        gap_max_min: float = 45_000.0) -> HistogramSet:
    """Daily per-class counts, mean trips per hour of day, and pooled gaps.

    ``window`` is an inclusive date range; trips starting outside it are ignored.
    """
    start, end = window
    n_days = (end - start).days + 1
    daily = {start + timedelta(days=i): [0, 0] for i in range(n_days)}
    hourly = {c: np.zeros(24) for c in CLASSES}
    per_user: Dict[str, List[TripRecord]] = defaultdict(list)
    for ct in classified:
        dt = _local(ct.base.o_time, tz)
        day = dt.date()
        if day not in daily:
            continue
        daily[day][0 if ct.klass is TripClass.COMMUTING else 1] += 1
        hourly[ct.klass][dt.hour] += 1
        per_user[ct.base.p_id].append(ct.base)
    gaps = [g for trips in per_user.values() for g in gap_times(trips).gaps_min]
    return HistogramSet(
        daily_counts={d: (c[0], c[1]) for d, c in daily.items()},
        hourly_profile={c: list(hourly[c] / n_days) for c in CLASSES},
        gap_histogram=gap_histogram(gaps, gap_bin_width, gap_max_min),
    )


def place_count_distribution(labelings: Iterable[PlaceLabeling]) -> Dict[int, int]:
    counts = Counter(lab.max_pid + 1 for lab in labelings)
    return dict(sorted(counts.items()))


def rank_probability_by_cohort(labelings: Iterable[PlaceLabeling]) -> Dict[int, List[Tuple[int, float, int]]]:
    """Mean visit probability per rank, grouped by the users' number of places.

    Returns ``{n_places: [(rank, mean_probability, n_users), ...]}``.
    """
    acc: Dict[int, List[List[float]]] = defaultdict(list)
    for lab in labelings:
        acc[lab.max_pid + 1].append([r[3] for r in rank_places(lab)])
    out = {}
    for k in sorted(acc):
        arr = np.array(acc[k])
        out[k] = [(r + 1, float(arr[:, r].mean()), arr.shape[0]) for r in range(arr.shape[1])]
    return out


def grid_mean_distance(classified: Iterable[ClassifiedTrip], grid: GridSpec = GridSpec()):
    """Per class, per origin cell: ``(mean distance_km, trip count)``.

    Uses the stored ``origin_cell``; trips whose origin fell outside the grid
    are skipped.
    """
    sums: Dict[TripClass, Dict[Tuple[int, int], List[float]]] = {c: {} for c in CLASSES}
    for ct in classified:
        cell = ct.origin_cell
        if cell is None:
            continue
        s = sums[ct.klass].setdefault(cell, [0.0, 0])
        s[0] += ct.base.distance_km
        s[1] += 1
    return {c: {cell: (v[0] / v[1], v[1]) for cell, v in sorted(cells.items())} for c, cells in sums.items()}


def home_work_cells(users: Iterable[UserPlaces], grid: GridSpec = GridSpec()) -> Dict[Tuple[int, int], Tuple[int, int]]:
    """Count of detected homes and workplaces per grid cell, keyed by ``(col, row)``."""
    counts: Dict[Tuple[int, int], List[int]] = defaultdict(lambda: [0, 0])
    for up in users:
        for slot, pid in ((0, up.home_pid), (1, up.work_pid)):
            if pid is None:
                continue
            cell = grid_index(up.labeling.centroid(pid), grid)
            if cell is not None:
                counts[cell][slot] += 1
    return {cell: (v[0], v[1]) for cell, v in sorted(counts.items())}


def local_maxima(profile: Sequence[float]) -> List[int]:
    """Hours strictly above one neighbour and not below the other (non-circular ends
    compare against their single neighbour)."""
    v = list(profile)
    out = []
    for h in range(len(v)):
        left = v[h - 1] if h > 0 else -np.inf
        right = v[h + 1] if h < len(v) - 1 else -np.inf
        if v[h] >= left and v[h] >= right and (v[h] > left or v[h] > right):
            out.append(h)
    return out


def count_modes(profile: Sequence[float], rel_prominence: float = 0.1) -> int:
    """Number of peaks whose prominence exceeds ``rel_prominence`` of the maximum."""
    from scipy.signal import find_peaks

    v = np.asarray(profile, dtype=float)
    if v.max() <= 0:
        return 0
    padded = np.concatenate([[0.0], v, [0.0]])
    peaks, _ = find_peaks(padded, prominence=rel_prominence * v.max())
    return int(len(peaks))


def maximal_region_contiguous(profile: Sequence[float]) -> bool:
    v = np.asarray(profile)
    idx = np.flatnonzero(v == v.max())
    return bool(np.all(np.diff(idx) == 1))
