"""File-staged pipeline: clean -> mine-places -> classify -> stats -> fit, plus verify."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from . import distributions as dist
from .errors import ConfigError, FitError
from .fitting import fit_and_rank
from .geo import GridSpec, Region, grid_from_json, region_from_json
from .ingest import (COLUMNS, CleaningReport, SchemaConfig, TripRecord, clean, emit_table, format_record,
                     months_between, parse_line, read_records, select_frequent_users)
from .places import MinerConfig, UserPlaces, mine_user, sort_user_trips, user_places_from_json
from .semantics import (CLASSES, ClassifiedTrip, TripClass, classify_user, count_modes, grid_mean_distance,
                        home_work_cells, local_maxima, maximal_region_contiguous, mean_gap_by_monthly_trips,
                        place_count_distribution, rank_probability_by_cohort, temporal_histograms)


@dataclass
class PipelineConfig:
    region: Region = field(default_factory=Region.box)
    grid: GridSpec = field(default_factory=GridSpec)
    delimiter: str = ","
    tz_offset_hours: float = 8.0
    speed_cap_kmh: float = 120.0
    convert_gcj02: bool = False
    min_monthly_trips: int = 10
    frequency_mode: str = "strict"
    window_start: date = date(2017, 3, 1)
    window_end: date = date(2017, 6, 30)
    d_th: float = 500.0
    home_work_ratio: float = 0.40
    morning_window: Tuple[int, int] = (6, 11)
    evening_window: Tuple[int, int] = (15, 20)
    strict_alg1_origin_first: bool = True
    families: Tuple[str, ...] = tuple(f.value for f in dist.ALL_FAMILIES)
    gap_bin_width: float = 10.0
    gap_max_min: float = 45_000.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.speed_cap_kmh <= 0:
            raise ConfigError("speed cap must be positive")
        if self.window_end < self.window_start:
            raise ConfigError("window end precedes start")
        if self.frequency_mode not in ("strict", "average"):
            raise ConfigError("frequency_mode must be 'strict' or 'average'")
        for f in self.families:
            dist.as_family(f)
        self.miner  # validates

    @property
    def schema(self) -> SchemaConfig:
        return SchemaConfig(delimiter=self.delimiter, has_header=True, tz_offset_hours=self.tz_offset_hours)

    @property
    def miner(self) -> MinerConfig:
        return MinerConfig(self.d_th, self.home_work_ratio, tuple(self.morning_window), tuple(self.evening_window),
                           self.strict_alg1_origin_first, self.schema.tz)

    @property
    def window(self) -> Tuple[date, date]:
        return self.window_start, self.window_end

    def to_json(self):
        doc = asdict(self)
        doc["region"] = self.region.to_json()
        doc["grid"] = {"bounds": self.grid.bounds.as_list(), "n_cols": self.grid.n_cols, "n_rows": self.grid.n_rows}
        doc["window_start"] = self.window_start.isoformat()
        doc["window_end"] = self.window_end.isoformat()
        doc["morning_window"] = list(self.morning_window)
        doc["evening_window"] = list(self.evening_window)
        doc["families"] = list(self.families)
        return doc

    @classmethod
    def from_json(cls, doc) -> "PipelineConfig":
        kw = {}
        for key, val in doc.items():
            if key == "region":
                val = region_from_json(val)
            elif key == "grid":
                val = grid_from_json(val)
            elif key in ("window_start", "window_end"):
                val = date.fromisoformat(val)
            elif key in ("morning_window", "evening_window", "families"):
                val = tuple(val)
            elif key not in cls.__dataclass_fields__:
                raise ConfigError(f"unknown config key {key!r}")
            kw[key] = val
        return cls(**kw)

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_json())).hexdigest()


def canonical_json(doc) -> bytes:
    return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode("utf-8")


class ArtifactWriter:
    """Tracks every file written so a failed run can remove its partial output."""

    def __init__(self):
        self.written: List[Path] = []

    def write_bytes(self, path, data: bytes) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.written.append(path)
        return path

    def write_json(self, path, doc) -> Path:
        return self.write_bytes(path, canonical_json(doc))

    def write_csv(self, path, header: Sequence[str], rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return self.write_bytes(path, buf.getvalue().encode("utf-8"))

    def rollback(self):
        for p in reversed(self.written):
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        self.written.clear()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(writer: ArtifactWriter, out_dir, command: str, inputs: Sequence, cfg: PipelineConfig,
                   seed=None, extra=None):
    doc = {
        "command": command,
        "inputs": [{"name": Path(p).name, "sha256": sha256_file(p)} for p in inputs],
        "config": cfg.to_json(),
        "config_hash": cfg.config_hash(),
        "seed": seed if seed is not None else cfg.seed,
        "toolkit_version": __version__,
    }
    if extra:
        doc.update(extra)
    writer.write_json(Path(out_dir) / "manifest.json", doc)


def _by_user(records: Sequence[TripRecord]) -> Dict[str, List[TripRecord]]:
    out: Dict[str, List[TripRecord]] = defaultdict(list)
    for t in records:
        out[t.p_id].append(t)
    return dict(sorted(out.items()))


# --- stages -----------------------------------------------------------------

def stage_clean(input_path, out_dir, cfg: PipelineConfig, writer: ArtifactWriter):
    out_dir = Path(out_dir)
    parsed, parse_report = read_records(input_path, cfg.schema)
    kept, clean_report = clean(parsed, cfg.region, cfg.speed_cap_kmh, cfg.convert_gcj02)
    report = CleaningReport(
        total_read=parse_report.total_read,
        rejected_parse=parse_report.rejected_parse,
        rejected_region=clean_report.rejected_region,
        rejected_speed=clean_report.rejected_speed,
        rejected_time_order=clean_report.rejected_time_order,
        retained=clean_report.retained,
    )
    months = months_between(cfg.window_start, cfg.window_end)
    users = select_frequent_users(kept, cfg.min_monthly_trips, months, cfg.schema.tz, cfg.frequency_mode)
    cohort = [t for t in kept if t.p_id in users]
    writer.write_bytes(out_dir / "cleaned.csv", emit_table(cohort, cfg.schema))
    doc = report.to_json()
    doc["cohort"] = {
        "users_retained": len({t.p_id for t in kept}),
        "frequent_users": len(users),
        "records_in_cohort": len(cohort),
        "min_monthly_trips": cfg.min_monthly_trips,
        "mode": cfg.frequency_mode,
    }
    writer.write_json(out_dir / "cleaning_report.json", doc)
    write_manifest(writer, out_dir, "clean", [input_path], cfg)
    return cohort, report


def mine_all(records: Sequence[TripRecord], cfg: PipelineConfig) -> Dict[str, UserPlaces]:
    return {u: mine_user(trips, cfg.miner) for u, trips in _by_user(records).items()}


def stage_mine(cleaned_path, out_dir, cfg: PipelineConfig, writer: ArtifactWriter):
    out_dir = Path(out_dir)
    records, _ = read_records(cleaned_path, cfg.schema)
    users = mine_all(records, cfg)
    writer.write_json(out_dir / "places.json", {"users": [up.to_json() for up in users.values()]})
    write_manifest(writer, out_dir, "mine-places", [cleaned_path], cfg)
    return users


def load_places(path) -> Dict[str, UserPlaces]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return {u["p_id"]: user_places_from_json(u) for u in doc["users"]}


CLASSIFIED_COLUMNS = COLUMNS + ("class", "duration_min", "origin_pid", "dest_pid", "o_col", "o_row", "d_col", "d_row")


def _cell(c):
    return ("", "") if c is None else (str(c[0]), str(c[1]))


def classified_rows(classified: Sequence[ClassifiedTrip], schema: SchemaConfig):
    for ct in classified:
        base = format_record(ct.base, schema).split(schema.delimiter)
        yield base + [ct.klass.value, repr(ct.duration_min), str(ct.origin_pid), str(ct.dest_pid),
                      *_cell(ct.origin_cell), *_cell(ct.dest_cell)]


def classify_all(records, users: Dict[str, UserPlaces], cfg: PipelineConfig) -> List[ClassifiedTrip]:
    out = []
    for u, trips in _by_user(records).items():
        out.extend(classify_user(sort_user_trips(trips), users[u], cfg.grid))
    return out


def stage_classify(cleaned_path, places_path, out_dir, cfg: PipelineConfig, writer: ArtifactWriter):
    out_dir = Path(out_dir)
    records, _ = read_records(cleaned_path, cfg.schema)
    users = load_places(places_path)
    classified = classify_all(records, users, cfg)
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=cfg.delimiter, lineterminator="\n")
    w.writerow(CLASSIFIED_COLUMNS)
    w.writerows(classified_rows(classified, cfg.schema))
    writer.write_bytes(out_dir / "classified.csv", buf.getvalue().encode("utf-8"))
    write_manifest(writer, out_dir, "classify", [cleaned_path, places_path], cfg)
    return classified


def read_classified(path, cfg: PipelineConfig) -> List[ClassifiedTrip]:
    out = []
    tz = cfg.schema.tz
    with open(path, encoding="utf-8", newline="") as fh:
        rows = csv.reader(fh, delimiter=cfg.delimiter)
        header = next(rows)
        if tuple(header) != CLASSIFIED_COLUMNS:
            raise ConfigError(f"{path}: unexpected classified header")
        for row in rows:
            t = parse_line(row[:10], tz)
            cell = lambda a, b: None if a == "" else (int(a), int(b))
            out.append(ClassifiedTrip(t, TripClass(row[10]), float(row[11]), cell(row[14], row[15]),
                                      cell(row[16], row[17]), int(row[12]), int(row[13])))
    return out


def summary_by_class(classified: Sequence[ClassifiedTrip]):
    out = {}
    for c in CLASSES:
        rows = [ct for ct in classified if ct.klass is c]
        d = np.array([ct.base.distance_km for ct in rows])
        m = np.array([ct.duration_min for ct in rows])
        out[c.value] = {
            "trips": len(rows),
            "mean_distance_km": float(d.mean()) if len(rows) else None,
            "share_over_15km": float((d > 15).mean()) if len(rows) else None,
            "mean_duration_min": float(m.mean()) if len(rows) else None,
        }
    return out


def shape_checks(hourly: Dict[TripClass, List[float]], summary) -> Dict[str, bool]:
    comm = hourly[TripClass.COMMUTING]
    non = hourly[TripClass.NON_COMMUTING]
    peaks = local_maxima(comm)
    md = summary[TripClass.NON_COMMUTING.value]["mean_distance_km"]
    mc = summary[TripClass.COMMUTING.value]["mean_distance_km"]
    return {
        "commuting_morning_peak_7_9": any(7 <= h <= 9 for h in peaks),
        "commuting_evening_peak_17_21": any(17 <= h <= 21 for h in peaks),
        "non_commuting_single_maximal_region": maximal_region_contiguous(non),
        "non_commuting_unimodal": count_modes(non) == 1,
        "non_commuting_longer_than_commuting": md is not None and mc is not None and md > mc,
    }


def stage_stats(classified_path, places_path, out_dir, cfg: PipelineConfig, writer: ArtifactWriter):
    out_dir = Path(out_dir)
    classified = read_classified(classified_path, cfg)
    users = load_places(places_path)
    tz = cfg.schema.tz
    hs = temporal_histograms(classified, cfg.window, tz, cfg.gap_bin_width, cfg.gap_max_min)
    hs.place_count_histogram = place_count_distribution(up.labeling for up in users.values())

    writer.write_csv(out_dir / "daily.csv", ["date", "commuting", "non_commuting"],
                     [[d.isoformat(), c, n] for d, (c, n) in sorted(hs.daily_counts.items())])
    writer.write_csv(out_dir / "hourly.csv", ["hour", "class", "mean_trips"],
                     [[h, c.value, repr(hs.hourly_profile[c][h])] for c in CLASSES for h in range(24)])
    writer.write_csv(out_dir / "gap_histogram.csv", ["bin_start_min", "count"],
                     [[repr(b), n] for b, n in hs.gap_histogram])
    per_user = _by_user([ct.base for ct in classified])
    mean_gaps = mean_gap_by_monthly_trips(per_user, tz)
    writer.write_csv(out_dir / "mean_gap_by_monthly_trips.csv", ["monthly_trips", "mean_gap_min"],
                     [[k, repr(v)] for k, v in mean_gaps.items()])
    writer.write_csv(out_dir / "place_counts.csv", ["n_places", "users"],
                     [[k, v] for k, v in hs.place_count_histogram.items()])
    ranks = rank_probability_by_cohort(up.labeling for up in users.values())
    writer.write_csv(out_dir / "rank_probability.csv", ["n_places", "rank", "mean_probability", "users"],
                     [[k, r, repr(p), n] for k, rows in ranks.items() for r, p, n in rows])
    grid = grid_mean_distance(classified, cfg.grid)
    writer.write_csv(out_dir / "grid_distance.csv", ["col", "row", "class", "mean_km", "count"],
                     [[col, row, c.value, repr(m), n] for c in CLASSES for (col, row), (m, n) in grid[c].items()])
    hw = home_work_cells(users.values(), cfg.grid)
    writer.write_csv(out_dir / "home_work_cells.csv", ["col", "row", "home_count", "work_count"],
                     [[col, row, h, w] for (col, row), (h, w) in hw.items()])

    summary = summary_by_class(classified)
    report = {
        "summary": summary,
        "daily_counts": {d.isoformat(): list(v) for d, v in sorted(hs.daily_counts.items())},
        "hourly_profile": {c.value: hs.hourly_profile[c] for c in CLASSES},
        "mean_gap_by_monthly_trips": {str(k): v for k, v in mean_gaps.items()},
        "place_count_histogram": {str(k): v for k, v in hs.place_count_histogram.items()},
        "shape_checks": shape_checks(hs.hourly_profile, summary),
        "users": len(users),
        "users_with_home": sum(up.home is not None for up in users.values()),
        "users_with_work": sum(up.work is not None for up in users.values()),
    }
    writer.write_json(out_dir / "stats_report.json", report)
    write_manifest(writer, out_dir, "stats", [classified_path, places_path], cfg)
    return report


QUANTITIES = ("distance", "time")


def _quantity(ct: ClassifiedTrip, q: str) -> float:
    return ct.base.distance_km if q == "distance" else ct.duration_min


def pdf_overlay_rows(data, ranking, n_points: int = 200):
    x = np.asarray(data, dtype=float)
    lo, hi = float(np.quantile(x, 0.001)), float(np.quantile(x, 0.999))
    grid = np.linspace(lo, hi, n_points)
    ok = [m for m in ranking if m.ok]
    cols = [dist.pdf(m.family, m.params, grid) for m in ok]
    header = ["x"] + [m.family.value for m in ok]
    rows = [[repr(float(g))] + [repr(float(c[i])) for c in cols] for i, g in enumerate(grid)]
    return header, rows


def stage_fit(classified_path, out_dir, cfg: PipelineConfig, writer: ArtifactWriter, pdf_csv: bool = False):
    """One ranking JSON per (class, quantity).  Returns ``{name: ranking}``."""
    out_dir = Path(out_dir)
    classified = read_classified(classified_path, cfg)
    results = {}
    for c in CLASSES:
        for q in QUANTITIES:
            data = [_quantity(ct, q) for ct in classified if ct.klass is c]
            name = f"{c.value}_{q}"
            if len(data) < 10:
                results[name] = []
                writer.write_json(out_dir / f"fit_{name}.json",
                                  {"class": c.value, "quantity": q, "n": len(data), "ranking": [],
                                   "note": "fewer than 10 observations"})
                continue
            ranking = fit_and_rank(data, cfg.families)
            results[name] = ranking
            writer.write_json(out_dir / f"fit_{name}.json",
                              {"class": c.value, "quantity": q, "n": len(data),
                               "ranking": [m.to_json() for m in ranking]})
            if pdf_csv:
                header, rows = pdf_overlay_rows(data, ranking)
                writer.write_csv(out_dir / f"pdf_{name}.csv", header, rows)
    write_manifest(writer, out_dir, "fit", [classified_path], cfg)
    failed = [n for n, r in results.items() if r and not any(m.ok for m in r)]
    if failed:
        raise FitError(f"every family failed for {', '.join(failed)}")
    return results


def fit_values_file(values_path, out_dir, cfg: PipelineConfig, writer: ArtifactWriter, pdf_csv: bool = False):
    out_dir = Path(out_dir)
    with open(values_path, encoding="utf-8") as fh:
        data = [float(line.split(cfg.delimiter)[0]) for line in fh if line.strip()
                and not line.strip().lower().startswith(("x", "value", "#"))]
    ranking = fit_and_rank(data, cfg.families)
    writer.write_json(out_dir / "ranking.json", [m.to_json() for m in ranking])
    if pdf_csv:
        header, rows = pdf_overlay_rows(data, ranking)
        writer.write_csv(out_dir / "pdf.csv", header, rows)
    write_manifest(writer, out_dir, "fit", [values_path], cfg)
    if not any(m.ok for m in ranking):
        raise FitError("every family failed")
    return ranking
