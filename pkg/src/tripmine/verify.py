"""End-to-end check: synthesize, run every stage from files, score against truth."""
from __future__ import annotations

from pathlib import Path
from typing import Dict

import numpy as np

from .geo import haversine_distance
from .pipeline import (ArtifactWriter, PipelineConfig, load_places, read_classified, stage_classify,
                       stage_clean, stage_fit, stage_mine, stage_stats, write_manifest)
from .synth import COMMUTING, NON_COMMUTING, GroundTruth, SynthSpec, emit_records, generate_population, truth_bytes

HOME_MIN = 0.95
WORK_MIN = 0.90
CLASS_MIN = 0.99
FIT_MAX_REL = 0.05


def config_for_spec(spec: SynthSpec) -> PipelineConfig:
    return PipelineConfig(
        region=spec.region, grid=spec.grid, tz_offset_hours=spec.tz_offset_hours,
        speed_cap_kmh=spec.speed_cap_kmh, convert_gcj02=False, window_start=spec.window_start,
        window_end=spec.window_end, d_th=spec.d_th, morning_window=spec.morning_window,
        evening_window=spec.evening_window, seed=spec.seed)


def stage_synth(spec: SynthSpec, records_path, truth_path, writer: ArtifactWriter):
    pop = generate_population(spec)
    writer.write_bytes(records_path, emit_records(pop))
    writer.write_bytes(truth_path, truth_bytes(pop.truth))
    writer.write_json(Path(records_path).parent / "synth_spec.json", spec.to_json())
    return pop


def _matches(up, pid, center, tol_m) -> bool:
    return pid is not None and center is not None and haversine_distance(up.labeling.centroid(pid), center) <= tol_m


def score(truth: GroundTruth, users, classified, fits, spec: SynthSpec, stats_report) -> Dict:
    tol = spec.jitter_m + 1.0
    commuters = [u for u in truth.users if u.commuter]
    home_ok = work_ok = 0
    both = set()
    spurious = 0
    exact_places = 0
    for u in truth.users:
        up = users[u.p_id]
        exact_places += up.labeling.n_places == len(u.places)
        if u.commuter:
            h = _matches(up, up.home_pid, u.home, tol)
            w = _matches(up, up.work_pid, u.work, tol)
            home_ok += h
            work_ok += w
            if h and w:
                both.add(u.p_id)
        elif up.home is not None and up.work is not None:
            spurious += 1
    labels = {r: k for u in truth.users for r, k in u.trip_labels.items()}
    judged = [ct for ct in classified if ct.base.p_id in both]
    agree = sum(labels[ct.base.r_id] == ct.klass.value for ct in judged)

    fit_rows = []
    for klass in (COMMUTING, NON_COMMUTING):
        for q, model in (("distance", spec.distance_model[klass]), ("time", spec.duration_model[klass])):
            fam, true = model
            ranking = fits.get(f"{klass}_{q}", [])
            row = next((m for m in ranking if m.family.value == fam and m.ok), None)
            rel = None if row is None else float(np.max(np.abs(row.params / np.asarray(true) - 1)))
            gated = q == "distance"
            fit_rows.append({
                "class": klass, "quantity": q, "family": fam, "true": list(true),
                "fitted": None if row is None else [float(v) for v in row.params],
                "max_rel_error": rel, "gated": gated,
                "rank": None if row is None else ranking.index(row) + 1,
            })

    n_comm = len(commuters)
    rates = {
        "home_recovery": home_ok / n_comm if n_comm else None,
        "work_recovery": work_ok / n_comm if n_comm else None,
        "class_agreement": agree / len(judged) if judged else None,
        "place_count_exact": exact_places / len(truth.users) if truth.users else None,
    }
    checks = {
        "home_recovery": rates["home_recovery"] is not None and rates["home_recovery"] >= HOME_MIN,
        "work_recovery": rates["work_recovery"] is not None and rates["work_recovery"] >= WORK_MIN,
        "class_agreement": rates["class_agreement"] is not None and rates["class_agreement"] >= CLASS_MIN,
        "distance_fit_recovery": all(r["max_rel_error"] is not None and r["max_rel_error"] <= FIT_MAX_REL
                                     for r in fit_rows if r["gated"]),
    }
    checks.update(stats_report["shape_checks"])
    return {
        "seed": spec.seed,
        "n_users": len(truth.users),
        "n_commuters": n_comm,
        "users_with_both_recovered": len(both),
        "non_commuters_with_spurious_home_and_work": spurious,
        "trips_judged_for_class_agreement": len(judged),
        "rates": rates,
        "thresholds": {"home_recovery": HOME_MIN, "work_recovery": WORK_MIN,
                       "class_agreement": CLASS_MIN, "fit_max_rel_error": FIT_MAX_REL},
        "fit_recovery": fit_rows,
        "checks": checks,
        "passed": all(checks.values()),
    }


def run_verify(spec: SynthSpec, out_dir, writer: ArtifactWriter) -> Dict:
    out = Path(out_dir)
    cfg = config_for_spec(spec)
    pop = stage_synth(spec, out / "synth" / "records.csv", out / "synth" / "truth.json", writer)
    stage_clean(out / "synth" / "records.csv", out / "clean", cfg, writer)
    stage_mine(out / "clean" / "cleaned.csv", out / "places", cfg, writer)
    stage_classify(out / "clean" / "cleaned.csv", out / "places" / "places.json", out / "classify", cfg, writer)
    stats_report = stage_stats(out / "classify" / "classified.csv", out / "places" / "places.json",
                               out / "stats", cfg, writer)
    fits = stage_fit(out / "classify" / "classified.csv", out / "fit", cfg, writer)

    users = load_places(out / "places" / "places.json")
    classified = read_classified(out / "classify" / "classified.csv", cfg)
    report = score(pop.truth, users, classified, fits, spec, stats_report)
    writer.write_json(out / "verify_report.json", report)
    write_manifest(writer, out, "verify", [out / "synth" / "records.csv"], cfg, seed=spec.seed,
                   extra={"synth_spec": spec.to_json()})
    return report
