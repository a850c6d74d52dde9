"""Command-line front end: generate, ingest, analyze, report.

Subcommands wire the pipeline end to end over delimiter-separated
files in an input directory (cdr.csv, towers.csv, states.csv, and
optionally projections.csv):

- ``gen``        write a synthetic scenario's input files
- ``ingest``     parse + deduplicate, emit observations and counts
- ``attendance`` daily/cumulative estimates, calibration, sensitivity
- ``social``     triple census and the closure-vs-representation fit
- ``spatial``    co-location report, day partition, bootstrap CIs
- ``sbm``        block-model baseline and the group-structure bias demo
- ``report``     all of the above plus a single summary

Exit codes: 2 for usage errors, 3 for data/validation errors, 4 for
numerical analysis failures (separation, non-convergence). Every run
writes a manifest with a content digest per output file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from . import attendance as att
from . import geo, sbm, social, spatial, synth
from .errors import (
    AnalysisError,
    ConfigurationError,
    ConvergenceError,
    EstimationError,
    IngestError,
    SchemaError,
    SeparationError,
)
from .ingest import (
    DEFAULT_WINDOW,
    IngestReport,
    StudyWindow,
    count_unique_handsets,
    dedupe_daily,
    load_projections,
    load_state_profiles,
    load_towers,
    local_state,
    mark_tower_activity,
    parse_cdr,
    towers_with_traffic,
    write_table,
)

DATA_ERRORS = (SchemaError, IngestError, ConfigurationError)
ANALYSIS_ERRORS = (EstimationError, AnalysisError, SeparationError,
                   ConvergenceError)

#: Analysis defaults; the *_note entries document where each constant
#: comes from so emitted config files are self-describing.
DEFAULT_CONFIG: dict = {
    "prevalence": 0.713,
    "daily_use": 0.404,
    "non_use": 0.406,
    "sensitivity_numerator": 24_467_257,
    "sensitivity_grid": [round(0.05 * k, 2) for k in range(1, 20)],
    "calibrate_non_use": True,
    "exclude_local": True,
    "subsample_seed": 0,
    "bootstrap_replicates": 1000,
    "bootstrap_seed": 0,
    "peak_mode": "data",
    "calendar_peaks": [41, 46, 69],
    "_notes": {
        "prevalence": "wireless subscription rate for the visitor "
                      "population, 2013 telecom-census figure",
        "daily_use": "share of present customers who use the phone on a "
                     "given day; the pipeline re-estimates this from "
                     "observed stay spans, this value is the fallback",
        "non_use": "share of customers who never use the phone during "
                   "their stay; recalibrated against projections when "
                   "calibrate_non_use is true and projections exist",
        "sensitivity_numerator": "numerator of the published reciprocal "
                                 "sensitivity curve f(q) = c/q",
        "calendar_peaks": "principal bathing days as 1-based day indices "
                          "(Feb 10, Feb 15, Mar 10 for a Jan 1 start)",
    },
}


def load_config(path: str | None) -> dict:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path:
        try:
            user = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        unknown = set(user) - set(cfg)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(user)
    return cfg


def sha256_of(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Inputs, outputs (with digests), versions, and timings of one run."""

    command: str
    seed: int | None = None
    config_digest: str = ""
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, dict] = field(default_factory=dict)
    timings_s: dict[str, float] = field(default_factory=dict)
    versions: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.versions = {
            "crowdcdr": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        }

    def add_output(self, name: str, path: Path) -> None:
        self.outputs[name] = {"path": str(path), "sha256": sha256_of(path)}

    def write(self, path: Path) -> None:
        blob = {
            "command": self.command,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings_s": self.timings_s,
            "versions": self.versions,
        }
        path.write_text(json.dumps(blob, indent=2) + "\n", encoding="utf-8")


def config_digest(cfg: Mapping) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode("utf-8")
    ).hexdigest()


# ---------------------------------------------------------------------------
# Shared data loading


@dataclass
class PipelineData:
    """Everything the analysis stages consume, loaded once."""

    events: list
    observations: list
    counts: dict
    towers: list
    profiles: dict
    projections: dict | None
    local: int
    window: StudyWindow
    report: IngestReport


def load_pipeline_data(
    input_dir: Path, *, window: StudyWindow = DEFAULT_WINDOW
) -> PipelineData:
    cdr = input_dir / "cdr.csv"
    towers_path = input_dir / "towers.csv"
    states_path = input_dir / "states.csv"
    for p in (cdr, towers_path, states_path):
        if not p.exists():
            raise IngestError(f"missing input file {p}")
    towers = load_towers(towers_path)
    profiles = load_state_profiles(states_path)
    report = IngestReport()
    events = list(parse_cdr(
        cdr,
        window=window,
        known_towers={t.tower_id for t in towers},
        report=report,
    ))
    towers = mark_tower_activity(towers, towers_with_traffic(events))
    observations = dedupe_daily(events, window=window)
    counts = count_unique_handsets(observations)
    proj_path = input_dir / "projections.csv"
    projections = load_projections(proj_path) if proj_path.exists() else None
    return PipelineData(
        events=events,
        observations=observations,
        counts=counts,
        towers=towers,
        profiles=profiles,
        projections=projections,
        local=local_state(profiles),
        window=window,
        report=report,
    )


# ---------------------------------------------------------------------------
# Stages. Each returns {artifact name: Path} for the manifest.


def stage_ingest(data: PipelineData, outdir: Path) -> dict[str, Path]:
    out = {}
    out["observations"] = outdir / "observations.csv"
    write_table(
        out["observations"],
        ("person_id", "state_code", "day", "first_tower"),
        [(o.person_id, o.state_code, o.day, o.first_tower)
         for o in data.observations],
    )
    out["counts"] = outdir / "counts.csv"
    write_table(
        out["counts"],
        ("state_code", "day", "unique_handsets"),
        [(s, d, n) for (s, d), n in sorted(data.counts.items())],
    )
    out["ingest_report"] = outdir / "ingest_report.json"
    out["ingest_report"].write_text(json.dumps({
        "rows": data.report.rows,
        "accepted": data.report.accepted,
        "rejected": dict(sorted(data.report.rejects.items())),
        "towers_active": sum(t.active for t in data.towers),
        "towers_silent": sum(not t.active for t in data.towers),
    }, indent=2) + "\n", encoding="utf-8")
    return out


def build_attendance(data: PipelineData, cfg: Mapping) -> att.AttendanceSeries:
    factors = att.AdjustmentFactors(
        prevalence=cfg["prevalence"],
        daily_use=cfg["daily_use"],
        non_use=cfg["non_use"],
    )
    projections = data.projections if cfg["calibrate_non_use"] else None
    return att.build_series(
        data.observations, data.counts, data.profiles,
        total_days=data.window.days, factors=factors,
        projections=projections,
    )


def stage_attendance(
    data: PipelineData, cfg: Mapping, outdir: Path
) -> tuple[dict[str, Path], att.AttendanceSeries]:
    series = build_attendance(data, cfg)
    out = {}
    out["attendance_daily"] = outdir / "attendance_daily.csv"
    write_table(
        out["attendance_daily"], ("day", "estimate"),
        sorted(series.daily.items()),
    )
    out["attendance_cumulative"] = outdir / "attendance_cumulative.csv"
    write_table(
        out["attendance_cumulative"], ("day", "estimate"),
        sorted(series.cumulative.items()),
    )
    out["attendance_by_state"] = outdir / "attendance_by_state.csv"
    write_table(
        out["attendance_by_state"],
        ("state_code", "day", "daily", "cumulative"),
        [
            (s, d, series.by_state_daily.get((s, d), 0.0),
             series.by_state_cumulative[(s, d)])
            for (s, d) in sorted(series.by_state_cumulative)
        ],
    )
    out["representation"] = outdir / "representation.csv"
    write_table(
        out["representation"], ("state_code", "w"),
        sorted(series.representation.items()),
    )
    grid = [q for q in cfg["sensitivity_grid"] if 0 < q < 1]
    final_day = data.window.days
    base_total = series.cumulative[final_day] * (1.0 - series.factors.non_use)
    curve = att.sensitivity_curve(cfg["sensitivity_numerator"], grid)
    adjusted = att.nonuse_adjusted_totals(base_total, grid)
    out["sensitivity"] = outdir / "sensitivity.csv"
    write_table(
        out["sensitivity"],
        ("non_use", "reciprocal_estimate", "censoring_estimate"),
        [(q, a, b) for (q, a), (_, b) in zip(curve, adjusted)],
    )
    peak_day = max(series.daily, key=lambda d: (series.daily[d], -d), default=None)
    out["attendance_summary"] = outdir / "attendance_summary.json"
    out["attendance_summary"].write_text(json.dumps({
        "daily_use_estimate": series.daily_use_estimate,
        "non_use_calibrated": series.non_use_estimate,
        "factors": {
            "prevalence": series.factors.prevalence,
            "daily_use": series.factors.daily_use,
            "non_use": series.factors.non_use,
        },
        "final_cumulative": series.cumulative[final_day],
        "peak_day": peak_day,
        "peak_daily": series.daily.get(peak_day),
    }, indent=2) + "\n", encoding="utf-8")
    return out, series


def stage_social(
    data: PipelineData, cfg: Mapping, outdir: Path,
    series: att.AttendanceSeries,
) -> tuple[dict[str, Path], social.LogisticFit]:
    net = social.build_network(
        data.events,
        exclude_local=cfg["exclude_local"],
        local_state=data.local,
    )
    census = social.census_triples(net)
    out = {}
    out["social_census"] = outdir / "social_census.csv"
    write_table(
        out["social_census"],
        ("state_code", "closed", "open", "transitivity", "closed_fraction", "w"),
        [
            (s, census.closed.get(s, 0), census.open.get(s, 0),
             social.transitivity(census, s), social.closed_fraction(census, s),
             series.representation.get(s, ""))
            for s in net.states()
        ],
    )
    triples = social.enumerate_connected_triples(net)
    fit = social.fit_closure_model(
        triples, series.representation, seed=cfg["subsample_seed"],
    )
    subset = social.subsample_independent(triples, cfg["subsample_seed"])
    out["social_fit"] = outdir / "social_fit.json"
    out["social_fit"].write_text(json.dumps({
        "n_nodes": net.n_nodes,
        "n_edges": net.n_edges,
        "n_triples_all": len(triples),
        "n_triples_independent": len(subset),
        "subsample_seed": cfg["subsample_seed"],
        "beta0": fit.beta0,
        "beta1": fit.beta1,
        "se1": fit.se1,
        "ci1": list(fit.ci1),
        "p_value": fit.p_value,
        "odds_ratio_per_decade": fit.odds_ratio_per_decade,
        "n_iterations": fit.n_iterations,
        "max_score": fit.max_score,
    }, indent=2) + "\n", encoding="utf-8")
    return out, fit


def _cell_map(towers) -> dict[int, int]:
    """tower_id -> serving active tower (itself, or nearest when silent)."""
    origin = geo.tower_origin(towers)
    mapping: dict[int, int] = {
        t.tower_id: t.tower_id for t in towers if t.active
    }
    for t in towers:
        if not t.active:
            point = geo.project_local(t.latitude, t.longitude, *origin)
            mapping[t.tower_id] = geo.nearest_active_tower(
                point, towers, origin=origin
            )
    return mapping


def stage_spatial(
    data: PipelineData, cfg: Mapping, outdir: Path,
    series: att.AttendanceSeries,
) -> tuple[dict[str, Path], dict]:
    cell_of = _cell_map(data.towers)
    # Unlike the social stage, the host state stays in: its (weak)
    # co-location is part of the per-state spatial report.
    col = spatial.build_colocation_series(
        data.observations, n_days=data.window.days, cell_of_tower=cell_of,
    )
    if cfg["peak_mode"] == "calendar":
        high, low = spatial.partition_days(
            series.daily, n_days=data.window.days,
            peak_days=cfg["calendar_peaks"],
        )
    else:
        high, low = spatial.partition_days(series.daily, n_days=data.window.days)
    report = spatial.aggregate_q(col, high, low)
    spatial.attach_bootstrap_cis(
        report, col, high, low,
        replicates=cfg["bootstrap_replicates"], seed=cfg["bootstrap_seed"],
    )
    rep_daily = spatial.daily_representation(series.by_state_daily)
    mean_log = spatial.mean_log_representation(rep_daily)
    rho_a = spatial.correlate({s: r.q_a for s, r in report.items()}, mean_log)
    rho_d = spatial.correlate({s: r.q_d for s, r in report.items()}, mean_log)

    out = {}
    out["spatial_daily"] = outdir / "spatial_daily.csv"
    write_table(
        out["spatial_daily"], ("state_code", "day", "n", "p"),
        [
            (s, d, col.totals[(s, d)], col.p[(s, d)])
            for (s, d) in sorted(col.p)
            if col.p[(s, d)] is not None
        ],
    )
    out["spatial_report"] = outdir / "spatial_report.csv"
    write_table(
        out["spatial_report"],
        ("state_code", "q_a", "q_a_lo", "q_a_hi", "q_h", "q_l",
         "q_d", "q_d_lo", "q_d_hi", "n_days"),
        [
            (
                s, r.q_a,
                r.ci_a[0] if r.ci_a else "", r.ci_a[1] if r.ci_a else "",
                r.q_h, r.q_l, r.q_d,
                r.ci_d[0] if r.ci_d else "", r.ci_d[1] if r.ci_d else "",
                r.n_days_defined,
            )
            for s, r in sorted(report.items())
        ],
    )
    active = [t for t in data.towers if t.active]
    cells = geo.build_tessellation(data.towers)
    out["cells"] = outdir / "cells.csv"
    write_table(
        out["cells"], ("tower_id", "area_km2", "wkt"),
        geo.cells_table(cells),
    )
    summary = {
        "rho_a": rho_a,
        "rho_d": rho_d,
        "high_days": sorted(high),
        "peak_mode": cfg["peak_mode"],
        "n_active_cells": len(active),
        "bootstrap_replicates": cfg["bootstrap_replicates"],
    }
    out["spatial_summary"] = outdir / "spatial_summary.json"
    out["spatial_summary"].write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    return out, summary


def stage_sbm(
    data: PipelineData | None, cfg: Mapping, outdir: Path, seed: int
) -> dict[str, Path]:
    out = {}
    curve = sbm.bias_curve(
        [1, 2, 5, 10, 20, 50, 100, 200, 500], m=5, p_in=0.20, p_out=0.04
    )
    out["sbm_bias_curve"] = outdir / "sbm_bias_curve.csv"
    write_table(out["sbm_bias_curve"], ("groups", "avg_edge_probability"), curve)
    demo = sbm.joint_bias_demo(seed=seed)
    out["sbm_demo"] = outdir / "sbm_demo.json"
    out["sbm_demo"].write_text(json.dumps({
        "analytic": demo.analytic,
        "estimated": demo.estimated,
        "ratio_estimated": demo.ratio_estimated,
        "ratio_analytic": demo.ratio_analytic,
        "within_group_transitivity": demo.within_transitivity,
        "triples": {str(k): list(v) for k, v in demo.triples.items()},
    }, indent=2) + "\n", encoding="utf-8")
    if data is not None:
        net = social.build_network(
            data.events, exclude_local=cfg["exclude_local"],
            local_state=data.local,
        )
        est = sbm.estimate_block_probs(net)
        out["sbm_blocks"] = outdir / "sbm_blocks.csv"
        write_table(
            out["sbm_blocks"],
            ("state_code", "n", "edges_within", "p_kk", "baseline"),
            sbm.block_table(est),
        )
    return out


# ---------------------------------------------------------------------------
# Command implementations


def _finish(manifest: RunManifest, outputs: Mapping[str, Path], outdir: Path,
            t0: float) -> int:
    for name, path in outputs.items():
        manifest.add_output(name, path)
    manifest.timings_s["total"] = round(time.monotonic() - t0, 3)
    manifest.write(outdir / f"manifest_{manifest.command}.json")
    return 0


def cmd_gen(args) -> int:
    t0 = time.monotonic()
    if args.config:
        config = synth.ScenarioConfig.from_json(args.config)
        if args.seed is not None:
            config.seed = args.seed
    else:
        config = synth.named_scenario(args.scenario, args.seed or 1)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths, truth = synth.generate(config, outdir)
    manifest = RunManifest("gen", seed=config.seed,
                           config_digest=config_digest(truth.summary()["planted"]))
    print(f"gen: {len(truth.true_total)} states, "
          f"{sum(truth.visible.values())} visible customers, "
          f"{len(truth.edges)} ties -> {outdir}")
    return _finish(manifest, paths, outdir, t0)


def _prepare(args) -> tuple[PipelineData, dict, Path, RunManifest, float]:
    t0 = time.monotonic()
    cfg = load_config(args.config)
    data = load_pipeline_data(Path(args.input_dir))
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(args.command, seed=getattr(args, "seed", None),
                           config_digest=config_digest(cfg))
    manifest.inputs = {
        name: str(Path(args.input_dir) / f"{name}.csv")
        for name in ("cdr", "towers", "states")
    }
    return data, cfg, outdir, manifest, t0


def _apply_flags(cfg: dict, args) -> None:
    if getattr(args, "exclude_local", None) is not None:
        cfg["exclude_local"] = args.exclude_local
    if getattr(args, "peak_mode", None):
        cfg["peak_mode"] = args.peak_mode
    if getattr(args, "bootstrap_replicates", None):
        cfg["bootstrap_replicates"] = args.bootstrap_replicates


def cmd_ingest(args) -> int:
    data, cfg, outdir, manifest, t0 = _prepare(args)
    out = stage_ingest(data, outdir)
    print(f"ingest: {data.report.accepted}/{data.report.rows} rows accepted, "
          f"{len(data.observations)} person-days")
    return _finish(manifest, out, outdir, t0)


def cmd_attendance(args) -> int:
    data, cfg, outdir, manifest, t0 = _prepare(args)
    out, series = stage_attendance(data, cfg, outdir)
    final = series.cumulative[data.window.days]
    print(f"attendance: cumulative {final:,.0f}, "
          f"daily_use {series.daily_use_estimate:.4f}, "
          f"non_use {series.factors.non_use:.4f}")
    return _finish(manifest, out, outdir, t0)


def cmd_social(args) -> int:
    data, cfg, outdir, manifest, t0 = _prepare(args)
    _apply_flags(cfg, args)
    series = build_attendance(data, cfg)
    out, fit = stage_social(data, cfg, outdir, series)
    print(f"social: beta1 {fit.beta1:+.4f} "
          f"(95% CI {fit.ci1[0]:+.4f}..{fit.ci1[1]:+.4f}, "
          f"n={fit.n_triples})")
    return _finish(manifest, out, outdir, t0)


def cmd_spatial(args) -> int:
    data, cfg, outdir, manifest, t0 = _prepare(args)
    _apply_flags(cfg, args)
    series = build_attendance(data, cfg)
    out, summary = stage_spatial(data, cfg, outdir, series)
    rho = summary["rho_a"]
    print(f"spatial: rho_A {rho:+.3f}" if rho is not None
          else "spatial: rho_A undefined")
    return _finish(manifest, out, outdir, t0)


def cmd_sbm(args) -> int:
    t0 = time.monotonic()
    cfg = load_config(args.config)
    data = None
    if args.input_dir:
        data = load_pipeline_data(Path(args.input_dir))
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("sbm", seed=args.seed, config_digest=config_digest(cfg))
    out = stage_sbm(data, cfg, outdir, args.seed)
    print("sbm: bias curve and joint demo written")
    return _finish(manifest, out, outdir, t0)


def cmd_report(args) -> int:
    data, cfg, outdir, manifest, t0 = _prepare(args)
    _apply_flags(cfg, args)
    outputs: dict[str, Path] = {}
    stage_t = time.monotonic()
    outputs.update(stage_ingest(data, outdir))
    manifest.timings_s["ingest"] = round(time.monotonic() - stage_t, 3)

    stage_t = time.monotonic()
    att_out, series = stage_attendance(data, cfg, outdir)
    outputs.update(att_out)
    manifest.timings_s["attendance"] = round(time.monotonic() - stage_t, 3)

    stage_t = time.monotonic()
    soc_out, fit = stage_social(data, cfg, outdir, series)
    outputs.update(soc_out)
    manifest.timings_s["social"] = round(time.monotonic() - stage_t, 3)

    stage_t = time.monotonic()
    spa_out, spa_summary = stage_spatial(data, cfg, outdir, series)
    outputs.update(spa_out)
    manifest.timings_s["spatial"] = round(time.monotonic() - stage_t, 3)

    stage_t = time.monotonic()
    outputs.update(stage_sbm(data, cfg, outdir, args.seed or 0))
    manifest.timings_s["sbm"] = round(time.monotonic() - stage_t, 3)

    final = data.window.days
    summary = {
        "rows_accepted": data.report.accepted,
        "person_days": len(data.observations),
        "cumulative_attendance": series.cumulative[final],
        "peak_daily_attendance": max(series.daily.values(), default=None),
        "daily_use_estimate": series.daily_use_estimate,
        "non_use_calibrated": series.non_use_estimate,
        "beta1": fit.beta1,
        "beta1_ci": list(fit.ci1),
        "rho_a": spa_summary["rho_a"],
        "rho_d": spa_summary["rho_d"],
    }
    summary_path = outdir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n",
                            encoding="utf-8")
    outputs["summary"] = summary_path
    print(json.dumps(summary, indent=2))
    return _finish(manifest, outputs, outdir, t0)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdcdr",
        description="Crowd attendance and homophily estimation from CDR files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, inputs=True):
        if inputs:
            p.add_argument("--input-dir", required=True,
                           help="directory with cdr.csv, towers.csv, states.csv")
        p.add_argument("--output-dir", required=True)
        p.add_argument("--config", help="JSON analysis config; defaults apply")

    p = sub.add_parser("gen", help="generate a synthetic scenario")
    p.add_argument("--scenario", default="desk-small",
                   help="desk | desk-small | band | representation-range")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", help="scenario config JSON (overrides --scenario)")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest", help="parse, deduplicate, count")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("attendance", help="attendance estimates + sensitivity")
    common(p)
    p.set_defaults(func=cmd_attendance)

    p = sub.add_parser("social", help="triple census + closure fit")
    common(p)
    p.add_argument("--exclude-local", dest="exclude_local",
                   action="store_true", default=None)
    p.add_argument("--include-local", dest="exclude_local",
                   action="store_false")
    p.set_defaults(func=cmd_social)

    p = sub.add_parser("spatial", help="co-location report")
    common(p)
    p.add_argument("--peak-mode", choices=("data", "calendar"))
    p.add_argument("--bootstrap-replicates", type=int)
    p.set_defaults(func=cmd_spatial)

    p = sub.add_parser("sbm", help="block-model baseline + bias demo")
    p.add_argument("--input-dir", help="optional; adds per-state block table")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sbm)

    p = sub.add_parser("report", help="full pipeline + summary")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exclude-local", dest="exclude_local",
                   action="store_true", default=None)
    p.add_argument("--include-local", dest="exclude_local",
                   action="store_false")
    p.add_argument("--peak-mode", choices=("data", "calendar"))
    p.add_argument("--bootstrap-replicates", type=int)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ANALYSIS_ERRORS as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
