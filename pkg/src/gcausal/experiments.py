"""Reproducible experiment runners behind the CLI subcommands.

Every runner takes a resolved :class:`ExperimentConfig`, writes its
artifacts into ``output_dir`` and returns an in-memory summary. Result JSON
embeds the resolved config (minus the output directory) so a rerun from
``resolved_config.toml`` reproduces the files byte for byte.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
from scipy import linalg

from . import baselines, knockoffs as ko, regimes as rg, stats
from .config import ExperimentConfig, dump_config
from .data import (GroupCausalGraph, GroupPartition, TimeSeriesPanel, load_panel, read_json,
                   score_graph, standardize, write_json)
from .engine import derive_seed, discover, link_fractions, min_segment_length
from .errors import ConfigError, DataError, GCausalError
from .scm import sample_spec, simulate

log = logging.getLogger("gcausal")


def _prepare_output(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "resolved_config.toml")
    handler = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    for h in list(log.handlers):
        if isinstance(h, logging.FileHandler):
            log.removeHandler(h)
            h.close()
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    return out


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _nan_to_none(v):
    return None if isinstance(v, float) and math.isnan(v) else v


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _run_method(method: str, panel: TimeSeriesPanel, partition: GroupPartition, cfg: ExperimentConfig):
    """Returns (graph, evidence JSON or None)."""
    if method == "gcdmi":
        res = discover(panel, partition, cfg.discovery_config())
        return res.graph, res.evidence_json()
    if method == "mc-vgc":
        return baselines.mc_vgc_discover(panel, partition, cfg.baseline.var_lag, cfg.discovery.alpha), None
    if method == "mc-cdmi":
        return baselines.mc_cdmi_discover(panel, partition, cfg.discovery_config()), None
    raise ConfigError(f"unknown method {method!r}")


# ---------------------------------------------------------------- simulate

def simulate_dataset(cfg: ExperimentConfig, seed: int):
    d = cfg.data
    partition = GroupPartition.contiguous([int(s) for s in d.group_sizes])
    spec = sample_spec(partition, d.density, d.nonlinearity, d.max_lag, derive_seed(seed, "spec"), d.noise_std)
    panel, truth = simulate(spec, d.length, d.burn_in, derive_seed(seed, "noise"))
    return spec, panel, truth, partition


def run_simulate(cfg: ExperimentConfig) -> dict:
    out = _prepare_output(cfg)
    spec, panel, truth, partition = simulate_dataset(cfg, cfg.seed)
    panel.to_csv(out / "panel.csv")
    write_json(out / "truth_graph.json", truth.to_json())
    write_json(out / "scm_spec.json", {"config": cfg.to_dict(False), "spec": spec.to_json()})
    write_json(out / "groups.json", partition.to_json(panel.variable_names))
    log.info("simulated %d steps x %d variables, %d cross-group edges",
             panel.n_steps, panel.n_vars, len(spec.cross_edges()))
    return {"panel": panel, "truth": truth, "spec": spec}


# ---------------------------------------------------------------- discovery

def load_dataset(cfg: ExperimentConfig):
    """Panel, partition and (for SCM data) the true graph."""
    if cfg.data.source == "csv":
        panel = load_panel(cfg.data.panel, cfg.data.missing_policy)
        groups_path = Path(cfg.data.groups_file)
        if not groups_path.is_file():
            raise ConfigError(f"groups file does not exist: {groups_path}")
        try:
            gobj = read_json(groups_path)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"groups file {groups_path} is not valid JSON: {exc}") from exc
        partition = GroupPartition.from_json(gobj)
        if partition.n_vars != panel.n_vars:
            raise DataError(f"groups file covers {partition.n_vars} variables, panel has {panel.n_vars}")
        return panel, partition, None
    _, panel, truth, partition = simulate_dataset(cfg, cfg.seed)
    return panel, partition, truth


def run_discovery(cfg: ExperimentConfig, method: str | None = None) -> dict:
    method = method or cfg.method
    cfg.validate(needs_data=True)
    out = _prepare_output(cfg)
    panel, partition, truth = load_dataset(cfg)
    embedded = cfg.to_dict(False)
    bundle = {"config": embedded, "method": method}

    if cfg.regimes.enabled:
        r = cfg.regimes
        labels = rg.identify_regimes(standardize(panel)[0], r.k, r.window_length, r.stride,
                                     r.smoothing_width, derive_seed(cfg.seed, "regimes"))
        segments = labels.segments
        write_json(out / "regimes.json", {"config": embedded, **labels.to_json()})
    else:
        segments = ((0, panel.n_steps, 0),)

    graphs, evidence, seg_rows = [], [], []
    for k, (start, end, regime) in enumerate(segments):
        seg_panel = panel.slice_rows(start, end)
        seg_cfg = cfg if len(segments) == 1 else _with_seed(cfg, derive_seed(cfg.seed, "segment", k))
        try:
            need = min_segment_length(seg_cfg.discovery_config())
            if len(segments) > 1 and end - start < need:
                raise DataError(f"segment shorter than {need} steps")
            graph, ev = _run_method(method, seg_panel, partition, seg_cfg)
        except DataError as exc:
            if len(segments) == 1:
                raise
            log.warning("segment %d (%d..%d) skipped: %s", k, start, end, exc)
            seg_rows.append({"start": start, "end": end, "regime": regime, "skipped": str(exc)})
            continue
        graphs.append(graph)
        seg_rows.append({"start": start, "end": end, "regime": regime, "graph": graph.to_json()})
        if ev is not None:
            evidence.append({"segment": k, "start": start, "end": end, "edges": ev})
        log.info("segment %d (%d..%d): edges %s", k, start, end, graph.edges())

    if not graphs:
        raise DataError("no segment was long enough for discovery")
    main = graphs[0] if len(graphs) == 1 else _majority_graph(graphs)
    bundle["graph"] = main.to_json()
    bundle["segments"] = seg_rows
    bundle["fractions"] = link_fractions(graphs, partition.n_groups)
    if truth is not None:
        bundle["score"] = asdict(score_graph(main, truth))

    write_json(out / "graph.json", {"config": embedded, "method": method, **main.to_json(),
                                     "segments": seg_rows})
    if method == "gcdmi":
        write_json(out / "evidence.json", {"config": embedded, "segments": evidence})
    _write_csv(out / "adjacency.csv", ["source"] + [f"g{j}" for j in range(main.n_groups)],
               [[f"g{i}"] + [int(v) for v in row] for i, row in enumerate(main.adjacency)])
    fr = bundle["fractions"]
    _write_csv(out / "fractions.csv", ["i", "j", "i->j", "j->i", "i<->j", "none"],
               [[r["i"], r["j"]] + [_fmt(r[k]) for k in ("i->j", "j->i", "i<->j", "none")] for r in fr])
    if truth is not None:
        write_json(out / "score.json", {"config": embedded, **bundle["score"]})
    bundle["graphs"] = graphs
    return bundle


def _with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return replace(cfg, seed=seed)


def _majority_graph(graphs) -> GroupCausalGraph:
    """Edges present in more than half of the per-segment graphs."""
    stack = np.array([g.adjacency for g in graphs])
    return GroupCausalGraph(stack.mean(axis=0) > 0.5)


# ---------------------------------------------------------------- benchmark

def _sweep_point(cfg: ExperimentConfig, value):
    d = cfg.data
    if cfg.sweep.axis == "density":
        d = replace(d, density=float(value))
    elif cfg.sweep.axis == "nonlinearity":
        d = replace(d, nonlinearity=float(value))
    else:
        size = int(d.group_sizes[0]) if d.group_sizes else 2
        d = replace(d, group_sizes=[size] * int(value))
    return replace(cfg, data=d)


def _run_trial(args):
    cfg, vi, value, trial = args
    trial_seed = derive_seed(cfg.seed, "trial", vi, trial)
    point = _with_seed(_sweep_point(cfg, value), trial_seed)
    rows = []
    try:
        _, panel, truth, partition = simulate_dataset(point, trial_seed)
    except (GCausalError, linalg.LinAlgError, FloatingPointError) as exc:
        return [[m, value, trial, trial_seed, math.nan, math.nan, math.nan, f"failed: {exc}"]
                for m in cfg.sweep.methods]
    for m in cfg.sweep.methods:
        try:
            graph, _ = _run_method(m, panel, partition, point)
            sc = score_graph(graph, truth)
            rows.append([m, value, trial, trial_seed, sc.precision, sc.recall, sc.f_score, "ok"])
        except (GCausalError, linalg.LinAlgError, FloatingPointError) as exc:
            rows.append([m, value, trial, trial_seed, math.nan, math.nan, math.nan, f"failed: {exc}"])
    return rows


def run_benchmark(cfg: ExperimentConfig) -> dict:
    """Sweep one data axis; score every method on every simulated trial."""
    cfg.validate()
    if cfg.data.source != "scm":
        raise ConfigError("benchmark sweeps need data.source = 'scm'")
    out = _prepare_output(cfg)
    s = cfg.sweep
    jobs = [(cfg, vi, v, t) for vi, v in enumerate(s.values) for t in range(s.trials)]
    if s.workers > 1:
        with ProcessPoolExecutor(max_workers=s.workers) as pool:
            chunks = list(pool.map(_run_trial, jobs))
    else:
        chunks = [_run_trial(j) for j in jobs]
    rows = [r for chunk in chunks for r in chunk]

    header = ["method", s.axis, "trial", "seed", "precision", "recall", "f_score", "status"]
    summary = []
    for m in s.methods:
        for v in s.values:
            sel = [r for r in rows if r[0] == m and r[1] == v and r[7] == "ok"]
            total = sum(1 for r in rows if r[0] == m and r[1] == v)
            mean = lambda k: float(np.mean([r[k] for r in sel])) if sel else math.nan
            summary.append({"method": m, s.axis: v, "trials_ok": len(sel), "trials": total,
                            "mean_precision": mean(4), "mean_recall": mean(5), "mean_f_score": mean(6)})

    _write_csv(out / "results.csv", header, [[_fmt(x) for x in r] for r in rows])
    _write_csv(out / "summary.csv", list(summary[0].keys()), [[_fmt(x) for x in r.values()] for r in summary])
    _write_csv(out / "plot_data.csv", [s.axis] + list(s.methods),
               [[_fmt(v)] + [_fmt(next(r["mean_f_score"] for r in summary if r["method"] == m and r[s.axis] == v))
                             for m in s.methods] for v in s.values])
    write_json(out / "results.json", {
        "config": cfg.to_dict(False),
        "rows": [{k: _nan_to_none(v) for k, v in zip(header, r)} for r in rows],
        "summary": [{k: _nan_to_none(v) for k, v in r.items()} for r in summary],
    })
    failed = sum(1 for r in rows if r[7] != "ok")
    log.info("benchmark finished: %d rows, %d failed", len(rows), failed)
    return {"rows": rows, "summary": summary, "failed_fraction": failed / len(rows)}


# ---------------------------------------------------------------- diagnostics

def run_knockoff_diag(cfg: ExperimentConfig) -> dict:
    out = _prepare_output(cfg)
    kd = cfg.knockoff_diag
    if cfg.data.source == "csv" and cfg.data.panel:
        panel = load_panel(cfg.data.panel, cfg.data.missing_policy)
    else:
        n = max(2, sum(int(s) for s in cfg.data.group_sizes))
        panel = ko.equicorrelated_panel(cfg.data.length, n, kd.rho, derive_seed(cfg.seed, "diag-data"))
    z, _, _ = standardize(panel)
    moments = ko.estimate_moments(z, kd.shrinkage)
    s = ko.equicorrelated_s(moments.correlation)
    kn = ko.sample_knockoffs(z, moments, s, derive_seed(cfg.seed, "diag-knockoffs"))
    report = ko.diagnostics(z, kn, moments)
    report["swap_deviation"] = ko.swap_deviation(z, kn)
    report["s"] = float(s[0])
    rows = ko.dimension_sweep(kd.dims, kd.trials, derive_seed(cfg.seed, "diag-sweep"), kd.rho,
                              kd.n_steps, kd.shrinkage)
    means = ko.sweep_means(rows)
    write_json(out / "diagnostics.json", {"config": cfg.to_dict(False), **report})
    _write_csv(out / "dimension_sweep.csv", ["N", "mean_self_corr"],
               [[r["N"], _fmt(r["mean_self_corr"])] for r in means])
    _write_csv(out / "dimension_sweep_trials.csv", ["N", "trial", "mean_self_corr"],
               [[r["N"], r["trial"], _fmt(r["mean_self_corr"])] for r in rows])
    return {"report": report, "sweep": means, "trials": rows}


def run_test_bench(cfg: ExperimentConfig) -> dict:
    out = _prepare_output(cfg)
    tb = cfg.test_bench
    rows = stats.sensitivity_study(tb.n, tb.repetitions, derive_seed(cfg.seed, "test-bench"), tb.alpha)
    stats.write_power_table(rows, out / "power_table.csv")
    write_json(out / "power_table.json", {"config": cfg.to_dict(False), "rows": rows})
    return {"rows": rows}


def run_regimes(cfg: ExperimentConfig) -> dict:
    cfg.validate(needs_data=True)
    out = _prepare_output(cfg)
    panel, _, _ = load_dataset(cfg)
    r = cfg.regimes
    labels = rg.identify_regimes(standardize(panel)[0], r.k, r.window_length, r.stride,
                                 r.smoothing_width, derive_seed(cfg.seed, "regimes"))
    write_json(out / "segments.json", {"config": cfg.to_dict(False), **labels.to_json()})
    labels.write_label_csv(out / "labels.csv")
    return {"labels": labels}
