"""End-to-end run: ingest, per-stream chains, model fitting, metrics and export.

Chains are built in parallel over vessel chunks and folded together with
:meth:`TransitionStats.update`; the statistics are exact integers, so the
fitted models (and every artifact) do not depend on the worker count.
"""
from __future__ import annotations

import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import kernels
from .aggregate import GlobalSummary, fit_thresholds, globalize, quantize
from .config import CONFIG_VERSION, ConfigError, PipelineConfig
from .export import (atomic_write, dump_json, heatmap_geojson, metrics_csv, model_csv, sha256_file,
                     stationary_csv)
from .graph import (GraphDomainError, MobilityGraph, average_path_length, betweenness, detect_communities,
                    dwell_time_magnitude, mobility_magnitude, modularity)
from .hexgrid import cells_of, pack
from .ingest import SchemaError, parse_ais_csv, partition_records, write_rejections
from .markov import TransitionStats, fit
from .trajectory import resample_stream, segment_bounds

logger = logging.getLogger(__name__)

METRICS = ("MM", "DTM", "C")


class DataError(RuntimeError):
    """Input data unusable for a run (CLI exit status 3)."""


@dataclass
class StreamResult:
    category: str
    window: str
    n_records: int = 0
    n_samples: int = 0
    n_dropped: int = 0
    stats: TransitionStats = field(default_factory=TransitionStats)
    model: object = None
    metrics: dict = field(default_factory=dict)
    community: np.ndarray | None = None
    summary: GlobalSummary | None = None

    @property
    def key(self) -> str:
        return f"{self.category}/{self.window}"


# --- ingest ------------------------------------------------------------------

def load_records(cfg: PipelineConfig):
    """Parse every input; returns (records, rejection logs per input, input report)."""
    frames, logs, report = [], [], []
    for path in cfg.inputs:
        try:
            res = parse_ais_csv(path, cfg.schema)
        except SchemaError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        frames.append(res.records)
        logs.append(res.rejections)
        report.append({"name": Path(path).name, "sha256": sha256_file(path),
                       "rows_parsed": res.n_parsed, "rows_rejected": len(res.rejections),
                       "rows_emitted": len(res.records)})
    frame = pd.concat(frames, ignore_index=True) if len(frames) > 1 else frames[0]
    if len(frames) > 1:
        frame = frame.sort_values(["vessel_id", "timestamp"], kind="stable")
        dup = frame.duplicated(["vessel_id", "timestamp"], keep="first")
        if dup.any():
            logger.warning("dropping %d records duplicated across input files", int(dup.sum()))
        frame = frame.loc[~dup].reset_index(drop=True)
    parsed = sum(r["rows_parsed"] for r in report)
    rejected = sum(r["rows_rejected"] for r in report)
    if parsed and rejected / parsed > cfg.max_reject_fraction:
        raise DataError(f"{rejected} of {parsed} rows rejected, above the configured "
                        f"tolerance {cfg.max_reject_fraction}")
    if cfg.exclude_nav_status:
        keep = ~frame["nav_status"].isin(cfg.exclude_nav_status).fillna(False).to_numpy(dtype=bool)
        frame = frame.loc[keep].reset_index(drop=True)
    if len(frame) == 0:
        raise DataError("no usable records")
    return frame, logs, report


# --- chains ------------------------------------------------------------------

def chain_stats(vessel, t, lat, lon, grid, dt, window, max_gap):
    """Transition statistics of a (vessel, time)-sorted block of records.

    Returns ``(stats, n_samples, n_dropped)``.  Samples outside the bounding
    box are dropped and split their sequence.
    """
    stats = TransitionStats()
    if len(t) == 0:
        return stats, 0, 0
    starts, ends = segment_bounds(vessel, t, lon, window, max_gap)
    seg, _, la, lo = resample_stream(t, lat, lon, starts, ends, dt)
    inside = grid.bbox.contains(la, lo)
    q, r = cells_of(la, lo, grid)
    keys = pack(q, r)
    brk = np.ones(len(seg), dtype=bool)
    brk[1:] = (seg[1:] != seg[:-1]) | ~inside[:-1]
    seq = np.cumsum(brk)
    stats.add_arrays(*kernels.run_transitions(seq[inside], keys[inside], dt))
    return stats, int(len(seg)), int(len(seg) - inside.sum())


def _chunk_task(args):
    return chain_stats(*args)


def _vessel_chunks(vessel: np.ndarray, parts: int):
    """Index ranges splitting a vessel-sorted array on vessel boundaries."""
    first = np.flatnonzero(np.r_[True, vessel[1:] != vessel[:-1]])
    cuts = [int(c[0]) for c in np.array_split(first, min(parts, len(first))) if len(c)]
    bounds = cuts + [len(vessel)]
    return list(zip(bounds[:-1], bounds[1:]))


def stream_stats(frame: pd.DataFrame, cfg: PipelineConfig, pool=None):
    vessel = frame["vessel_id"].to_numpy(dtype=np.int64)
    t = frame["timestamp"].to_numpy(dtype=np.int64)
    lat = frame["lat"].to_numpy(dtype=np.float64)
    lon = frame["lon"].to_numpy(dtype=np.float64)
    if len(t) == 0:
        return TransitionStats(), 0, 0
    parts = cfg.workers * 2 if pool is not None else 1
    tasks = [(vessel[a:b], t[a:b], lat[a:b], lon[a:b], cfg.grid, cfg.dt, cfg.segment_window, cfg.max_gap)
             for a, b in _vessel_chunks(vessel, parts)]
    results = pool.map(_chunk_task, tasks) if pool is not None else map(_chunk_task, tasks)
    total, samples, dropped = TransitionStats(), 0, 0
    for stats, n, d in results:
        total.update(stats)
        samples += n
        dropped += d
    return total, samples, dropped


# --- models and metrics ----------------------------------------------------

def analyse(res: StreamResult, cfg: PipelineConfig) -> StreamResult:
    """Fit the model and per-cell / global metrics of one stream in place."""
    summary = GlobalSummary(res.window, res.category, 0, 0, None, None,
                            {m: None for m in METRICS}, 0)
    res.summary = summary
    if not res.stats:
        return res
    model = fit(res.stats)
    res.model = model
    states = model.states
    g = MobilityGraph.from_model(model, cfg.modularity_weighting)
    mm = mobility_magnitude(res.stats, states)
    dtm = dwell_time_magnitude(res.stats, states, cfg.include_terminal_dwell)
    c_raw = betweenness(g)
    c_norm = betweenness(g, normalized=True)
    res.metrics = {"MM": mm, "DTM": dtm, "C": c_raw, "C_normalized": c_norm}
    summary.n_states = model.n_states
    summary.n_transitions = model.n_transitions
    try:
        apl = average_path_length(g)
        summary.avg_path_length = apl.mean
        summary.excluded_pairs = apl.excluded_pairs
    except GraphDomainError:
        summary.excluded_pairs = model.n_states * (model.n_states - 1)
    if g.R.nnz:
        res.community = detect_communities(g.R, seed=cfg.seed)
        summary.modularity = modularity(g.R, res.community)
    else:
        res.community = np.arange(model.n_states, dtype=np.int64)
    if model.pi is not None:
        summary.phi = {m: globalize(res.metrics[m], model.pi) for m in METRICS}
    return res


def category_thresholds(results, cfg: PipelineConfig) -> dict:
    """``{category: {metric: Thresholds}}`` pooled over every window."""
    out = {}
    for cat in cfg.categories:
        mine = [r for r in results if r.category == cat and r.metrics]
        out[cat] = {}
        for m in METRICS:
            if mine:
                out[cat][m] = fit_thresholds([r.metrics[m] for r in mine], cfg.quantization)
    return out


# --- export ------------------------------------------------------------------

def write_stream(res: StreamResult, th: dict, cfg: PipelineConfig, files: dict) -> None:
    base = Path(cfg.output_dir) / res.category / res.window
    rel = f"{res.category}/{res.window}"
    files[f"{rel}/model.csv"] = atomic_write(base / "model.csv", model_csv(res.model))
    files[f"{rel}/stationary.csv"] = atomic_write(base / "stationary.csv", stationary_csv(res.model))
    states = res.model.states if res.model is not None else []
    m = res.metrics
    empty = np.empty(0)
    files[f"{rel}/metrics.csv"] = atomic_write(base / "metrics.csv", metrics_csv(
        states, m.get("MM", empty), m.get("DTM", empty), m.get("C", empty),
        m.get("C_normalized", empty), res.community if res.community is not None else empty))
    raw = {"MM": m.get("MM"), "DTM_s": m.get("DTM"), "C": m.get("C")}
    quant = {}
    for name in METRICS:
        values = m.get(name)
        quant[f"{name}_q"] = None if values is None or name not in th else quantize(values, th[name], cfg.quantization)
    files[f"{rel}/heatmap.geojson"] = atomic_write(base / "heatmap.geojson",
                                                   heatmap_geojson(states, cfg.grid, raw, quant))
    files[f"{rel}/summary.json"] = atomic_write(base / "summary.json", res.summary.to_json())


def _rejection_text(rejections) -> str:
    buf = io.StringIO()
    write_rejections(rejections, buf)
    return buf.getvalue()


def run(cfg: PipelineConfig) -> dict:
    """Execute the whole pipeline; returns the manifest written to ``manifest.json``."""
    clock = {}
    t0 = time.perf_counter()
    frame, logs, report = load_records(cfg)
    clock["ingest"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    streams = partition_records(frame, cfg.windows, cfg.categories)
    results = []
    pool = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for cat in cfg.categories:
            for w in cfg.windows:
                sub = streams[(cat, w.label)]
                res = StreamResult(cat, w.label, n_records=len(sub))
                res.stats, res.n_samples, res.n_dropped = stream_stats(sub, cfg, pool)
                results.append(res)
    finally:
        if pool is not None:
            pool.shutdown()
    clock["chains"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    for res in results:
        analyse(res, cfg)
    thresholds = category_thresholds(results, cfg)
    clock["models"] = time.perf_counter() - t2

    t3 = time.perf_counter()
    out = Path(cfg.output_dir)
    files = {}
    for res in results:
        write_stream(res, thresholds[res.category], cfg, files)
    for k, (rep, rej) in enumerate(zip(report, logs)):
        name = "rejections.tsv" if len(report) == 1 else f"rejections_{k}_{Path(rep['name']).stem}.tsv"
        files[name] = atomic_write(out / name, _rejection_text(rej))
    clock["export"] = time.perf_counter() - t3
    clock["total"] = time.perf_counter() - t0

    manifest = {
        "config_version": CONFIG_VERSION,
        "config_sha256": cfg.source_hash,
        "kernel_backend": kernels.BACKEND,
        "workers": cfg.workers,
        "inputs": report,
        "row_counts": {
            "parsed": sum(r["rows_parsed"] for r in report),
            "rejected": sum(r["rows_rejected"] for r in report),
            "emitted": sum(r["rows_emitted"] for r in report),
            "used": int(len(frame)),
            "streams": {r.key: {"records": r.n_records, "samples": r.n_samples,
                                "dropped_samples": r.n_dropped, "states": r.summary.n_states,
                                "transitions": r.summary.n_transitions} for r in results},
        },
        "thresholds": {cat: {m: [t.low, t.high] for m, t in th.items()} for cat, th in thresholds.items()},
        "files": dict(sorted(files.items())),
        "timings_s": {k: round(v, 6) for k, v in clock.items()},
    }
    atomic_write(out / "manifest.json", dump_json(manifest))
    logger.info("run finished in %.2f s: %d streams, %d files", clock["total"], len(results), len(files))
    return manifest
