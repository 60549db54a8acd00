"""Compare the compiled and pure-Python kernel backends.

Times every kernel on identical synthetic inputs, checks the two backends
agree bit for bit, and measures end-to-end throughput of the
discretize + accumulate stage (points per second).

    python benchmarks/bench_kernels.py [--points N] [--write-baseline]
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import time
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from hexmarkov.hexgrid import BoundingBox, GridConfig, pack
from hexmarkov.kernels import backends
from hexmarkov.markov import TransitionStats

BASELINE = Path(__file__).with_name("baseline.json")
GRID = GridConfig(BoundingBox(46.0, 50.0, -66.0, -58.0))

logger = logging.getLogger("bench")


def synthetic_samples(n_points: int, seed: int = 0, per_vessel: int = 1440):
    """Random-walk tracks at a 60 s cadence: (sequence id, lat, lon)."""
    rng = np.random.default_rng(seed)
    n_seq = -(-n_points // per_vessel)
    seq = np.repeat(np.arange(n_seq, dtype=np.int64), per_vessel)[:n_points]
    start_lat = rng.uniform(46.5, 49.5, n_seq)[seq]
    start_lon = rng.uniform(-65.5, -58.5, n_seq)[seq]
    # ~10 kn steps, so sequences cross a cell every few samples
    step_lat = rng.normal(0.0, 0.004, n_points)
    step_lon = rng.normal(0.0, 0.006, n_points)
    first = np.r_[True, seq[1:] != seq[:-1]]
    step_lat[first] = step_lon[first] = 0.0
    lat = start_lat + _segmented_cumsum(step_lat, first)
    lon = start_lon + _segmented_cumsum(step_lon, first)
    return seq, np.clip(lat, 46.0, 50.0), np.clip(lon, -66.0, -58.0)


def _segmented_cumsum(x, first):
    total = np.cumsum(x)
    base = np.maximum.accumulate(np.where(first, np.arange(len(x)), 0))
    return total - total[base] + x[base]


def discretize_and_accumulate(impl, seq, lat, lon, dt=60):
    """The per-sample hot path of a run: project, bin to cells, run-length scan, fold."""
    x, y = GRID.project(lat, lon)
    q, r = impl.hex_round(x, y, GRID.edge_length_m)
    stats = TransitionStats()
    stats.add_arrays(*impl.run_transitions(seq, pack(q, r), dt))
    return stats


def throughput(impl, n_points: int = 1_200_000, repeats: int = 3):
    """Best-of-``repeats`` seconds and points/s of :func:`discretize_and_accumulate`."""
    seq, lat, lon = synthetic_samples(n_points)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        discretize_and_accumulate(impl, seq, lat, lon)
        best = min(best, time.perf_counter() - t0)
    return best, n_points / best


def _time(fn, repeats=3):
    best, out = float("inf"), None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return a.dtype == b.dtype and a.tobytes() == b.tobytes()
    return a == b


def kernel_cases(n_points: int):
    rng = np.random.default_rng(1)
    seq, lat, lon = synthetic_samples(n_points)
    x, y = GRID.project(lat, lon)
    q, r = backends()["python"].hex_round(x, y, GRID.edge_length_m)
    keys = pack(q, r)
    # raw reports with irregular spacing for resampling
    t = np.cumsum(rng.integers(5, 120, n_points)).astype(np.int64)
    bounds = np.r_[0, np.flatnonzero(seq[1:] != seq[:-1]) + 1, n_points]
    starts, ends = bounds[:-1], bounds[1:]
    n = 400
    g = sp.random(n, n, density=0.01, random_state=2, format="csr")
    g.setdiag(0)
    g.eliminate_zeros()
    indptr, indices = g.indptr.astype(np.int64), g.indices.astype(np.int64)
    return {
        "hex_round": lambda k: k.hex_round(x, y, GRID.edge_length_m),
        "resample": lambda k: k.resample(t, lat, lon, starts, ends, 60),
        "run_transitions": lambda k: k.run_transitions(seq, keys, 60),
        "brandes(n=400)": lambda k: k.brandes(indptr, indices, n),
        "bfs_path_totals(n=400)": lambda k: k.bfs_path_totals(indptr, indices, n),
    }


def run(n_points: int) -> dict:
    impls = backends()
    report = {"points": n_points, "python_version": platform.python_version(), "kernels": {}, "throughput": {}}
    for name, case in kernel_cases(n_points).items():
        row, outputs = {}, {}
        for backend, impl in impls.items():
            row[backend], outputs[backend] = _time(lambda: case(impl))
        if len(outputs) == 2:
            row["identical"] = _same(outputs["python"], outputs["cython"])
            row["speedup"] = row["python"] / row["cython"]
        report["kernels"][name] = row
    for backend, impl in impls.items():
        secs, rate = throughput(impl, n_points)
        report["throughput"][backend] = {"seconds": secs, "points_per_s": rate}
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=1_200_000)
    parser.add_argument("--write-baseline", action="store_true",
                        help=f"record the throughput in {BASELINE.name}")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    report = run(args.points)
    logger.info("%-24s %10s %10s %8s %s", "kernel", "python s", "cython s", "speedup", "identical")
    for name, row in report["kernels"].items():
        logger.info("%-24s %10.4f %10.4f %8.1f %s", name, row["python"], row.get("cython", float("nan")),
                    row.get("speedup", float("nan")), row.get("identical", "-"))
    for backend, row in report["throughput"].items():
        logger.info("throughput %-8s %.0f points/s (%.2f s for %d points)", backend, row["points_per_s"],
                    row["seconds"], args.points)
    if args.write_baseline:
        BASELINE.write_text(json.dumps({
            "points": args.points,
            "throughput_points_per_s": {b: round(r["points_per_s"]) for b, r in report["throughput"].items()},
            "note": "discretize + accumulate, best of 3, single process",
        }, indent=2, sort_keys=True) + "\n")
        logger.info("baseline written to %s", BASELINE)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
