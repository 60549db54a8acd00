"""Pure-Python (numpy) implementations of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature
and bit-identical results; the arithmetic is written in the same order in
both so that IEEE rounding agrees.
"""
from collections import deque

import numpy as np

SQRT3 = np.sqrt(3.0)


def hex_round(x, y, size):
    """Flat-top axial cell of projected points ``(x, y)`` for edge length ``size``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    fq = (2.0 / 3.0 * x) / size
    fr = (-1.0 / 3.0 * x + SQRT3 / 3.0 * y) / size
    fs = -fq - fr
    rq = np.floor(fq + 0.5)
    rr = np.floor(fr + 0.5)
    rs = np.floor(fs + 0.5)
    dq = np.abs(rq - fq)
    dr = np.abs(rr - fr)
    ds = np.abs(rs - fs)
    fix_q = (dq > dr) & (dq > ds)
    fix_r = ~fix_q & (dr > ds)
    rq = np.where(fix_q, -rr - rs, rq)
    rr = np.where(fix_r, -rq - rs, rr)
    return rq.astype(np.int64), rr.astype(np.int64)


def resample(t, lat, lon, starts, ends, dt):
    """Linear resampling of many segments at aligned multiples of ``dt``.

    Segment ``k`` covers ``t[starts[k]:ends[k]]``.  Returns
    ``(segment, t_sample, lat_sample, lon_sample)``; segments without an
    aligned instant inside their time range produce no samples.
    """
    t = np.asarray(t, dtype=np.int64)
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    t_first = t[starts]
    t_last = t[ends - 1]
    first = -(-t_first // dt) * dt
    counts = np.where(first <= t_last, (t_last - first) // dt + 1, 0)
    total = int(counts.sum())
    empty = np.empty(0, dtype=np.float64)
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), empty, empty.copy()

    seg = np.repeat(np.arange(len(starts), dtype=np.int64), counts)
    offsets = np.cumsum(counts) - counts
    step = np.arange(total, dtype=np.int64) - np.repeat(offsets, counts)
    ts = first[seg] + step * dt

    # search within each segment by keying raw points on (segment, t - t_first)
    span = int((t_last - t_first).max()) + 1
    lengths = ends - starts
    point_seg = np.repeat(np.arange(len(starts), dtype=np.int64), lengths)
    point_off = np.cumsum(lengths) - lengths
    idx = (np.arange(int(lengths.sum()), dtype=np.int64)
           - np.repeat(point_off, lengths) + np.repeat(starts, lengths))
    raw_key = point_seg * span + (t[idx] - t_first[point_seg])
    sample_key = seg * span + (ts - t_first[seg])
    pos = np.searchsorted(raw_key, sample_key, side="right") - 1
    k = idx[pos]
    last = k == ends[seg] - 1
    k1 = np.where(last, k, k + 1)
    t0 = t[k]
    denom = np.where(last, 1, t[k1] - t0)
    f = (ts - t0) / denom
    out_lat = np.where(last, lat[k], lat[k] + (lat[k1] - lat[k]) * f)
    out_lon = np.where(last, lon[k], lon[k] + (lon[k1] - lon[k]) * f)
    return seg, ts, out_lat, out_lon


def run_transitions(seg, key, dt):
    """Run-length scan of state sequences.

    ``seg`` labels consecutive samples belonging to one sequence; ``key`` is
    the packed cell of each sample.  Returns ``(src, dst, dwell, term_key,
    term_dwell)``: one transition per change of cell inside a sequence, with
    the dwell of the run that ended, and one terminal dwell per sequence.
    """
    seg = np.asarray(seg, dtype=np.int64)
    key = np.asarray(key, dtype=np.int64)
    n = len(key)
    if n == 0:
        e = np.empty(0, dtype=np.int64)
        return e, e.copy(), e.copy(), e.copy(), e.copy()
    new_run = np.ones(n, dtype=bool)
    new_run[1:] = (key[1:] != key[:-1]) | (seg[1:] != seg[:-1])
    run_start = np.flatnonzero(new_run)
    run_len = np.diff(np.append(run_start, n))
    run_key = key[run_start]
    run_seg = seg[run_start]
    # a run is followed by a transition iff the next run is in the same sequence
    has_exit = np.zeros(len(run_start), dtype=bool)
    has_exit[:-1] = run_seg[1:] == run_seg[:-1]
    exit_idx = np.flatnonzero(has_exit)
    src = run_key[exit_idx]
    dst = run_key[exit_idx + 1]
    dwell = run_len[exit_idx].astype(np.int64) * dt
    term = ~has_exit
    return src, dst, dwell, run_key[term], run_len[term].astype(np.int64) * dt


def brandes(indptr, indices, n):
    """Raw betweenness of every node of an unweighted digraph in CSR form."""
    adj = [indices[indptr[v]:indptr[v + 1]].tolist() for v in range(n)]
    cb = [0.0] * n
    for s in range(n):
        stack = []
        preds = [[] for _ in range(n)]
        sigma = [0.0] * n
        dist = [-1] * n
        sigma[s] = 1.0
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            dv = dist[v]
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dv + 1
                    queue.append(w)
                if dist[w] == dv + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            coeff = (1.0 + delta[w]) / sigma[w]
            for v in preds[w]:
                delta[v] += sigma[v] * coeff
            if w != s:
                cb[w] += delta[w]
    return np.array(cb, dtype=np.float64)


def bfs_path_totals(indptr, indices, n):
    """Sum of hop distances and count of ordered reachable pairs (i != j)."""
    adj = [indices[indptr[v]:indptr[v + 1]].tolist() for v in range(n)]
    total = 0
    pairs = 0
    for s in range(n):
        dist = [-1] * n
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    total += dist[w]
                    pairs += 1
                    queue.append(w)
    return total, pairs
