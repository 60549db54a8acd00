# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs, sqrt

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline i64 ceil_to(i64 a, i64 step) nogil:
    # cdivision truncates toward zero, which is already ceil for a <= 0
    cdef i64 q = a / step
    if a > 0 and a % step != 0:
        q += 1
    return q * step


def hex_round(x, y, double size):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], k
    q_out = np.empty(n, dtype=np.int64)
    r_out = np.empty(n, dtype=np.int64)
    cdef i64[::1] qv = q_out
    cdef i64[::1] rv = r_out
    cdef double sqrt3_3 = sqrt(3.0) / 3.0
    cdef double third2 = 2.0 / 3.0
    cdef double fq, fr, fs, rq, rr, rs, dq, dr, ds
    for k in range(n):
        fq = (third2 * xv[k]) / size
        fr = (-1.0 / 3.0 * xv[k] + sqrt3_3 * yv[k]) / size
        fs = -fq - fr
        rq = floor(fq + 0.5)
        rr = floor(fr + 0.5)
        rs = floor(fs + 0.5)
        dq = fabs(rq - fq)
        dr = fabs(rr - fr)
        ds = fabs(rs - fs)
        if dq > dr and dq > ds:
            rq = -rr - rs
        elif dr > ds:
            rr = -rq - rs
        qv[k] = <i64>rq
        rv[k] = <i64>rr
    return q_out, r_out


def resample(t, lat, lon, starts, ends, i64 dt):
    cdef const i64[::1] tv = np.ascontiguousarray(t, dtype=np.int64)
    cdef const double[::1] la = np.ascontiguousarray(lat, dtype=np.float64)
    cdef const double[::1] lo = np.ascontiguousarray(lon, dtype=np.float64)
    cdef const i64[::1] sv = np.ascontiguousarray(starts, dtype=np.int64)
    cdef const i64[::1] ev = np.ascontiguousarray(ends, dtype=np.int64)
    cdef Py_ssize_t nseg = sv.shape[0], s, k, j
    cdef i64 total = 0, first, tl, ts, t0
    cdef double f
    for s in range(nseg):
        first = ceil_to(tv[sv[s]], dt)
        tl = tv[ev[s] - 1]
        if first <= tl:
            total += (tl - first) / dt + 1
    seg_out = np.empty(total, dtype=np.int64)
    t_out = np.empty(total, dtype=np.int64)
    lat_out = np.empty(total, dtype=np.float64)
    lon_out = np.empty(total, dtype=np.float64)
    cdef i64[::1] so = seg_out
    cdef i64[::1] to = t_out
    cdef double[::1] lao = lat_out
    cdef double[::1] loo = lon_out
    j = 0
    for s in range(nseg):
        first = ceil_to(tv[sv[s]], dt)
        tl = tv[ev[s] - 1]
        k = sv[s]
        ts = first
        while ts <= tl:
            while k + 1 < ev[s] and tv[k + 1] <= ts:
                k += 1
            so[j] = s
            to[j] = ts
            if k == ev[s] - 1:
                lao[j] = la[k]
                loo[j] = lo[k]
            else:
                t0 = tv[k]
                f = (<double>(ts - t0)) / (<double>(tv[k + 1] - t0))
                lao[j] = la[k] + (la[k + 1] - la[k]) * f
                loo[j] = lo[k] + (lo[k + 1] - lo[k]) * f
            j += 1
            ts += dt
    return seg_out, t_out, lat_out, lon_out


def run_transitions(seg, key, i64 dt):
    cdef const i64[::1] sg = np.ascontiguousarray(seg, dtype=np.int64)
    cdef const i64[::1] ky = np.ascontiguousarray(key, dtype=np.int64)
    cdef Py_ssize_t n = ky.shape[0], k, nt = 0, nterm = 0
    src = np.empty(n, dtype=np.int64)
    dst = np.empty(n, dtype=np.int64)
    dwell = np.empty(n, dtype=np.int64)
    tkey = np.empty(n, dtype=np.int64)
    tdwell = np.empty(n, dtype=np.int64)
    cdef i64[::1] sv = src
    cdef i64[::1] dv = dst
    cdef i64[::1] wv = dwell
    cdef i64[::1] tk = tkey
    cdef i64[::1] tw = tdwell
    cdef i64 run = 0
    for k in range(n):
        run += 1
        if k + 1 < n and sg[k + 1] == sg[k]:
            if ky[k + 1] != ky[k]:
                sv[nt] = ky[k]
                dv[nt] = ky[k + 1]
                wv[nt] = run * dt
                nt += 1
                run = 0
        else:
            tk[nterm] = ky[k]
            tw[nterm] = run * dt
            nterm += 1
            run = 0
    return src[:nt].copy(), dst[:nt].copy(), dwell[:nt].copy(), tkey[:nterm].copy(), tdwell[:nterm].copy()


def brandes(indptr, indices, Py_ssize_t n):
    cdef const i64[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const i64[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cb_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] cb = cb_arr
    cdef double[::1] sigma = np.empty(n, dtype=np.float64)
    cdef double[::1] delta = np.empty(n, dtype=np.float64)
    cdef i64[::1] dist = np.empty(n, dtype=np.int64)
    cdef i64[::1] order = np.empty(n, dtype=np.int64)
    # predecessors of w are the in-neighbours v with dist[v] == dist[w] - 1;
    # walking the reverse graph avoids storing predecessor lists
    cdef i64 m = ip[n] if n > 0 else 0
    rev_ptr_arr = np.zeros(n + 1, dtype=np.int64)
    rev_idx_arr = np.empty(m, dtype=np.int64)
    cdef i64[::1] rp = rev_ptr_arr
    cdef i64[::1] ri = rev_idx_arr
    cdef i64[::1] fill = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t s, v, w, e, head, tail
    cdef double coeff
    for v in range(n):
        for e in range(ip[v], ip[v + 1]):
            rp[ix[e] + 1] += 1
    for v in range(n):
        rp[v + 1] += rp[v]
    for v in range(n):
        fill[v] = rp[v]
    # sources visited in ascending order so reverse lists are sorted by source
    for v in range(n):
        for e in range(ip[v], ip[v + 1]):
            w = ix[e]
            ri[fill[w]] = v
            fill[w] += 1
    for s in range(n):
        for v in range(n):
            sigma[v] = 0.0
            delta[v] = 0.0
            dist[v] = -1
        sigma[s] = 1.0
        dist[s] = 0
        order[0] = s
        head = 0
        tail = 1
        while head < tail:
            v = order[head]
            head += 1
            for e in range(ip[v], ip[v + 1]):
                w = ix[e]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    order[tail] = w
                    tail += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        while tail > 0:
            tail -= 1
            w = order[tail]
            coeff = (1.0 + delta[w]) / sigma[w]
            for e in range(rp[w], rp[w + 1]):
                v = ri[e]
                if dist[v] >= 0 and dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] * coeff
            if w != s:
                cb[w] += delta[w]
    return cb_arr


def bfs_path_totals(indptr, indices, Py_ssize_t n):
    cdef const i64[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const i64[::1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef i64[::1] dist = np.empty(n, dtype=np.int64)
    cdef i64[::1] queue = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t s, v, w, e, head, tail
    cdef i64 total = 0, pairs = 0
    for s in range(n):
        for v in range(n):
            dist[v] = -1
        dist[s] = 0
        queue[0] = s
        head = 0
        tail = 1
        while head < tail:
            v = queue[head]
            head += 1
            for e in range(ip[v], ip[v + 1]):
                w = ix[e]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    total += dist[w]
                    pairs += 1
                    queue[tail] = w
                    tail += 1
    return int(total), int(pairs)
