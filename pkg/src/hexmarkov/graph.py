"""Local and global metrics of the Markov-induced mobility graph.

Paths are unweighted hops on the support digraph ``{(i, j): p_ij > 0}``.
Community structure uses the symmetrized weights ``R = (P + P^T) / 2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels


class GraphDomainError(ValueError):
    pass


@dataclass
class MobilityGraph:
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    R: sp.csr_matrix

    @classmethod
    def from_edges(cls, n, edges, weights=None):
        """Graph on ``n`` nodes from directed ``(i, j)`` pairs (self-loops dropped)."""
        edges = [(int(a), int(b)) for a, b in edges]
        weights = [1.0] * len(edges) if weights is None else list(weights)
        kept = [(e, w) for e, w in zip(edges, weights) if e[0] != e[1]]
        edges = [e for e, _ in kept]
        vals = np.asarray([w for _, w in kept], dtype=np.float64)
        if edges:
            rows, cols = np.array(edges).T
        else:
            rows = cols = np.empty(0, dtype=np.int64)
        A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        A.sum_duplicates()
        A.sort_indices()
        R = ((A + A.T) * 0.5).tocsr()
        R.setdiag(0)
        R.eliminate_zeros()
        return cls(n, A.indptr.astype(np.int64), A.indices.astype(np.int64), R)

    @classmethod
    def from_model(cls, model, weighting: str = "probability"):
        """Support graph of ``model.P``.

        ``weighting="count"`` builds R from transition counts instead of
        probabilities (experimental).
        """
        if weighting == "probability":
            vals = model.p
        elif weighting == "count":
            vals = model.count.astype(np.float64)
        else:
            raise ValueError(f"unknown weighting {weighting!r}")
        return cls.from_edges(model.n_states, zip(model.src.tolist(), model.dst.tolist()), vals)

    @property
    def edges(self):
        out = []
        for v in range(self.n):
            out.extend((v, int(w)) for w in self.indices[self.indptr[v]:self.indptr[v + 1]])
        return out


def mobility_magnitude(stats, states) -> np.ndarray:
    """MM_i = sum_j N_ij, aligned with ``states``."""
    pos = {c: k for k, c in enumerate(states)}
    mm = np.zeros(len(states), dtype=np.int64)
    for (i, _), n in stats.counts.items():
        mm[pos[i]] += n
    return mm


def dwell_time_magnitude(stats, states, include_terminal: bool = False) -> np.ndarray:
    """DTM_i = sum_j N_ij * w_ij, i.e. the exact sum of exit-preceding dwell (s)."""
    pos = {c: k for k, c in enumerate(states)}
    dtm = np.zeros(len(states), dtype=np.int64)
    for (i, _), d in stats.dwell.items():
        dtm[pos[i]] += d
    if include_terminal:
        for c, d in stats.terminal.items():
            dtm[pos[c]] += d
    return dtm


def betweenness(g: MobilityGraph, normalized: bool = False) -> np.ndarray:
    """Raw shortest-path betweenness over ordered pairs (Brandes accumulation)."""
    c = kernels.brandes(g.indptr, g.indices, g.n)
    if normalized:
        scale = (g.n - 1) * (g.n - 2)
        return c / scale if scale > 0 else np.zeros_like(c)
    return c


@dataclass
class PathLength:
    mean: float
    reachable_pairs: int
    excluded_pairs: int


def average_path_length(g: MobilityGraph) -> PathLength:
    """Mean hop distance over ordered reachable pairs; unreachable pairs are counted, not averaged."""
    total, pairs = kernels.bfs_path_totals(g.indptr, g.indices, g.n)
    if pairs == 0:
        raise GraphDomainError("no reachable pair of distinct states")
    return PathLength(total / pairs, pairs, g.n * (g.n - 1) - pairs)


def modularity(R, labels) -> float:
    """Newman modularity of ``labels`` on symmetric weights ``R`` (diagonal ignored)."""
    R = sp.csr_matrix(R, dtype=np.float64)
    R = R - sp.diags(R.diagonal())
    labels = np.asarray(labels)
    k = np.asarray(R.sum(axis=1)).ravel()
    two_y = k.sum()
    if two_y <= 0:
        raise GraphDomainError("graph has no edge weight")
    _, comm = np.unique(labels, return_inverse=True)
    coo = R.tocoo()
    same = comm[coo.row] == comm[coo.col]
    internal = coo.data[same].sum()
    tot = np.bincount(comm, weights=k)
    return float(internal / two_y - np.sum((tot / two_y) ** 2))


def _adjacency_lists(R):
    R = sp.csr_matrix(R)
    out = []
    for v in range(R.shape[0]):
        lo, hi = R.indptr[v], R.indptr[v + 1]
        out.append(list(zip(R.indices[lo:hi].tolist(), R.data[lo:hi].tolist())))
    return out


def _local_moves(adj, strength, two_y, order):
    """One Louvain local-moving phase; returns (community per node, moved?)."""
    n = len(adj)
    comm = list(range(n))
    tot = list(strength)
    moved_any = False
    improved = True
    eps = 1e-12 * max(two_y, 1.0)
    while improved:
        improved = False
        for v in order:
            cv = comm[v]
            kv = strength[v]
            links = {}
            for u, wt in adj[v]:
                if u != v:
                    links[comm[u]] = links.get(comm[u], 0.0) + wt
            tot[cv] -= kv
            stay = links.get(cv, 0.0) - tot[cv] * kv / two_y
            best, best_gain = cv, stay
            for c in sorted(links):
                gain = links[c] - tot[c] * kv / two_y
                if gain > best_gain + eps:
                    best, best_gain = c, gain
            tot[best] += kv
            if best != cv:
                comm[v] = best
                improved = moved_any = True
    return comm, moved_any


def detect_communities(R, seed: int | None = None) -> np.ndarray:
    """Greedy modularity maximization (Louvain local moves + aggregation).

    Nodes are visited in index order, or in a seeded permutation when
    ``seed`` is given; among equally good moves the lowest community index
    wins.  The result never scores below the single-community labelling.
    """
    R = sp.csr_matrix(R, dtype=np.float64)
    n = R.shape[0]
    R = (R - sp.diags(R.diagonal())).tocsr()
    R.eliminate_zeros()
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    if R.nnz == 0:
        return np.arange(n, dtype=np.int64)
    two_y = float(R.sum())
    labels = np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(seed) if seed is not None else None
    graph = R
    while True:
        m = graph.shape[0]
        adj = _adjacency_lists(graph)
        strength = np.asarray(graph.sum(axis=1)).ravel().tolist()
        order = list(range(m)) if rng is None else rng.permutation(m).tolist()
        comm, moved = _local_moves(adj, strength, two_y, order)
        if not moved:
            break
        # renumber communities by first appearance in node-index order
        remap = {}
        for c in comm:
            remap.setdefault(c, len(remap))
        comm = np.array([remap[c] for c in comm], dtype=np.int64)
        labels = comm[labels]
        k = len(remap)
        agg = sp.csr_matrix((np.ones(m), (comm, np.arange(m))), shape=(k, m))
        graph = (agg @ graph @ agg.T).tocsr()
        if k == m:
            break
    if modularity(R, labels) < 0.0:
        return np.zeros(n, dtype=np.int64)
    return labels
