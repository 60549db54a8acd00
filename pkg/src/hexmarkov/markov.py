"""Transition/dwell statistics and the fitted Markov objects.

Residence in a cell is dwell, not a self-transition: a run of ``m``
consecutive samples in cell ``i`` followed by cell ``j`` records one
``i -> j`` transition whose dwell is ``m * dt`` seconds.  The last run of a
sequence has no observed exit; its duration goes to the cell's terminal
(right-censored) dwell and never enters the per-pair dwell sums.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from . import kernels
from .hexgrid import key_to_cell

logger = logging.getLogger(__name__)

STATIONARY_TOL = 1e-12
STATIONARY_MAX_ITER = 100_000


class StationaryError(ValueError):
    """No recurrent class on which a stationary distribution exists."""


class ConvergenceError(RuntimeError):
    def __init__(self, iterations, residual):
        super().__init__(f"power iteration did not converge after {iterations} "
                         f"iterations (last L1 step {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class TransitionStats:
    """Mergeable accumulator of transition counts and dwell sums.

    ``counts[(i, j)]`` is N_ij, ``dwell[(i, j)]`` the exact integer sum of
    dwell seconds preceding those exits, ``terminal[i]`` the censored dwell.
    With ``keep_dwells`` the raw durations are kept as well.
    """

    __slots__ = ("counts", "dwell", "terminal", "dwells")

    def __init__(self, keep_dwells: bool = False):
        self.counts: dict = {}
        self.dwell: dict = {}
        self.terminal: dict = {}
        self.dwells: dict | None = {} if keep_dwells else None

    def add_transition(self, i, j, dwell: int):
        if i == j:
            raise ValueError("self-transitions are residence, not transitions")
        key = (i, j)
        self.counts[key] = self.counts.get(key, 0) + 1
        self.dwell[key] = self.dwell.get(key, 0) + int(dwell)
        if self.dwells is not None:
            self.dwells.setdefault(key, []).append(int(dwell))

    def add_terminal(self, i, dwell: int):
        self.terminal[i] = self.terminal.get(i, 0) + int(dwell)

    def update(self, other: "TransitionStats") -> "TransitionStats":
        for key, n in other.counts.items():
            self.counts[key] = self.counts.get(key, 0) + n
            self.dwell[key] = self.dwell.get(key, 0) + other.dwell[key]
        for cell, d in other.terminal.items():
            self.terminal[cell] = self.terminal.get(cell, 0) + d
        if self.dwells is not None and other.dwells is not None:
            for key, ds in other.dwells.items():
                self.dwells.setdefault(key, []).extend(ds)
        return self

    def merge(self, other: "TransitionStats") -> "TransitionStats":
        out = TransitionStats(keep_dwells=self.dwells is not None and other.dwells is not None)
        out.update(self)
        return out.update(other)

    def __eq__(self, other):
        if not isinstance(other, TransitionStats):
            return NotImplemented
        return (self.counts == other.counts and self.dwell == other.dwell
                and self.terminal == other.terminal)

    def __bool__(self):
        return bool(self.counts) or bool(self.terminal)

    def __repr__(self):
        return (f"TransitionStats(pairs={len(self.counts)}, transitions={self.total_transitions}, "
                f"cells={len(self.cells())})")

    @property
    def total_transitions(self) -> int:
        return sum(self.counts.values())

    def cells(self) -> list:
        found = set(self.terminal)
        for i, j in self.counts:
            found.add(i)
            found.add(j)
        return sorted(found)

    def pairs(self) -> list:
        return sorted(self.counts)

    def add_arrays(self, src, dst, dwell, term_key, term_dwell):
        """Fold packed-key kernel output into the accumulator."""
        if len(src):
            pair = np.stack([src, dst], axis=1)
            uniq, inv = np.unique(pair, axis=0, return_inverse=True)
            inv = inv.ravel()
            n = np.bincount(inv, minlength=len(uniq))
            d = np.bincount(inv, weights=dwell, minlength=len(uniq))
            for (a, b), cnt, tot in zip(uniq.tolist(), n.tolist(), d.tolist()):
                key = (key_to_cell(a), key_to_cell(b))
                self.counts[key] = self.counts.get(key, 0) + cnt
                self.dwell[key] = self.dwell.get(key, 0) + int(round(tot))
            if self.dwells is not None:
                for a, b, w in zip(src.tolist(), dst.tolist(), dwell.tolist()):
                    self.dwells.setdefault((key_to_cell(a), key_to_cell(b)), []).append(w)
        if len(term_key):
            uniq, inv = np.unique(term_key, return_inverse=True)
            d = np.bincount(inv.ravel(), weights=term_dwell, minlength=len(uniq))
            for a, tot in zip(uniq.tolist(), d.tolist()):
                cell = key_to_cell(a)
                self.terminal[cell] = self.terminal.get(cell, 0) + int(round(tot))
        return self


def accumulate(seq, into: TransitionStats | None = None) -> TransitionStats:
    """Add the runs of one state sequence (anything with ``cells`` and ``dt``)."""
    into = TransitionStats() if into is None else into
    cells = list(seq.cells)
    if not cells:
        return into
    run = 1
    for k in range(1, len(cells)):
        if cells[k] == cells[k - 1]:
            run += 1
        else:
            into.add_transition(cells[k - 1], cells[k], run * seq.dt)
            run = 1
    into.add_terminal(cells[-1], run * seq.dt)
    return into


def accumulate_keys(seg, keys, dt, into: TransitionStats | None = None) -> TransitionStats:
    """Batch form of :func:`accumulate` over packed cell keys labelled by sequence."""
    into = TransitionStats() if into is None else into
    return into.add_arrays(*kernels.run_transitions(seg, keys, dt))


# --- fitted objects -------------------------------------------------------

def state_index(stats: TransitionStats) -> list:
    return stats.cells()


def _edge_arrays(stats, states):
    pos = {c: k for k, c in enumerate(states)}
    pairs = stats.pairs()
    i = np.array([pos[a] for a, _ in pairs], dtype=np.int64)
    j = np.array([pos[b] for _, b in pairs], dtype=np.int64)
    n = np.array([stats.counts[p] for p in pairs], dtype=np.int64)
    d = np.array([stats.dwell[p] for p in pairs], dtype=np.int64)
    return pairs, i, j, n, d


def _row_normalize(i, j, values, size):
    rows = np.bincount(i, weights=values, minlength=size)
    return sp.csr_matrix((values / rows[i], (i, j)), shape=(size, size))


def transition_matrix(stats: TransitionStats, states=None) -> sp.csr_matrix:
    """p_ij = N_ij / sum_j' N_ij'.  Rows of cells with no exit stay empty."""
    states = state_index(stats) if states is None else states
    _, i, j, n, _ = _edge_arrays(stats, states)
    return _row_normalize(i, j, n.astype(np.float64), len(states))


def dwell_and_hazard(stats: TransitionStats) -> tuple[dict, dict]:
    """Mean dwell w_ij (s) and hazard rate lambda_ij = N_ij / dwell_ij (1/s)."""
    w, lam = {}, {}
    for key, n in stats.counts.items():
        total = stats.dwell[key]
        assert total > 0, f"zero dwell recorded for {key}"
        w[key] = total / n
        lam[key] = n / total
    return w, lam


def dwell_weighted_matrix(lam: dict, states) -> sp.csr_matrix:
    """q_ij = lambda_ij / sum over observed destinations of lambda_ij'."""
    pos = {c: k for k, c in enumerate(states)}
    pairs = sorted(lam)
    i = np.array([pos[a] for a, _ in pairs], dtype=np.int64)
    j = np.array([pos[b] for _, b in pairs], dtype=np.int64)
    v = np.array([lam[p] for p in pairs], dtype=np.float64)
    return _row_normalize(i, j, v, len(states))


def recurrent_class(P: sp.csr_matrix, weights: sp.csr_matrix | None = None) -> np.ndarray:
    """Indices of the closed class carrying the largest share of transitions.

    States without an outgoing row are absorbing sinks: edges into them are
    ignored, and so are the sinks themselves.  Among the strongly connected
    components that are closed in what remains, the one with the largest
    internal weight (transition counts when ``weights`` is given, otherwise
    probability mass) wins; ties go to the component with the lowest state.
    """
    P = sp.csr_matrix(P)
    n = P.shape[0]
    W = P if weights is None else sp.csr_matrix(weights)
    has_row = np.diff(P.indptr) > 0
    coo = P.tocoo()
    keep = has_row[coo.row] & has_row[coo.col]
    sub = sp.csr_matrix((np.ones(keep.sum()), (coo.row[keep], coo.col[keep])), shape=(n, n))
    _, label = connected_components(sub, directed=True, connection="strong")
    label = np.where(has_row, label, -1)
    rows, cols = coo.row[keep], coo.col[keep]
    leaking = np.zeros(label.max() + 2, dtype=bool)
    leaking[label[rows][label[rows] != label[cols]]] = True
    wcoo = W.tocoo()
    inside = (wcoo.row < n) & has_row[wcoo.row] & has_row[wcoo.col] & (label[wcoo.row] == label[wcoo.col])
    mass = np.bincount(label[wcoo.row[inside]], weights=wcoo.data[inside], minlength=label.max() + 1)
    best, best_mass, best_low = None, 0.0, None
    for c in range(label.max() + 1):
        if leaking[c] or mass[c] <= 0:
            continue
        low = int(np.flatnonzero(label == c)[0])
        if mass[c] > best_mass or (mass[c] == best_mass and low < best_low):
            best, best_mass, best_low = c, mass[c], low
    if best is None:
        raise StationaryError("transition graph has no recurrent class")
    return np.flatnonzero(label == best)


def stationary(P, weights=None, init: str = "uniform", tol: float = STATIONARY_TOL,
               max_iter: int = STATIONARY_MAX_ITER) -> np.ndarray:
    """Stationary distribution by lazy power iteration on the recurrent class.

    Iterates ``pi <- 0.5*pi + 0.5*pi P`` until the L1 step drops below
    ``tol``.  ``init="solve"`` seeds the iteration with a sparse direct
    solve, which only shortens the iteration on slowly mixing chains; the
    convergence test is the same either way.  States outside the selected
    class get probability zero.
    """
    P = sp.csr_matrix(P, dtype=np.float64)
    n = P.shape[0]
    members = recurrent_class(P, weights)
    sub = P[members][:, members].tocsr()
    # renormalize rows in case edges into absorbing sinks were pruned
    rs = np.asarray(sub.sum(axis=1)).ravel()
    sub = sp.diags(1.0 / rs) @ sub
    PT = sub.T.tocsr()
    m = len(members)
    if init == "solve" and m > 1:
        A = (PT - sp.identity(m, format="csr")).tolil()
        A[0, :] = 1.0
        b = np.zeros(m)
        b[0] = 1.0
        x = np.clip(spsolve(A.tocsc(), b), 0.0, None)
        x = x / x.sum() if x.sum() > 0 and np.all(np.isfinite(x)) else np.full(m, 1.0 / m)
    else:
        x = np.full(m, 1.0 / m)
    step = np.inf
    for it in range(1, max_iter + 1):
        nxt = 0.5 * x + 0.5 * (PT @ x)
        nxt /= nxt.sum()
        step = np.abs(nxt - x).sum()
        x = nxt
        if step < tol:
            break
    else:
        raise ConvergenceError(max_iter, step)
    pi = np.zeros(n)
    pi[members] = x
    return pi


@dataclass
class MarkovModel:
    """P, Q, w, lambda and pi over one state index.

    Edge arrays (``src``, ``dst``, ``count``, ``dwell``, ``p``, ``w``,
    ``hazard``, ``q``) are aligned and sorted by (src cell, dst cell).
    ``pi`` is ``None`` when no recurrent class exists.
    """

    states: list
    src: np.ndarray
    dst: np.ndarray
    count: np.ndarray
    dwell: np.ndarray
    p: np.ndarray
    w: np.ndarray
    hazard: np.ndarray
    q: np.ndarray
    terminal: np.ndarray
    pi: np.ndarray | None = None
    pi_note: str = ""
    _index: dict = field(default=None, repr=False)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_transitions(self) -> int:
        return int(self.count.sum())

    def index(self, cell) -> int:
        if self._index is None:
            self._index = {c: k for k, c in enumerate(self.states)}
        return self._index[cell]

    def matrix(self, values) -> sp.csr_matrix:
        n = self.n_states
        return sp.csr_matrix((values, (self.src, self.dst)), shape=(n, n))

    @property
    def P(self) -> sp.csr_matrix:
        return self.matrix(self.p)

    @property
    def Q(self) -> sp.csr_matrix:
        return self.matrix(self.q)

    @property
    def N(self) -> sp.csr_matrix:
        return self.matrix(self.count.astype(np.float64))


def fit(stats: TransitionStats, init: str = "solve") -> MarkovModel:
    """Fit every Markov object for one accumulated stream."""
    if not stats:
        raise StationaryError("empty statistics")
    states = state_index(stats)
    _, i, j, n, d = _edge_arrays(stats, states)
    size = len(states)
    nf = n.astype(np.float64)
    out_n = np.bincount(i, weights=nf, minlength=size)
    p = nf / out_n[i] if len(i) else nf
    w = d / nf if len(i) else nf
    lam = nf / d if len(i) else nf
    out_lam = np.bincount(i, weights=lam, minlength=size)
    q = lam / out_lam[i] if len(i) else lam
    terminal = np.array([stats.terminal.get(c, 0) for c in states], dtype=np.int64)
    model = MarkovModel(states, i, j, n, d, p, w, lam, q, terminal)
    try:
        model.pi = stationary(model.P, weights=model.N, init=init)
    except (StationaryError, ConvergenceError) as exc:
        logger.warning("no stationary distribution: %s", exc)
        model.pi_note = str(exc)
    return model
