import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from hexmarkov.graph import (GraphDomainError, MobilityGraph, average_path_length, betweenness,
                             detect_communities, dwell_time_magnitude, mobility_magnitude, modularity)
from hexmarkov.hexgrid import CellId
from hexmarkov.markov import TransitionStats, fit

from oracles import betweenness_bruteforce, best_modularity, modularity_direct, path_totals_by_matrix_powers

A, B, C = CellId(0, 0), CellId(0, 1), CellId(1, 0)


def stats_from(spec, terminal=None):
    s = TransitionStats()
    for (i, j), dwells in spec.items():
        for d in dwells:
            s.add_transition(i, j, d)
    for c, d in (terminal or {}).items():
        s.add_terminal(c, d)
    return s


def test_mobility_magnitude_examples():
    s = stats_from({(A, B): [60] * 3, (A, C): [60]}, terminal={C: 600})
    mm = mobility_magnitude(s, [A, B, C])
    assert mm.tolist() == [4, 0, 0]


def test_dwell_time_magnitude_examples():
    s = stats_from({(A, B): [120, 240], (A, C): [60]}, terminal={B: 500})
    m = fit(s)
    dtm = dwell_time_magnitude(s, m.states)
    assert dtm.tolist() == [420, 0, 0]
    # N * w reproduces the dwell sums
    via_w = np.bincount(m.src, weights=m.count * m.w, minlength=m.n_states)
    assert via_w.tolist() == dtm.tolist()
    assert dwell_time_magnitude(s, m.states, include_terminal=True).tolist() == [420, 500, 0]


def test_dtm_over_mm_is_weighted_mean_dwell():
    s = stats_from({(A, B): [120, 240], (A, C): [60], (B, A): [600]})
    m = fit(s)
    mm = mobility_magnitude(s, m.states)
    dtm = dwell_time_magnitude(s, m.states)
    for k in range(m.n_states):
        mine = m.src == k
        if mine.any():
            assert dtm[k] / mm[k] == pytest.approx(np.sum(m.count[mine] * m.w[mine]) / m.count[mine].sum())


def g(n, edges):
    return MobilityGraph.from_edges(n, edges)


def test_graph_support_and_symmetry():
    s = stats_from({(A, B): [60] * 3, (A, C): [60], (B, A): [60]})
    m = fit(s)
    graph = MobilityGraph.from_model(m)
    assert sorted(graph.edges) == sorted(zip(m.src.tolist(), m.dst.tolist()))
    R = graph.R.toarray()
    assert np.array_equal(R, R.T)
    P = m.P.toarray()
    assert np.allclose(R, (P + P.T) / 2)
    with pytest.raises(ValueError):
        MobilityGraph.from_model(m, "bogus")


def test_self_loops_dropped_with_their_weights():
    graph = MobilityGraph.from_edges(3, [(0, 0), (0, 1), (1, 2)], [9.0, 2.0, 4.0])
    assert graph.edges == [(0, 1), (1, 2)]
    assert graph.R[0, 1] == 1.0 and graph.R[1, 2] == 2.0 and graph.R.diagonal().sum() == 0


def test_betweenness_examples():
    assert betweenness(g(3, [(0, 1), (1, 2)])).tolist() == [0, 1, 0]
    complete = [(i, j) for i in range(3) for j in range(3) if i != j]
    assert betweenness(g(3, complete)).tolist() == [0, 0, 0]
    norm = betweenness(g(3, [(0, 1), (1, 2)]), normalized=True)
    assert norm.tolist() == [0, 0.5, 0]
    assert betweenness(g(2, [(0, 1)]), normalized=True).tolist() == [0, 0]


digraphs = st.integers(1, 9).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=3 * n)))


@given(digraphs)
def test_betweenness_matches_path_enumeration(graph):
    n, edges = graph
    got = betweenness(g(n, edges))
    want = betweenness_bruteforce(n, edges)
    for x, y in zip(got.tolist(), want):
        assert abs(x - float(y)) <= 1e-12 * max(1.0, float(y))


def test_path_length_examples():
    cyc = g(3, [(0, 1), (1, 2), (2, 0)])
    out = average_path_length(cyc)
    assert out.mean == 1.5 and out.excluded_pairs == 0 and out.reachable_pairs == 6
    complete = [(i, j) for i in range(4) for j in range(4) if i != j]
    assert average_path_length(g(4, complete)).mean == 1.0
    two = g(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    out = average_path_length(two)
    assert out.mean == 1.5 and out.excluded_pairs == 18
    with pytest.raises(GraphDomainError):
        average_path_length(g(3, []))


@given(digraphs)
def test_path_length_matches_matrix_powers(graph):
    n, edges = graph
    total, pairs = path_totals_by_matrix_powers(n, edges)
    if pairs == 0:
        with pytest.raises(GraphDomainError):
            average_path_length(g(n, edges))
        return
    out = average_path_length(g(n, edges))
    assert out.reachable_pairs == pairs
    assert out.excluded_pairs == n * (n - 1) - pairs
    assert out.mean == total / pairs


def sym(n, pairs, w=None):
    R = np.zeros((n, n))
    for k, (a, b) in enumerate(pairs):
        R[a, b] = R[b, a] = 1.0 if w is None else w[k]
    return R


def test_modularity_examples():
    R = sym(4, [(0, 1), (2, 3)])
    assert modularity(sp.csr_matrix(R), [0, 0, 1, 1]) == 0.5
    assert modularity(sp.csr_matrix(R), [0, 0, 0, 0]) == 0.0
    with pytest.raises(GraphDomainError):
        modularity(sp.csr_matrix(np.zeros((3, 3))), [0, 1, 2])


def test_modularity_ignores_diagonal():
    R = sym(4, [(0, 1), (2, 3)])
    R[0, 0] = 7.0
    assert modularity(sp.csr_matrix(R), [0, 0, 1, 1]) == 0.5


@given(st.integers(2, 7).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.floats(0.1, 5.0)), min_size=1, max_size=12),
    st.lists(st.integers(0, 3), min_size=n, max_size=n))))
def test_modularity_matches_direct_sum(case):
    n, wedges, labels = case
    R = np.zeros((n, n))
    for a, b, w in wedges:
        if a != b:
            R[a, b] += w
            R[b, a] += w
    if R.sum() == 0:
        return
    got = modularity(sp.csr_matrix(R), labels)
    assert got == pytest.approx(modularity_direct(R, labels), abs=1e-12)
    assert -0.5 - 1e-12 <= got <= 1.0


def test_community_examples():
    labels = detect_communities(sp.csr_matrix(sym(4, [(0, 1), (2, 3)])))
    assert labels.tolist() == [0, 0, 1, 1]
    single = detect_communities(sp.csr_matrix(sym(2, [(0, 1)])))
    assert single.tolist() == [0, 0]
    assert detect_communities(sp.csr_matrix(np.zeros((3, 3)))).tolist() == [0, 1, 2]
    assert detect_communities(sp.csr_matrix(np.zeros((0, 0)))).tolist() == []


def test_two_cliques_with_bridge():
    pairs = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    pairs += [(i + 5, j + 5) for i, j in pairs] + [(4, 5)]
    labels = detect_communities(sp.csr_matrix(sym(10, pairs)))
    assert labels.tolist() == [0] * 5 + [1] * 5


@given(st.integers(2, 8).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.floats(0.05, 1.0)),
                         min_size=1, max_size=16))), st.one_of(st.none(), st.integers(0, 5)))
def test_communities_deterministic_and_not_below_baseline(case, seed):
    n, wedges = case
    R = np.zeros((n, n))
    for a, b, w in wedges:
        if a != b:
            R[a, b] += w
            R[b, a] += w
    if R.sum() == 0:
        return
    M = sp.csr_matrix(R)
    first = detect_communities(M, seed=seed)
    assert first.tolist() == detect_communities(M, seed=seed).tolist()
    q = modularity(M, first)
    assert q >= -1e-12
    assert q <= best_modularity(R) + 1e-12
