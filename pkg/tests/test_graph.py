import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twolevel_consensus.scenario import demo_graphs
from twolevel_consensus.graph import (
    Digraph,
    SwitchingSchedule,
    active_graph,
    consensus_input,
    is_strongly_connected_balanced,
    is_undirected_connected,
    laplacian,
)


def test_laplacian_path(graphs):
    g1, _ = graphs
    expected = np.array([[1, -1, 0, 0], [-1, 2, -1, 0], [0, -1, 2, -1], [0, 0, -1, 1]], dtype=float)
    np.testing.assert_array_equal(laplacian(g1), expected)


def test_laplacian_single_node():
    np.testing.assert_array_equal(laplacian(Digraph(np.zeros((1, 1)))), [[0.0]])


def test_laplacian_ring_is_identity_minus_receive_permutation(graphs):
    _, g2 = graphs
    # receive relation: 1 <- 2, 2 <- 3, 3 <- 4, 4 <- 1 (0-based below)
    C = np.zeros((4, 4))
    for i, j in [(0, 1), (1, 2), (2, 3), (3, 0)]:
        C[i, j] = 1.0
    np.testing.assert_array_equal(laplacian(g2), np.eye(4) - C)


def test_undirected_connected(graphs):
    g1, g2 = graphs
    assert is_undirected_connected(g1)
    assert not is_undirected_connected(g2)
    assert not is_undirected_connected(Digraph(np.zeros((2, 2))))


def test_strongly_connected_balanced(graphs):
    g1, g2 = graphs
    assert is_strongly_connected_balanced(g2)
    assert is_strongly_connected_balanced(g1)
    chain = Digraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
    assert not is_strongly_connected_balanced(chain)


def test_unbalanced_but_strongly_connected():
    g = Digraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0), (0, 2, 1.0)])
    assert not is_strongly_connected_balanced(g)


@pytest.mark.parametrize(
    "adj",
    [np.array([[0, -1.0], [1, 0]]), np.array([[1.0, 1], [1, 0]]), np.zeros((0, 0))],
)
def test_digraph_rejects_invalid(adj):
    with pytest.raises(ValueError):
        Digraph(adj)


def test_active_graph_demo_schedule(graphs):
    g1, g2 = graphs
    s = SwitchingSchedule((g1, g2), dwell=5.0)
    assert active_graph(s, 2.0) == g1
    assert active_graph(s, 5.0) == g2
    assert active_graph(s, 9.999) == g2
    assert active_graph(s, 10.0) == g1
    assert s.period == 10.0


def test_active_graph_single(graphs):
    g1, _ = graphs
    s = SwitchingSchedule.fixed(g1)
    for t in (0.0, 3.3, 1e6):
        assert active_graph(s, t) == g1


def test_schedule_rejects_unbalanced():
    chain = Digraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
    with pytest.raises(ValueError):
        SwitchingSchedule((chain,), dwell=1.0)


def test_consensus_input_ring(graphs):
    _, g2 = graphs
    assert consensus_input(g2, np.array([1.0, 2, 3, 4]), 0) == 1.0
    assert consensus_input(g2, np.full(4, 7.0), 2) == 0.0
    assert consensus_input(g2, np.array([1.0, 2, 3, 4]), 0, weight=2.0) == 0.5


weights = st.floats(0.1, 5.0)


@st.composite
def random_digraphs(draw, symmetric=False):
    n = draw(st.integers(1, 6))
    adj = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and (not symmetric or i < j) and draw(st.booleans()):
                adj[i, j] = draw(weights)
    if symmetric:
        adj = adj + adj.T
    return Digraph(adj)


@settings(max_examples=100, deadline=None)
@given(random_digraphs())
def test_laplacian_rows_sum_to_zero(g):
    np.testing.assert_allclose(laplacian(g) @ np.ones(g.n), 0.0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(random_digraphs(symmetric=True))
def test_undirected_connected_implies_strongly_connected_balanced(g):
    if is_undirected_connected(g):
        assert is_strongly_connected_balanced(g)


@settings(max_examples=100, deadline=None)
@given(random_digraphs(), st.floats(-10, 10), st.data())
def test_consensus_input_translation_invariant(g, shift, data):
    z = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=g.n, max_size=g.n)))
    i = data.draw(st.integers(0, g.n - 1))
    assert consensus_input(g, z + shift, i) == pytest.approx(consensus_input(g, z, i), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(t=st.floats(0, 1000), dwell=st.floats(0.1, 10), n_order=st.integers(1, 4))
def test_active_graph_periodic(t, dwell, n_order):
    g1, g2 = demo_graphs()
    order = [0, 1, 0, 1][:n_order]
    s = SwitchingSchedule((g1, g2), dwell=dwell, order=order)
    # stay away from switch instants where rounding may pick either side
    frac = (t / dwell) % 1.0
    if min(frac, 1 - frac) < 1e-6:
        return
    assert active_graph(s, t) == active_graph(s, t + s.period)


def test_balanced_sum_is_conserved(graphs):
    """Total of z under dz/dt = -L z stays fixed on balanced graphs."""
    from twolevel_consensus.simulator import step_rk4

    for g in graphs:
        L = laplacian(g)
        np.testing.assert_allclose(np.ones(4) @ L, 0.0, atol=1e-15)
        z = np.array([1.0, 2.0, 3.0, 4.0])
        for k in range(2000):
            z = step_rk4(z, k * 1e-2, 1e-2, lambda t, s: -L @ s)
        assert abs(z.sum() - 10.0) < 1e-12
