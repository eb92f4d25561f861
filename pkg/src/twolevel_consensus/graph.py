"""Weighted communication digraphs, switching schedules and the consensus input.

Convention: ``adj[i, j] > 0`` means agent ``i`` receives information from
agent ``j``.  The Laplacian is ``L = D - adj`` with ``D`` the diagonal of row
sums, so the upper-level dynamics read ``dz/dt = -L z``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Digraph",
    "SwitchingSchedule",
    "laplacian",
    "is_undirected_connected",
    "is_strongly_connected_balanced",
    "active_graph",
    "consensus_input",
]

BALANCE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Digraph:
    """Immutable weighted digraph on ``n`` nodes."""

    adj: np.ndarray

    def __post_init__(self):
        adj = np.array(self.adj, dtype=float)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] < 1:
            raise ValueError(f"adjacency must be a non-empty square matrix, got shape {adj.shape}")
        if not np.all(np.isfinite(adj)):
            raise ValueError("adjacency weights must be finite")
        if np.any(adj < 0):
            raise ValueError("adjacency weights must be nonnegative")
        if np.any(np.diag(adj) != 0):
            raise ValueError("self-weights a_ii must be zero")
        adj.setflags(write=False)
        object.__setattr__(self, "adj", adj)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int, float]], one_based: bool = False) -> "Digraph":
        """Build from ``(source, target, weight)`` triples; ``target`` receives from ``source``.

        Repeated edges accumulate their weights.
        """
        adj = np.zeros((n, n))
        off = 1 if one_based else 0
        for src, dst, w in edges:
            s, d = int(src) - off, int(dst) - off
            if not (0 <= s < n and 0 <= d < n):
                raise ValueError(f"edge ({src}, {dst}) out of range for {n} nodes")
            if s == d:
                raise ValueError(f"self-loop at node {src}")
            adj[d, s] += float(w)
        return cls(adj)

    def edges(self, one_based: bool = False) -> list[tuple[int, int, float]]:
        off = 1 if one_based else 0
        rows, cols = np.nonzero(self.adj)
        return [(int(j) + off, int(i) + off, float(self.adj[i, j])) for i, j in zip(rows, cols)]

    def neighbors(self, i: int) -> list[int]:
        """In-neighbors of ``i``: the agents whose state ``i`` receives."""
        return [int(j) for j in np.nonzero(self.adj[i])[0]]

    def __eq__(self, other):
        return isinstance(other, Digraph) and np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash(self.adj.tobytes())


def bidirected_path(n: int, weight: float = 1.0) -> Digraph:
    edges = []
    for i in range(n - 1):
        edges += [(i, i + 1, weight), (i + 1, i, weight)]
    return Digraph.from_edges(n, edges)


def directed_ring(order: Sequence[int], weight: float = 1.0) -> Digraph:
    """Cycle through ``order`` (0-based); each node sends to the next one."""
    n = len(order)
    edges = [(order[k], order[(k + 1) % n], weight) for k in range(n)]
    return Digraph.from_edges(n, edges)


def laplacian(g: Digraph) -> np.ndarray:
    return np.diag(g.adj.sum(axis=1)) - g.adj


def _reaches_all(support: np.ndarray, start: int = 0) -> bool:
    n = support.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    queue = deque([start])
    while queue:
        k = queue.popleft()
        for j in np.nonzero(support[k])[0]:
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def is_undirected_connected(g: Digraph) -> bool:
    if not np.array_equal(g.adj, g.adj.T):
        return False
    return _reaches_all(g.adj > 0)


def is_balanced(g: Digraph) -> bool:
    scale = max(float(g.adj.max()), np.finfo(float).tiny)
    in_deg = g.adj.sum(axis=1)
    out_deg = g.adj.sum(axis=0)
    return bool(np.all(np.abs(in_deg - out_deg) <= BALANCE_RTOL * scale))


def is_strongly_connected(g: Digraph) -> bool:
    # information flows j -> i when adj[i, j] > 0; strong connectivity needs
    # node 0 to reach everything along both orientations
    support = g.adj > 0
    return _reaches_all(support.T) and _reaches_all(support)


def is_strongly_connected_balanced(g: Digraph) -> bool:
    return is_strongly_connected(g) and is_balanced(g)


@dataclass(frozen=True, eq=False)
class SwitchingSchedule:
    """Periodic switching among a finite set of graphs.

    ``order`` lists indices into ``graphs``; each entry stays active for
    ``dwell`` time units, and the whole list repeats with ``period =
    dwell * len(order)``.
    """

    graphs: tuple[Digraph, ...]
    dwell: float
    order: tuple[int, ...] = field(default=None)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise ValueError("schedule needs at least one graph")
        n = graphs[0].n
        if any(g.n != n for g in graphs):
            raise ValueError("all scheduled graphs must have the same node count")
        order = tuple(range(len(graphs))) if self.order is None else tuple(int(k) for k in self.order)
        if not order or any(not 0 <= k < len(graphs) for k in order):
            raise ValueError(f"order {order} does not index the {len(graphs)} graphs")
        if not self.dwell > 0:
            raise ValueError("dwell time must be positive")
        for k, g in enumerate(graphs):
            if not is_strongly_connected_balanced(g):
                raise ValueError(f"scheduled graph {k} is not strongly connected and balanced")
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "dwell", float(self.dwell))

    @property
    def n(self) -> int:
        return self.graphs[0].n

    @property
    def period(self) -> float:
        return self.dwell * len(self.order)

    @classmethod
    def fixed(cls, g: Digraph) -> "SwitchingSchedule":
        """Degenerate schedule that never switches."""
        return cls((g,), dwell=math.inf)

    def segment_index(self, t: float) -> int:
        """Position in ``order`` active at ``t`` (right-continuous)."""
        if math.isinf(self.dwell):
            return 0
        k = math.floor(t / self.dwell + 1e-9)
        return k % len(self.order)

    def __eq__(self, other):
        return (
            isinstance(other, SwitchingSchedule)
            and self.graphs == other.graphs
            and self.order == other.order
            and self.dwell == other.dwell
        )

    def __hash__(self):
        return hash((self.graphs, self.order, self.dwell))


def active_graph(s: SwitchingSchedule, t: float) -> Digraph:
    if t < 0:
        raise ValueError("time must be nonnegative")
    return s.graphs[s.order[s.segment_index(t)]]


def consensus_input(g: Digraph, z: np.ndarray, i: int, weight: float = 1.0) -> float:
    """Neighbor-averaging input ``(1/weight) * sum_j a_ij (z_j - z_i)``."""
    if weight <= 0:
        raise ValueError("weight must be positive")
    z = np.asarray(z, dtype=float)
    row = g.adj[i]
    return float(row @ (z - z[i])) / weight
