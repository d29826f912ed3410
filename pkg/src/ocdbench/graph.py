"""Directed-graph utilities on dense boolean adjacency matrices.

``adj[i, j]`` means an edge i -> j.  Ground-truth graphs are validated
DAGs; learner output is a raw adjacency that may contain cycles, so the
helpers here are total over arbitrary directed graphs and report
cyclicity instead of assuming it away.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np


def _as_adj(adj: np.ndarray) -> np.ndarray:
    a = np.asarray(adj)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {a.shape}")
    return a.astype(bool)


def is_acyclic(adj: np.ndarray) -> bool:
    """Kahn peeling; self loops count as cycles."""
    a = _as_adj(adj).copy()
    np.fill_diagonal(a, a.diagonal())  # keep self loops visible
    n = a.shape[0]
    indeg = a.sum(axis=0)
    alive = np.ones(n, dtype=bool)
    for _ in range(n):
        ready = np.flatnonzero(alive & (indeg == 0))
        if ready.size == 0:
            return not alive.any()
        for node in ready:
            alive[node] = False
            indeg = indeg - a[node]
            a[node] = False
    return not alive.any()


def topological_order(adj: np.ndarray) -> list[int]:
    """Lowest-index-first topological order; raises on cyclic input."""
    a = _as_adj(adj)
    n = a.shape[0]
    indeg = a.sum(axis=0).astype(int)
    order: list[int] = []
    ready = sorted(np.flatnonzero(indeg == 0).tolist())
    seen = np.zeros(n, dtype=bool)
    while ready:
        node = ready.pop(0)
        order.append(node)
        seen[node] = True
        for child in np.flatnonzero(a[node]):
            indeg[child] -= 1
            if indeg[child] == 0 and not seen[child]:
                ready.append(child)
        ready.sort()
    if len(order) != n:
        raise ValueError("graph contains a cycle")
    return order


def descendants(adj: np.ndarray) -> np.ndarray:
    """Boolean reachability matrix: out[i, j] iff a directed path i -> j.

    Works on cyclic graphs too; out[i, i] is true exactly when i lies on a
    directed cycle.
    """
    a = _as_adj(adj)
    n = a.shape[0]
    reach = np.zeros_like(a)
    for i in range(n):
        frontier = a[i].copy()
        seen = frontier.copy()
        while frontier.any():
            nxt = a[frontier].any(axis=0) & ~seen
            seen |= nxt
            frontier = nxt
        reach[i] = seen
    return reach


def ancestors(adj: np.ndarray) -> np.ndarray:
    return descendants(adj).T


def cycle_nodes(adj: np.ndarray) -> np.ndarray:
    """Boolean mask of nodes lying on some directed cycle."""
    reach = descendants(adj)
    return reach.diagonal().copy()


@dataclass(frozen=True)
class Dag:
    """Validated acyclic directed graph."""

    adj: np.ndarray

    def __post_init__(self) -> None:
        a = _as_adj(self.adj)
        if a.diagonal().any():
            raise ValueError("self loops are not allowed")
        if not is_acyclic(a):
            raise ValueError("adjacency is cyclic")
        object.__setattr__(self, "adj", a)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adj.sum())

    def parents(self, node: int) -> np.ndarray:
        return np.flatnonzero(self.adj[:, node])

    def children(self, node: int) -> np.ndarray:
        return np.flatnonzero(self.adj[node])

    def descendants_of(self, node: int) -> np.ndarray:
        return np.flatnonzero(descendants(self.adj)[node])

    def topological_order(self) -> list[int]:
        return topological_order(self.adj)


class ThresholdedGraph(NamedTuple):
    adj: np.ndarray
    cyclic: bool


def threshold_graph(beliefs: np.ndarray, tau: float = 0.5) -> ThresholdedGraph:
    """Edges where belief exceeds ``tau`` (strictly), with a cyclicity flag."""
    b = np.asarray(beliefs, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"belief matrix must be square, got shape {b.shape}")
    adj = b > tau
    np.fill_diagonal(adj, False)
    return ThresholdedGraph(adj, not is_acyclic(adj))


def isolated_nodes(beliefs: np.ndarray, tau: float = 0.5) -> np.ndarray:
    """Nodes with no incident edge in the thresholded graph (either direction)."""
    adj = threshold_graph(beliefs, tau).adj
    touched = adj.any(axis=0) | adj.any(axis=1)
    return np.flatnonzero(~touched)


# --- matrix text files -----------------------------------------------------

def save_matrix(path: str | Path, matrix: np.ndarray) -> None:
    """Write a square matrix as CSV rows under an ``# n=<count>`` header."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    lines = [f"# n={m.shape[0]}"]
    if m.dtype == bool:
        rows = m.astype(int)
        lines += [",".join(str(v) for v in row) for row in rows]
    else:
        lines += [",".join(format(float(v), ".17g") for v in row) for row in m]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_matrix(path: str | Path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not text or not text[0].startswith("# n="):
        raise ValueError(f"{path}: missing '# n=' header")
    n = int(text[0][4:])
    rows = [line for line in text[1:] if line.strip()]
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} rows, found {len(rows)}")
    matrix = np.array([[float(v) for v in row.split(",")] for row in rows])
    if matrix.shape != (n, n):
        raise ValueError(f"{path}: expected {n}x{n} values")
    if ((matrix == 0) | (matrix == 1)).all():
        return matrix.astype(bool)
    return matrix
