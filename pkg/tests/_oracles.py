"""Independent slow-but-obvious oracles the test suite pins fast code against.

Nothing in here imports from ocdbench. Edit distances come from breadth-first
search over operation semantics, interventional quantities from exhaustive
enumeration of tiny discrete joints, so agreement with the implementation is
evidence rather than tautology.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np


# --- graph generation ------------------------------------------------------

def _acyclic(rows: list[list[int]]) -> bool:
    n = len(rows)
    color = [0] * n

    def dfs(u: int) -> bool:
        color[u] = 1
        for v in range(n):
            if rows[u][v]:
                if color[v] == 1:
                    return False
                if color[v] == 0 and not dfs(v):
                    return False
        color[u] = 2
        return True

    return all(color[u] != 0 or dfs(u) for u in range(n))


def all_dags(n: int) -> list[np.ndarray]:
    """Every labelled DAG on n nodes (only sane for n <= 4)."""
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    out = []
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        adj = np.zeros((n, n), dtype=bool)
        for (i, j), b in zip(pairs, bits):
            if b:
                adj[i, j] = True
        if _acyclic(adj.astype(int).tolist()):
            out.append(adj)
    return out


def random_dag(rng: np.random.Generator, n: int, p: float = 0.4) -> np.ndarray:
    perm = rng.permutation(n)
    adj = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p:
                adj[perm[a], perm[b]] = True
    return adj


def random_digraph(rng: np.random.Generator, n: int, p: float = 0.3) -> np.ndarray:
    adj = rng.random((n, n)) < p
    np.fill_diagonal(adj, False)
    return adj


# --- edit-distance oracles -------------------------------------------------

def pair_state_distances() -> np.ndarray:
    """BFS distances between the 4 states of one unordered pair.

    States: 0 none, 1 forward, 2 backward, 3 both. Moves allowed on a pair:
    add a missing direction, delete a present one, or reverse a single edge.
    A 2-cycle can only be built or dismantled one edge at a time.
    """
    moves = {0: (1, 2), 1: (0, 2, 3), 2: (0, 1, 3), 3: (1, 2)}
    dist = np.full((4, 4), -1, dtype=np.int64)
    for src in range(4):
        dist[src, src] = 0
        frontier = deque([src])
        while frontier:
            s = frontier.popleft()
            for t in moves[s]:
                if dist[src, t] < 0:
                    dist[src, t] = dist[src, s] + 1
                    frontier.append(t)
    return dist


_PAIR_DIST = pair_state_distances()


def pair_codes(adj: np.ndarray) -> np.ndarray:
    """State code per unordered pair (upper-triangle order)."""
    a = np.asarray(adj, dtype=bool)
    iu, ju = np.triu_indices(a.shape[0], k=1)
    return a[iu, ju].astype(int) + 2 * a[ju, iu].astype(int)


def shd_oracle(truth: np.ndarray, learned: np.ndarray) -> int:
    """Sum of per-pair BFS distances; moves never couple pairs."""
    return int(_PAIR_DIST[pair_codes(truth), pair_codes(learned)].sum())


def graph_edit_distance(truth: np.ndarray, learned: np.ndarray) -> int:
    """BFS over whole-graph states; validates the per-pair decomposition.

    State space is 2^(n(n-1)), so keep n <= 4.
    """
    t = np.asarray(truth, dtype=bool)
    l = np.asarray(learned, dtype=bool)
    n = t.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    index = {p: k for k, p in enumerate(pairs)}

    def encode(adj: np.ndarray) -> int:
        return sum(1 << k for k, (i, j) in enumerate(pairs) if adj[i, j])

    start, goal = encode(l), encode(t)
    seen = {start: 0}
    frontier = deque([start])
    while frontier:
        s = frontier.popleft()
        if s == goal:
            return seen[s]
        d = seen[s] + 1
        for k, (i, j) in enumerate(pairs):
            nxts = [s ^ (1 << k)]  # toggle: add if absent, delete if present
            if s >> k & 1:
                rk = index[(j, i)]
                if not (s >> rk & 1):
                    nxts.append((s ^ (1 << k)) | (1 << rk))  # reverse
            for nxt in nxts:
                if nxt not in seen:
                    seen[nxt] = d
                    frontier.append(nxt)
    raise AssertionError("BFS exhausted without reaching the goal graph")


# --- exact interventional-distribution oracle ------------------------------

def random_cpts(
    adj: np.ndarray, rng: np.random.Generator, low: float = 0.12, high: float = 0.88
) -> list[np.ndarray]:
    """p(x=1 | parent assignment) per node, all binary, bounded away from 0/1."""
    n = adj.shape[0]
    return [
        rng.uniform(low, high, size=(2,) * int(adj[:, j].sum())) for j in range(n)
    ]


def joint_distribution(adj: np.ndarray, cpts: list[np.ndarray]) -> np.ndarray:
    n = adj.shape[0]
    parents = [np.flatnonzero(adj[:, j]).tolist() for j in range(n)]
    joint = np.zeros((2,) * n)
    for assign in itertools.product((0, 1), repeat=n):
        p = 1.0
        for j in range(n):
            p1 = float(cpts[j][tuple(assign[q] for q in parents[j])])
            p *= p1 if assign[j] == 1 else 1.0 - p1
        joint[assign] = p
    return joint


def do_joint(adj: np.ndarray, cpts: list[np.ndarray], i: int, v: int) -> np.ndarray:
    """Joint under do(x_i = v): drop node i's factor, clamp its value."""
    n = adj.shape[0]
    parents = [np.flatnonzero(adj[:, j]).tolist() for j in range(n)]
    out = np.zeros((2,) * n)
    for assign in itertools.product((0, 1), repeat=n):
        if assign[i] != v:
            continue
        p = 1.0
        for m in range(n):
            if m == i:
                continue
            p1 = float(cpts[m][tuple(assign[q] for q in parents[m])])
            p *= p1 if assign[m] == 1 else 1.0 - p1
        out[assign] = p
    return out


def marginal(joint: np.ndarray, j: int) -> np.ndarray:
    axes = tuple(a for a in range(joint.ndim) if a != j)
    return joint.sum(axis=axes)


def adjustment_estimate(
    joint: np.ndarray, i: int, j: int, zset: frozenset[int], v: int
) -> np.ndarray:
    """sum_z p(z) p(x_j | x_i = v, z) from the observational joint.

    With j in z the conditional is an indicator and the sum collapses to the
    plain marginal of x_j, which is exactly the no-effect prediction.
    """
    n = joint.ndim
    if j in zset:
        return marginal(joint, j)
    out = np.zeros(2)
    zs = sorted(zset)
    for zvals in itertools.product((0, 1), repeat=len(zs)):
        fixed = {i: v}
        fixed.update(zip(zs, zvals))
        sub = joint
        for ax in sorted(fixed, reverse=True):
            sub = np.take(sub, fixed[ax], axis=ax)
        rem = [ax for ax in range(n) if ax not in fixed]
        jpos = rem.index(j)
        pxj_and = sub.sum(axis=tuple(a for a in range(sub.ndim) if a != jpos))
        pz = joint
        for ax in sorted(zs, reverse=True):
            pz = np.take(pz, dict(zip(zs, zvals))[ax], axis=ax)
        out += pz.sum() * pxj_and / pxj_and.sum()
    return out


class SidOracle:
    """Exact-enumeration SID for one ground-truth DAG with random CPT draws."""

    def __init__(self, adj: np.ndarray, rng: np.random.Generator, draws: int = 2):
        self.adj = np.asarray(adj, dtype=bool)
        self.n = self.adj.shape[0]
        self.cpts = [random_cpts(self.adj, rng) for _ in range(draws)]
        self.joints = [joint_distribution(self.adj, c) for c in self.cpts]
        self._do: dict[tuple[int, int, int], np.ndarray] = {}

    def _do_marginal(self, d: int, i: int, v: int, j: int) -> np.ndarray:
        key = (d, i, v)
        if key not in self._do:
            self._do[key] = do_joint(self.adj, self.cpts[d], i, v)
        return marginal(self._do[key], j)

    def cell_correct(self, i: int, j: int, zset: frozenset[int], tol: float = 1e-6) -> bool:
        """Does adjusting for zset recover p(x_j | do(x_i)) in every draw?"""
        for d, joint in enumerate(self.joints):
            for v in (0, 1):
                want = self._do_marginal(d, i, v, j)
                got = adjustment_estimate(joint, i, j, zset, v)
                if np.abs(want - got).max() > tol:
                    return False
        return True

    def sid(self, learned: np.ndarray) -> int:
        """Count of ordered pairs the learned parent sets get wrong."""
        l = np.asarray(learned, dtype=bool)
        count = 0
        for i in range(self.n):
            zset = frozenset(np.flatnonzero(l[:, i]).tolist())
            for j in range(self.n):
                if j != i and not self.cell_correct(i, j, zset):
                    count += 1
        return count


# --- confusion recount -----------------------------------------------------

def confusion_oracle(truth: np.ndarray, learned: np.ndarray) -> dict[str, int]:
    """Set-based recount of the direction-sensitive confusion entries."""
    t = np.asarray(truth, dtype=bool)
    l = np.asarray(learned, dtype=bool)
    n = t.shape[0]
    t_edges = {(i, j) for i in range(n) for j in range(n) if t[i, j]}
    l_edges = {(i, j) for i in range(n) for j in range(n) if l[i, j]}
    t_adj = {frozenset(e) for e in t_edges}
    l_adj = {frozenset(e) for e in l_edges}
    pairs = {frozenset((i, j)) for i in range(n) for j in range(i + 1, n)}
    a = len(t_edges)
    i_count = len(pairs) - len(t_adj)
    tp = len(t_edges & l_edges)
    fn = a - tp
    fp = len({p for p in l_adj if p not in t_adj})
    tn = i_count - fp
    return {"tp": tp, "tn": tn, "fp": fp, "fn": fn, "a": a, "i": i_count}


def powerset(items) -> list[tuple]:
    """All subsets, smallest first."""
    out = [()]
    for x in items:
        out += [s + (x,) for s in out]
    return sorted(out, key=len)
