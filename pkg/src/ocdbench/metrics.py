"""Structure-recovery metrics against a ground-truth DAG.

* SHD: per-pair edit distance (add / delete / reverse, a reversal costs 1).
* SID: number of ordered pairs (i, j) whose interventional distribution
  p(X_j | do(X_i)) is estimated wrongly when adjusting for i's parent set
  in the learned graph.  Decided graphically via the adjustment criterion
  (forbidden-set check plus d-separation in the proper backdoor graph),
  which tests pin against exact enumeration oracles.
* BSF: balanced scoring that weights hits/misses by the number of truly
  adjacent and non-adjacent pairs.

The learned graph may be cyclic: SHD operates on raw edge sets, BSF on
adjacency, and SID counts every pair involving a node on a learned cycle
as incorrect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import _as_adj, cycle_nodes, descendants, is_acyclic

# pair-status codes: 0 none, 1 i->j, 2 j->i, 3 both
_PAIR_COST = np.array(
    [
        [0, 1, 1, 2],
        [1, 0, 1, 1],
        [1, 1, 0, 1],
        [2, 1, 1, 0],
    ],
    dtype=np.int64,
)


def _check_pair(truth: np.ndarray, learned: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    t = _as_adj(truth)
    l = _as_adj(learned)
    if t.shape != l.shape:
        raise ValueError(f"graph sizes differ: {t.shape} vs {l.shape}")
    return t, l


def shd(truth: np.ndarray, learned: np.ndarray) -> int:
    """Structural Hamming distance with reversals counted once."""
    t, l = _check_pair(truth, learned)
    iu, ju = np.triu_indices(t.shape[0], k=1)
    t_code = t[iu, ju].astype(int) + 2 * t[ju, iu].astype(int)
    l_code = l[iu, ju].astype(int) + 2 * l[ju, iu].astype(int)
    return int(_PAIR_COST[t_code, l_code].sum())


@dataclass(frozen=True)
class ConfusionCounts:
    """Direction-sensitive hit counts over a ground truth with ``a`` edges
    and ``i`` non-adjacent unordered pairs."""

    tp: int
    tn: int
    fp: int
    fn: int
    a: int
    i: int


def confusion_counts(truth: np.ndarray, learned: np.ndarray) -> ConfusionCounts:
    """TP requires the correct direction; a reversal counts as FN only.

    FP/TN are judged on unordered-pair adjacency, so an extra edge can only
    appear on a truly non-adjacent pair.
    """
    t, l = _check_pair(truth, learned)
    n = t.shape[0]
    a = int(t.sum())
    i = n * (n - 1) // 2 - a
    tp = int((t & l).sum())
    fn = a - tp
    adj_t = t | t.T
    adj_l = l | l.T
    iu, ju = np.triu_indices(n, k=1)
    fp = int((adj_l[iu, ju] & ~adj_t[iu, ju]).sum())
    tn = i - fp
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn, a=a, i=i)


def bsf(truth: np.ndarray, learned: np.ndarray) -> float | None:
    """Balanced scoring function in [-1, 1]; None when undefined (no edges
    or no non-adjacent pairs in the truth)."""
    c = confusion_counts(truth, learned)
    if c.a == 0 or c.i == 0:
        return None
    return 0.5 * (c.tp / c.a + c.tn / c.i - c.fp / c.i - c.fn / c.a)


# --- SID -------------------------------------------------------------------

def _moral_separated(
    adj: np.ndarray, x: int, y: int, given: frozenset[int]
) -> bool:
    """True iff x and y are d-separated by ``given`` in the DAG ``adj``.

    Ancestral-moral-graph construction: restrict to ancestors of
    {x, y} union given, marry co-parents, drop directions, delete the
    conditioning nodes, and test undirected reachability.
    """
    n = adj.shape[0]
    anc = descendants(adj).T  # anc[v, u] iff u is an ancestor of v
    keep = np.zeros(n, dtype=bool)
    for v in (x, y, *given):
        keep[v] = True
        keep |= anc[v]
    und = np.zeros((n, n), dtype=bool)
    sub = adj & keep[:, None] & keep[None, :]
    und |= sub | sub.T
    for v in np.flatnonzero(keep):
        parents = np.flatnonzero(sub[:, v])
        for a_i in range(len(parents)):
            for b_i in range(a_i + 1, len(parents)):
                und[parents[a_i], parents[b_i]] = True
                und[parents[b_i], parents[a_i]] = True
    blocked = np.zeros(n, dtype=bool)
    for v in given:
        blocked[v] = True
    if blocked[x] or blocked[y]:
        # conditioning on an endpoint separates it from everything
        return True
    frontier = {x}
    seen = {x}
    while frontier:
        nxt = set()
        for v in frontier:
            for w in np.flatnonzero(und[v]):
                if w == y:
                    return False
                if w not in seen and not blocked[w] and keep[w]:
                    seen.add(w)
                    nxt.add(w)
        frontier = nxt
    return True


def _valid_adjustment(
    truth: np.ndarray,
    reach: np.ndarray,
    i: int,
    j: int,
    zset: frozenset[int],
) -> bool:
    """Adjustment criterion for estimating p(X_j | do(X_i)) with set ``zset``.

    ``reach`` is the precomputed descendant matrix of ``truth``.
    """
    n = truth.shape[0]
    # nodes on proper causal paths i -> j, excluding i itself
    on_path = np.zeros(n, dtype=bool)
    for w in range(n):
        if w != i and reach[i, w] and (w == j or reach[w, j]):
            on_path[w] = True
    forbidden = on_path.copy()
    for w in np.flatnonzero(on_path):
        forbidden |= reach[w]
    forbidden[i] = True
    if any(forbidden[z] for z in zset):
        return False
    # proper backdoor graph: drop the first edge of every proper causal path
    pbd = truth.copy()
    for w in np.flatnonzero(on_path):
        pbd[i, w] = False
    return _moral_separated(pbd, i, j, zset)


def pair_correct(
    truth: np.ndarray,
    i: int,
    j: int,
    learned_parents_of_i: frozenset[int],
    reach: np.ndarray | None = None,
) -> bool:
    """Whether adjusting for the learned parent set of ``i`` recovers the
    effect of do(X_i) on X_j in the ground truth."""
    t = _as_adj(truth)
    if reach is None:
        reach = descendants(t)
    if j in learned_parents_of_i:
        # the learned graph claims j is upstream, i.e. no effect at all
        return not reach[i, j]
    return _valid_adjustment(t, reach, i, j, learned_parents_of_i)


def sid(truth: np.ndarray, learned: np.ndarray) -> int:
    """Structural intervention distance.

    Cyclic learned graphs: every ordered pair involving a node that lies on
    a directed cycle is counted as incorrect; the remaining pairs are judged
    by their (well-defined) learned parent sets.
    """
    t, l = _check_pair(truth, learned)
    if not is_acyclic(t):
        raise ValueError("ground truth must be acyclic")
    n = t.shape[0]
    reach = descendants(t)
    on_cycle = cycle_nodes(l)
    count = 0
    parent_sets = [frozenset(np.flatnonzero(l[:, i]).tolist()) for i in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            if on_cycle[i] or on_cycle[j]:
                count += 1
            elif not pair_correct(t, i, j, parent_sets[i], reach):
                count += 1
    return count
