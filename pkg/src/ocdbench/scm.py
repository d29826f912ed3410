"""Forward simulation of ground-truth networks.

Hard interventions replace the target's conditional distribution with a
uniform distribution over its states; all other mechanisms are untouched.
Sampling is ancestral in topological order and deterministic per
(network, count, seed).  Exact distribution queries enumerate the full
joint table and are guarded by a state-space limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .netio import BayesNet

ENUMERATION_LIMIT = 1_000_000
OBSERVATIONAL = -1


@dataclass
class Dataset:
    """Sample matrix (state indices) with per-sample intervention provenance.

    ``targets[s]`` is the intervened node index of sample ``s`` or
    ``OBSERVATIONAL`` (-1).
    """

    values: np.ndarray  # (N, n) int16
    targets: np.ndarray  # (N,) int64

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.int16)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D sample matrix")
        if self.targets.shape != (self.values.shape[0],):
            raise ValueError("one provenance entry per sample required")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    @classmethod
    def observational(cls, values: np.ndarray) -> "Dataset":
        return cls(values, np.full(len(values), OBSERVATIONAL))

    @classmethod
    def interventional(cls, values: np.ndarray, target: int) -> "Dataset":
        return cls(values, np.full(len(values), int(target)))


def _ancestral_sample(
    net: BayesNet,
    count: int,
    rng: np.random.Generator,
    replaced: dict[int, np.ndarray],
) -> np.ndarray:
    """Sample ``count`` rows, with the given nodes' CPDs replaced."""
    values = np.zeros((count, net.n), dtype=np.int16)
    for node in net.topological_order():
        spec = net.nodes[node]
        if node in replaced:
            probs = np.broadcast_to(replaced[node], (count, spec.n_states))
        else:
            if spec.parents:
                rows = net.parent_row_index(node, values[:, spec.parents])
            else:
                rows = np.zeros(count, dtype=np.int64)
            probs = spec.cpt[rows]
        cum = np.cumsum(probs, axis=1)
        u = rng.random(count)
        values[:, node] = np.minimum((u[:, None] >= cum).sum(axis=1), spec.n_states - 1)
    return values


def sample_observational(net: BayesNet, count: int, seed: int | np.random.Generator) -> Dataset:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return Dataset.observational(_ancestral_sample(net, count, rng, {}))


def sample_interventional(
    net: BayesNet,
    target: int,
    count: int,
    seed: int | np.random.Generator,
) -> Dataset:
    """Batch under a hard uniform intervention on ``target``."""
    if not 0 <= target < net.n:
        raise ValueError(f"target {target} out of range for {net.n} nodes")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    k = net.nodes[target].n_states
    uniform = np.full(k, 1.0 / k)
    return Dataset.interventional(
        _ancestral_sample(net, count, rng, {target: uniform}), target
    )


# --- exact enumeration -----------------------------------------------------

def joint_table(net: BayesNet, replaced: dict[int, np.ndarray] | None = None) -> np.ndarray:
    """Full joint probability tensor, axes in node order.

    ``replaced`` maps node index to a distribution vector that overrides the
    node's CPD (hard interventions; pass a point mass for do(X=x)).
    """
    counts = net.state_counts
    total = math.prod(int(c) for c in counts)
    if total > ENUMERATION_LIMIT:
        raise ValueError(
            f"joint state space of {total} exceeds enumeration limit {ENUMERATION_LIMIT}"
        )
    replaced = replaced or {}
    n = net.n
    joint = np.ones(tuple(int(c) for c in counts))
    for node, spec in enumerate(net.nodes):
        if node in replaced:
            dist = np.asarray(replaced[node], dtype=float)
            if dist.shape != (spec.n_states,):
                raise ValueError(f"replacement for node {node} has wrong length")
            axes = [node]
            tensor = dist
        else:
            axes = [*spec.parents, node]
            shape = tuple(net.nodes[p].n_states for p in spec.parents) + (spec.n_states,)
            tensor = spec.cpt.reshape(shape)
        order = np.argsort(axes)
        tensor = np.transpose(tensor, order)
        sorted_axes = [axes[i] for i in order]
        full_shape = [int(counts[d]) if d in sorted_axes else 1 for d in range(n)]
        joint = joint * tensor.reshape(full_shape)
    return joint


def marginal(joint: np.ndarray, node: int) -> np.ndarray:
    axes = tuple(d for d in range(joint.ndim) if d != node)
    return joint.sum(axis=axes)


def exact_marginal(net: BayesNet, node: int) -> np.ndarray:
    """Observational marginal P(X_node) by enumeration."""
    return marginal(joint_table(net), node)


def exact_interventional_dist(net: BayesNet, target: int, outcome: int) -> np.ndarray:
    """P(X_outcome) under the hard uniform intervention on ``target``."""
    k = net.nodes[target].n_states
    joint = joint_table(net, {target: np.full(k, 1.0 / k)})
    return marginal(joint, outcome)


# --- dataset files ---------------------------------------------------------

def save_dataset(path: str | Path, dataset: Dataset, node_names: list[str]) -> None:
    """CSV with one column per node (state indices) plus ``intervened_on``."""
    if len(node_names) != dataset.n_nodes:
        raise ValueError("one name per column required")
    lines = [",".join([*node_names, "intervened_on"])]
    for row, target in zip(dataset.values, dataset.targets):
        label = "" if target == OBSERVATIONAL else node_names[target]
        lines.append(",".join([*(str(int(v)) for v in row), label]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path: str | Path) -> tuple[Dataset, list[str]]:
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty dataset file")
    header = lines[0].split(",")
    if header[-1] != "intervened_on":
        raise ValueError(f"{path}: missing intervened_on column")
    names = header[:-1]
    index = {name: i for i, name in enumerate(names)}
    values = np.zeros((len(lines) - 1, len(names)), dtype=np.int16)
    targets = np.full(len(lines) - 1, OBSERVATIONAL)
    for r, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ValueError(f"{path}: row {r + 1} has {len(cells)} cells")
        values[r] = [int(v) for v in cells[:-1]]
        if cells[-1]:
            targets[r] = index[cells[-1]]
    return Dataset(values, targets), names
