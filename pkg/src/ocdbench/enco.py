"""Gradient-based structure learner over categorical data.

The graph is parameterised by an edge-existence logit matrix ``gamma`` and
an antisymmetric orientation logit matrix ``theta``; the probability of an
edge i -> j is sigmoid(gamma_ij) * sigmoid(theta_ij).  Each node carries a
two-layer perceptron predicting its state from the one-hot encoding of all
other nodes, masked by sampled parent sets.

Fitting alternates a distribution phase (conditional-model SGD on
observational batches under freshly sampled parent masks) with a graph
phase (score-function updates of gamma/theta).  The graph-phase estimator
compares, per candidate edge and sampled mask, the conditional NLL with
the edge forced present against forced absent; orientation updates are
gated strictly on interventional samples touching one of the endpoints,
which keeps theta exactly antisymmetric.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import is_acyclic, descendants, threshold_graph, topological_order, ThresholdedGraph
from .scm import Dataset

CHECKPOINT_VERSION = "enco-checkpoint-1"

# cap on f32 elements materialized per contrast kernel call; candidate
# parents are processed in chunks that respect it
_CHUNK_ELEMENT_BUDGET = 24_000_000


class DivergenceError(RuntimeError):
    """Raised when a training step produces non-finite numbers."""


@dataclass
class EncoConfig:
    hidden_size: int = 64
    leaky_slope: float = 0.1
    batch_size: int = 128
    lr_model: float = 5e-3
    weight_decay: float = 1e-4
    dist_iters_F: int = 1000
    graph_iters_G: int = 100
    graph_samples_K: int = 100
    epochs: int = 30
    lr_gamma: float = 2e-2
    lr_theta: float = 1e-1
    lambda_sparse: float = 4e-3
    # anneal the sparsity penalty over the first N intervention rounds
    # (0 disables): weak true edges survive the early rounds, when no
    # do-data backs them yet, without loosening the late-run pruning
    lambda_ramp_rounds: int = 0
    edge_prior: float = 0.3
    logit_clamp: float = 10.0
    logp_floor: float = 1e-12
    # graph-phase batch composition (rows subsampled per step)
    graph_obs_rows: int = 64
    graph_rows_per_target: int = 32
    # ablation: mix interventional rows into the distribution phase, with
    # the intervened node's own loss masked out
    dist_mix_interventional: bool = False

    def validate(self) -> None:
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be positive")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ValueError("leaky_slope must lie strictly between 0 and 1")
        if not 0.0 < self.edge_prior < 1.0:
            raise ValueError("edge_prior must lie strictly between 0 and 1")
        if self.logit_clamp <= 0:
            raise ValueError("logit_clamp must be positive")
        for field in ("batch_size", "graph_samples_K"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be positive")
        for field in ("dist_iters_F", "graph_iters_G", "epochs", "lambda_ramp_rounds"):
            if getattr(self, field) < 0:
                raise ValueError(f"{field} must be non-negative")
        for field in ("lr_model", "lr_gamma", "lr_theta"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be positive")
        if not 0.0 < self.logp_floor < 1.0:
            raise ValueError("logp_floor must lie strictly between 0 and 1")


def _rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class EncoModel:
    """Edge logits plus per-node conditional perceptrons."""

    def __init__(
        self,
        state_counts: np.ndarray,
        gamma: np.ndarray,
        theta: np.ndarray,
        w1: np.ndarray,
        b1: np.ndarray,
        w2: np.ndarray,
        b2: np.ndarray,
    ):
        self.state_counts = np.asarray(state_counts, dtype=np.int64)
        self.n = len(self.state_counts)
        self.offsets = np.concatenate([[0], np.cumsum(self.state_counts)]).astype(np.int64)
        self.width = int(self.offsets[-1])
        self.gamma = gamma
        self.theta = theta
        self.w1 = w1
        self.b1 = b1
        self.w2 = w2
        self.b2 = b2

    @property
    def hidden_size(self) -> int:
        return self.w1.shape[2]

    def block(self, node: int) -> slice:
        return slice(int(self.offsets[node]), int(self.offsets[node + 1]))

    def one_hot(self, values: np.ndarray) -> np.ndarray:
        """(..., n) state indices -> (..., width) float32 one-hot encoding."""
        values = np.asarray(values)
        enc = np.zeros(values.shape[:-1] + (self.width,), dtype=np.float32)
        cols = self.offsets[:-1] + values
        np.put_along_axis(enc, cols.astype(np.int64), np.float32(1.0), axis=-1)
        return enc

    def copy(self) -> "EncoModel":
        return EncoModel(
            self.state_counts.copy(),
            self.gamma.copy(),
            self.theta.copy(),
            self.w1.copy(),
            self.b1.copy(),
            self.w2.copy(),
            self.b2.copy(),
        )

    def save_bytes(self) -> bytes:
        buf = io.BytesIO()
        np.savez(
            buf,
            version=np.array(CHECKPOINT_VERSION),
            state_counts=self.state_counts,
            gamma=self.gamma,
            theta=self.theta,
            w1=self.w1,
            b1=self.b1,
            w2=self.w2,
            b2=self.b2,
        )
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.save_bytes())

    @classmethod
    def load(cls, source: str | Path | bytes) -> "EncoModel":
        if isinstance(source, bytes):
            data = np.load(io.BytesIO(source))
        else:
            data = np.load(source)
        version = str(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version!r}")
        return cls(
            data["state_counts"],
            data["gamma"],
            data["theta"],
            data["w1"],
            data["b1"],
            data["w2"],
            data["b2"],
        )


def init_model(
    state_counts: np.ndarray | list[int],
    cfg: EncoConfig,
    seed: int | np.random.Generator,
) -> EncoModel:
    """Fresh model: edge beliefs at ``edge_prior`` with undecided
    orientation, perceptron weights from a scaled-uniform scheme."""
    cfg.validate()
    rng = _rng(seed)
    counts = np.asarray(state_counts, dtype=np.int64)
    if (counts < 2).any():
        raise ValueError("every node needs at least two states")
    n = len(counts)
    width = int(counts.sum())
    h = cfg.hidden_size
    c_max = int(counts.max())

    prior_logit = float(np.log(cfg.edge_prior / (1.0 - cfg.edge_prior)))
    gamma = np.full((n, n), prior_logit, dtype=np.float64)
    np.fill_diagonal(gamma, -cfg.logit_clamp)
    theta = np.zeros((n, n), dtype=np.float64)

    lim1 = np.sqrt(6.0 / (width + h))
    lim2 = np.sqrt(6.0 / (h + c_max))
    w1 = rng.uniform(-lim1, lim1, size=(n, width, h)).astype(np.float32)
    b1 = np.zeros((n, h), dtype=np.float32)
    w2 = rng.uniform(-lim2, lim2, size=(n, h, c_max)).astype(np.float32)
    b2 = np.zeros((n, c_max), dtype=np.float32)

    model = EncoModel(counts, gamma, theta, w1, b1, w2, b2)
    for j in range(n):
        model.w1[j, model.block(j), :] = 0.0  # a node never reads its own value
    return model


def edge_probabilities(model: EncoModel, cfg: EncoConfig | None = None) -> np.ndarray:
    """P(edge i -> j) = sigmoid(gamma) * sigmoid(theta), diagonal zero."""
    clamp = (cfg or EncoConfig()).logit_clamp
    probs = _sigmoid(np.clip(model.gamma, -clamp, clamp)) * _sigmoid(
        np.clip(model.theta, -clamp, clamp)
    )
    np.fill_diagonal(probs, 0.0)
    return probs


def extract_graph(model: EncoModel, tau: float = 0.5) -> ThresholdedGraph:
    return threshold_graph(edge_probabilities(model), tau)


# --- conditional-model forward/backward ------------------------------------

def _expand_cols(model: EncoModel, cols: np.ndarray) -> np.ndarray:
    """Repeat node-indexed mask entries across their one-hot blocks (the
    last axis becomes width-indexed), float32."""
    return np.repeat(cols.astype(np.float32), model.state_counts, axis=-1)


def _leaky(x: np.ndarray, slope: float, inplace: bool = False) -> np.ndarray:
    scaled = np.float32(slope) * x
    if inplace:
        return np.maximum(x, scaled, out=x)
    return np.maximum(x, scaled)


def _leaky_deriv(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x >= 0, np.float32(1.0), np.float32(slope))


def distribution_step(
    model: EncoModel,
    batch: Dataset,
    cfg: EncoConfig,
    seed: int | np.random.Generator,
) -> EncoModel:
    """One SGD step of every conditional model on the given batch."""
    if len(batch) == 0:
        return model
    rng = _rng(seed)
    enc = model.one_hot(batch.values)
    _dist_step(model, enc, batch.values, batch.targets, cfg, rng)
    return model


def _dist_step(
    model: EncoModel,
    enc: np.ndarray,
    values: np.ndarray,
    targets: np.ndarray,
    cfg: EncoConfig,
    rng: np.random.Generator,
) -> None:
    n, s = model.n, enc.shape[0]
    probs = edge_probabilities(model, cfg)
    u = rng.random((n, s, n))
    pmask = u < probs.T[:, None, :]  # pmask[j, s, i]: keep parent i for node j
    pmask[np.arange(n), :, np.arange(n)] = False
    inp = enc[None, :, :] * _expand_cols(model, pmask)

    h_pre = inp @ model.w1 + model.b1[:, None, :]
    hidden = _leaky(h_pre, cfg.leaky_slope)
    logits = hidden @ model.w2 + model.b2[:, None, :]
    c_max = logits.shape[-1]
    invalid = np.arange(c_max)[None, :] >= model.state_counts[:, None]
    logits += np.where(invalid, np.float32(-1e30), np.float32(0.0))[:, None, :]

    top = logits.max(axis=-1, keepdims=True)
    expd = np.exp(logits - top)
    soft = expd / expd.sum(axis=-1, keepdims=True)

    y = np.asarray(values, dtype=np.int64)
    grad_logits = soft
    idx_s = np.arange(s)
    for j in range(n):
        grad_logits[j, idx_s, y[:, j]] -= 1.0
    # rows where node j itself was intervened carry no information about
    # its mechanism; drop their loss contribution
    weights = (targets[None, :] != np.arange(n)[:, None]).astype(np.float32)
    denom = np.maximum(weights.sum(axis=1, keepdims=True), 1.0)
    grad_logits *= (weights / denom)[:, :, None]

    grad_w2 = hidden.transpose(0, 2, 1) @ grad_logits
    grad_b2 = grad_logits.sum(axis=1)
    grad_hidden = grad_logits @ model.w2.transpose(0, 2, 1)
    grad_pre = grad_hidden * _leaky_deriv(h_pre, cfg.leaky_slope)
    grad_w1 = inp.transpose(0, 2, 1) @ grad_pre
    grad_b1 = grad_pre.sum(axis=1)

    checksum = grad_w1.sum() + grad_w2.sum() + grad_b1.sum() + grad_b2.sum()
    if not np.isfinite(checksum):
        raise DivergenceError("non-finite conditional-model gradient")

    lr = np.float32(cfg.lr_model)
    wd = np.float32(cfg.weight_decay)
    model.w1 -= lr * (grad_w1 + wd * model.w1)
    model.b1 -= lr * grad_b1
    model.w2 -= lr * (grad_w2 + wd * model.w2)
    model.b2 -= lr * grad_b2
    for j in range(n):
        model.w1[j, model.block(j), :] = 0.0


# --- graph-phase estimator -------------------------------------------------

def _node_contrasts(
    model: EncoModel,
    j: int,
    enc: np.ndarray,
    values: np.ndarray,
    cols_j: np.ndarray,
    cfg: EncoConfig,
    shared_rows: bool,
) -> np.ndarray:
    """Per candidate parent i of node j: NLL(edge i->j forced present) minus
    NLL(forced absent), elementwise over groups and samples.

    ``enc``: (G, S, width) encodings; ``values``: (G, S, n) state indices;
    ``cols_j``: (G, n) sampled parent indicators for node j.  With
    ``shared_rows`` the G-axis of enc/values is a broadcast of one shared
    row set.  Returns (n, G, S) float32 with row j zero.
    """
    n = model.n
    g, s = enc.shape[0], enc.shape[1]
    h = model.hidden_size
    c = int(model.state_counts[j])
    slope = cfg.leaky_slope
    floor = np.float32(np.log(cfg.logp_floor))

    bm = _expand_cols(model, cols_j)  # (G, width)
    h_base = (enc * bm[:, None, :]) @ model.w1[j] + model.b1[j]  # (G, S, H)
    w2j = model.w2[j, :, :c]
    b2j = model.b2[j, :c]
    y_idx = values[..., j].astype(np.int64)

    # one-hot inputs make each block's first-layer contribution a row gather
    delta_rows = values[0] if shared_rows else values  # (S, n) or (G, S, n)
    delta_idx = (model.offsets[:-1] + delta_rows).astype(np.int64)

    out = np.zeros((n, g, s), dtype=np.float32)
    cands = [i for i in range(n) if i != j]
    per_cand = 2 * g * s * h
    chunk = max(1, _CHUNK_ELEMENT_BUDGET // max(per_cand, 1))
    for start in range(0, len(cands), chunk):
        part = cands[start : start + chunk]
        m = len(part)
        pre = np.empty((2, m, g, s, h), dtype=np.float32)
        for a, i in enumerate(part):
            delta = model.w1[j][delta_idx[..., i]]  # (S, H) or (G, S, H)
            on_c = cols_j[:, i].astype(np.float32)[:, None, None]
            np.multiply(delta, 1.0 - on_c, out=pre[0, a])
            pre[0, a] += h_base
            np.multiply(delta, -on_c, out=pre[1, a])
            pre[1, a] += h_base
        hidden = _leaky(pre.reshape(2 * m * g * s, h), slope, inplace=True)
        logits = hidden @ w2j + b2j  # (2mGS, C)
        top = logits.max(axis=-1, keepdims=True)
        log_z = top[:, 0] + np.log(np.exp(logits - top).sum(axis=-1))
        yy = np.broadcast_to(y_idx, (2, m, g, s)).reshape(-1)
        picked = logits[np.arange(logits.shape[0]), yy]
        nll = -np.maximum(picked - log_z, floor)
        nll = nll.reshape(2, m, g, s)
        out[part] = nll[0] - nll[1]
    return out


def estimate_graph_gradients(
    model: EncoModel,
    gamma_contrast: np.ndarray,
    gamma_valid: np.ndarray,
    theta_contrast: np.ndarray,
    cfg: EncoConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Turn contrast means into gamma/theta gradients without applying them.

    ``theta_contrast[i, j]`` must be the mean contrast of edge i->j over
    samples from interventions on i (zero when there are none), which makes
    the returned theta gradient exactly antisymmetric.
    """
    clamp = cfg.logit_clamp
    sg = _sigmoid(np.clip(model.gamma, -clamp, clamp))
    st = _sigmoid(np.clip(model.theta, -clamp, clamp))
    grad_gamma = sg * (1 - sg) * st * (gamma_contrast + cfg.lambda_sparse)
    grad_gamma *= gamma_valid
    theta_half = st * (1 - st) * sg * theta_contrast
    grad_theta = theta_half - theta_half.T
    off = ~np.eye(model.n, dtype=bool)
    grad_gamma *= off
    grad_theta *= off
    if not (np.isfinite(grad_gamma).all() and np.isfinite(grad_theta).all()):
        raise DivergenceError("non-finite graph gradient")
    return grad_gamma, grad_theta


def _contrast_means(
    model: EncoModel,
    masks: np.ndarray,
    enc: np.ndarray,
    values: np.ndarray,
    row_targets: np.ndarray,
    group_targets: np.ndarray | None,
    cfg: EncoConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean edge contrasts for gamma and theta over mask groups.

    ``masks``: (G, n, n); ``enc``: (G, S, width) or (S, width) shared across
    groups; ``row_targets``: (S,) intervention target per row (shared), or
    None with ``group_targets``: (G,) one target per whole group.
    """
    n = model.n
    vals = np.asarray(values)
    shared_rows = enc.ndim == 2
    g = masks.shape[0]
    if shared_rows:
        s = enc.shape[0]
        enc = np.broadcast_to(enc, (g, s, enc.shape[1]))
        vals = np.broadcast_to(vals, (g, s, n))
    s = enc.shape[1]

    gamma_c = np.zeros((n, n))
    gamma_valid = np.zeros((n, n), dtype=bool)
    theta_c = np.zeros((n, n))
    if group_targets is None:
        present = [np.flatnonzero(row_targets == t) for t in range(n)]
    else:
        present_groups = [np.flatnonzero(group_targets == t) for t in range(n)]

    for j in range(n):
        contr = _node_contrasts(model, j, enc, vals, masks[:, :, j], cfg, shared_rows)
        if group_targets is None:
            grows = row_targets != j
            if grows.any():
                gamma_c[:, j] = contr[:, :, grows].mean(axis=(1, 2), dtype=np.float64)
                gamma_valid[:, j] = True
            for i in range(n):
                if i != j and present[i].size:
                    theta_c[i, j] = contr[i][:, present[i]].mean(dtype=np.float64)
        else:
            ggroups = group_targets != j
            if ggroups.any():
                gamma_c[:, j] = contr[:, ggroups, :].mean(axis=(1, 2), dtype=np.float64)
                gamma_valid[:, j] = True
            for i in range(n):
                if i != j and present_groups[i].size:
                    theta_c[i, j] = contr[i][present_groups[i]].mean(dtype=np.float64)
    return gamma_c, gamma_valid, theta_c


def estimate_interventional_gradients(
    model: EncoModel,
    masks: np.ndarray,
    values: np.ndarray,
    targets: np.ndarray,
    cfg: EncoConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Gamma/theta gradients a batch of per-mask interventional samples
    would induce, averaged over masks, without applying them.

    ``masks``: (G, n, n); ``values``: (G, S, n) samples evaluated against
    their own mask; ``targets``: (G,) intervened node per group.
    """
    enc = model.one_hot(values)
    gamma_c, gamma_valid, theta_c = _contrast_means(
        model, masks, enc, values, None, np.asarray(targets), cfg
    )
    return estimate_graph_gradients(model, gamma_c, gamma_valid, theta_c, cfg)


def _graph_update(
    model: EncoModel,
    enc: np.ndarray,
    values: np.ndarray,
    targets: np.ndarray,
    cfg: EncoConfig,
    rng: np.random.Generator,
) -> None:
    """One gamma/theta update from a shared row set under K fresh masks."""
    n = model.n
    k = cfg.graph_samples_K
    probs = edge_probabilities(model, cfg)
    masks = rng.random((k, n, n)) < probs[None]
    masks[:, np.arange(n), np.arange(n)] = False
    gamma_c, gamma_valid, theta_c = _contrast_means(
        model, masks, enc, values, targets, None, cfg
    )
    grad_gamma, grad_theta = estimate_graph_gradients(model, gamma_c, gamma_valid, theta_c, cfg)
    off = ~np.eye(n, dtype=bool)
    model.gamma[off] -= cfg.lr_gamma * grad_gamma[off]
    model.theta[off] -= cfg.lr_theta * grad_theta[off]


def _assemble_graph_rows(
    obs: Dataset | None,
    ints: list[Dataset],
    n: int,
    cfg: EncoConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Subsample a graph-phase row set: a slice of observational data plus a
    per-target slice of the pooled interventional data."""
    vals = []
    targs = []
    if obs is not None and len(obs) and cfg.graph_obs_rows > 0:
        take = min(len(obs), cfg.graph_obs_rows)
        idx = rng.choice(len(obs), size=take, replace=False)
        vals.append(obs.values[idx])
        targs.append(obs.targets[idx])
    by_target: dict[int, list[np.ndarray]] = {}
    for ds in ints:
        for t in np.unique(ds.targets):
            by_target.setdefault(int(t), []).append(ds.values[ds.targets == t])
    for t in sorted(by_target):
        pool = by_target[t][0] if len(by_target[t]) == 1 else np.concatenate(by_target[t])
        take = min(len(pool), cfg.graph_rows_per_target)
        idx = rng.choice(len(pool), size=take, replace=False)
        vals.append(pool[idx])
        targs.append(np.full(take, t))
    if not vals:
        empty = np.zeros((0, n), dtype=np.int16)
        return empty, np.zeros(0, dtype=np.int64)
    return np.concatenate(vals, axis=0), np.concatenate(targs, axis=0).astype(np.int64)


def graph_step(
    model: EncoModel,
    obs: Dataset | None,
    ints: list[Dataset],
    cfg: EncoConfig,
    seed: int | np.random.Generator,
) -> EncoModel:
    """One gamma/theta update from subsampled observational and
    interventional rows."""
    rng = _rng(seed)
    values, targets = _assemble_graph_rows(obs, ints, model.n, cfg, rng)
    if len(values) == 0:
        return model
    enc = model.one_hot(values)
    _graph_update(model, enc, values, targets, cfg, rng)
    return model


def fit(
    model: EncoModel,
    obs: Dataset | None,
    ints: list[Dataset],
    cfg: EncoConfig,
    seed: int | np.random.Generator,
) -> EncoModel:
    """cfg.epochs alternations of (dist_iters_F distribution steps,
    graph_iters_G graph steps); mutates and returns ``model``."""
    cfg.validate()
    if cfg.epochs == 0:
        return model
    rng = _rng(seed)

    dist_vals = None
    dist_targets = None
    if obs is not None and len(obs):
        dist_vals = obs.values
        dist_targets = obs.targets
    if cfg.dist_mix_interventional and ints:
        pieces = [ds.values for ds in ints]
        tpieces = [ds.targets for ds in ints]
        if dist_vals is not None:
            pieces.insert(0, dist_vals)
            tpieces.insert(0, dist_targets)
        dist_vals = np.concatenate(pieces, axis=0)
        dist_targets = np.concatenate(tpieces, axis=0)
    enc_dist = model.one_hot(dist_vals) if dist_vals is not None else None

    for _ in range(cfg.epochs):
        if enc_dist is not None:
            for _ in range(cfg.dist_iters_F):
                idx = rng.integers(0, len(dist_vals), size=cfg.batch_size)
                _dist_step(model, enc_dist[idx], dist_vals[idx], dist_targets[idx], cfg, rng)
        for _ in range(cfg.graph_iters_G):
            values, targets = _assemble_graph_rows(obs, ints, model.n, cfg, rng)
            if len(values) == 0:
                continue
            _graph_update(model, model.one_hot(values), values, targets, cfg, rng)
    return model


# --- mask sampling and hallucinated data -----------------------------------

def sample_graph_mask(
    model: EncoModel,
    seed: int | np.random.Generator,
    cfg: EncoConfig | None = None,
) -> np.ndarray:
    """Bernoulli adjacency mask from the current edge beliefs, diagonal
    false.  May contain cycles; see sample_acyclic_mask."""
    rng = _rng(seed)
    probs = edge_probabilities(model, cfg)
    mask = rng.random((model.n, model.n)) < probs
    np.fill_diagonal(mask, False)
    return mask


def acyclic_mask_from_uniforms(
    model: EncoModel,
    uniforms: np.ndarray,
    cfg: EncoConfig | None = None,
) -> tuple[np.ndarray, dict]:
    """Deterministic acyclic mask from a (retries+1, n, n) uniform block.

    The first acyclic Bernoulli draw wins; if every draw is cyclic, the
    last is repaired by greedily deleting the lowest-belief edge lying on a
    cycle.  Stats report retry and prune counts.
    """
    probs = edge_probabilities(model, cfg)
    stats = {"cyclic_retries": 0, "pruned_edges": 0}
    mask = None
    for r in range(uniforms.shape[0]):
        mask = uniforms[r] < probs
        np.fill_diagonal(mask, False)
        if is_acyclic(mask):
            return mask, stats
        stats["cyclic_retries"] += 1
    stats["cyclic_retries"] -= 1  # the kept final draw is repaired, not retried
    while not is_acyclic(mask):
        reach = descendants(mask)
        on_cycle = mask & reach.T  # edge i->j closing a path j ->* i
        candidates = np.argwhere(on_cycle)
        drop = candidates[np.argmin(probs[on_cycle])]
        mask[drop[0], drop[1]] = False
        stats["pruned_edges"] += 1
    return mask, stats


def sample_acyclic_mask(
    model: EncoModel,
    seed: int | np.random.Generator,
    cfg: EncoConfig | None = None,
    max_retries: int = 20,
) -> tuple[np.ndarray, dict]:
    """Acyclic Bernoulli mask with a fixed-size uniform draw, so equal
    seeds consume equal randomness regardless of how many retries fire."""
    rng = _rng(seed)
    uniforms = rng.random((max_retries + 1, model.n, model.n))
    return acyclic_mask_from_uniforms(model, uniforms, cfg)


def hallucinate(
    model: EncoModel,
    mask: np.ndarray,
    target: int | None,
    count: int,
    uniforms: np.ndarray | None = None,
    seed: int | np.random.Generator | None = None,
    cfg: EncoConfig | None = None,
) -> np.ndarray:
    """Ancestral samples from the model's own conditionals under ``mask``.

    ``target`` (if given) is drawn uniformly over its states, mimicking a
    hard intervention.  Each node consumes its own column of the uniform
    draw, so relabelling nodes and permuting columns commute.
    """
    cfg = cfg or EncoConfig()
    if uniforms is None:
        if seed is None:
            raise ValueError("either uniforms or seed is required")
        uniforms = _rng(seed).random((count, model.n))
    if uniforms.shape != (count, model.n):
        raise ValueError("uniform draw must be (count, n)")
    values = np.zeros((count, model.n), dtype=np.int16)
    enc = np.zeros((count, model.width), dtype=np.float32)
    bm = _expand_cols(model, np.asarray(mask, dtype=bool).T)  # row j: input mask for node j
    rows = np.arange(count)
    for j in topological_order(mask):
        c = int(model.state_counts[j])
        u = uniforms[:, j]
        if target is not None and j == target:
            states = np.minimum((u * c).astype(np.int64), c - 1)
        else:
            hidden = _leaky((enc * bm[j]) @ model.w1[j] + model.b1[j], cfg.leaky_slope)
            logits = hidden @ model.w2[j, :, :c] + model.b2[j, :c]
            top = logits.max(axis=-1, keepdims=True)
            expd = np.exp(logits - top)
            cum = np.cumsum(expd / expd.sum(axis=-1, keepdims=True), axis=-1)
            states = np.minimum((u[:, None] >= cum).sum(axis=1), c - 1)
        values[:, j] = states
        enc[rows, model.offsets[j] + states] = 1.0
    return values


def conditional_nll(
    model: EncoModel,
    values: np.ndarray,
    parent_mask: np.ndarray,
    cfg: EncoConfig | None = None,
) -> np.ndarray:
    """Per-sample, per-node NLL under a fixed parent mask; (S, n)."""
    cfg = cfg or EncoConfig()
    floor = np.log(cfg.logp_floor)
    enc = model.one_hot(values)
    bm = _expand_cols(model, np.asarray(parent_mask, dtype=bool).T)
    out = np.zeros((values.shape[0], model.n), dtype=np.float64)
    for j in range(model.n):
        c = int(model.state_counts[j])
        hidden = _leaky((enc * bm[j]) @ model.w1[j] + model.b1[j], cfg.leaky_slope)
        logits = hidden @ model.w2[j, :, :c] + model.b2[j, :c]
        top = logits.max(axis=-1, keepdims=True)
        log_z = top[:, 0] + np.log(np.exp(logits - top).sum(axis=-1))
        picked = logits[np.arange(logits.shape[0]), np.asarray(values[:, j], dtype=np.int64)]
        out[:, j] = -np.maximum(picked - log_z, floor)
    return out
