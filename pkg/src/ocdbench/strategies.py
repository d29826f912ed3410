"""Intervention-targeting strategies behind one dispatch interface.

Numerical strategies score candidate targets from the learner's own state;
oracle strategies additionally read the ground-truth network; the external
strategy defers the choice to an interactive channel.  All randomness flows
through the state's generator so runs are reproducible per seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from . import enco
from .enco import EncoConfig, EncoModel
from .netio import BayesNet

STRATEGY_NAMES = ("random", "round_robin", "degree_prob", "git", "ait", "cbed", "external")


@dataclass
class TargetingState:
    round: int
    model: EncoModel
    history: list[int]
    rng: np.random.Generator
    net_ref: BayesNet | None = None  # oracle strategies only
    enco_cfg: EncoConfig = field(default_factory=EncoConfig)
    node_names: list[str] | None = None


@dataclass
class HallucinationConfig:
    graphs: int = 50
    samples_per: int = 128
    max_retries: int = 20


@dataclass
class StrategyScore:
    scores: np.ndarray
    chosen: int
    info: dict = field(default_factory=dict)


def _argmax(scores: np.ndarray) -> int:
    # np.argmax already returns the lowest index among equal maxima
    return int(np.argmax(scores))


def next_random(state: TargetingState) -> int:
    return int(state.rng.integers(state.model.n))


def next_round_robin(state: TargetingState) -> int:
    """Uniform over nodes not yet visited in the current cycle; the cycle
    resets once every node has been chosen."""
    n = state.model.n
    cycle_start = (len(state.history) // n) * n
    seen = set(state.history[cycle_start:])
    eligible = [i for i in range(n) if i not in seen]
    return int(eligible[state.rng.integers(len(eligible))])


def next_degree_prob(state: TargetingState) -> int:
    """Ground-truth out-degree-proportional sampling (oracle)."""
    if state.net_ref is None:
        raise ValueError("degree_prob requires the ground-truth network")
    out_deg = state.net_ref.adjacency().sum(axis=1).astype(np.float64)
    total = out_deg.sum()
    if total == 0:
        return int(state.rng.integers(len(out_deg)))
    return int(state.rng.choice(len(out_deg), p=out_deg / total))


# --- model-driven scores ---------------------------------------------------

def _draw_mask_block(state: TargetingState, cfg: HallucinationConfig) -> np.ndarray:
    n = state.model.n
    return state.rng.random((cfg.max_retries + 1, n, n))


def _hallucinated_ensemble(
    state: TargetingState,
    target: int,
    cfg: HallucinationConfig,
    masks: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, dict]:
    """Sample (or reuse) mask ensemble and hallucinate do(target) batches.

    Returns (masks (G,n,n), values (G,S,n), diagnostics).
    """
    model = state.model
    n = model.n
    info = {"cyclic_retries": 0, "pruned_edges": 0}
    if masks is None:
        drawn = []
        for _ in range(cfg.graphs):
            mask, stats = enco.acyclic_mask_from_uniforms(
                model, _draw_mask_block(state, cfg), state.enco_cfg
            )
            drawn.append(mask)
            info["cyclic_retries"] += stats["cyclic_retries"]
            info["pruned_edges"] += stats["pruned_edges"]
        masks = np.stack(drawn)
    values = np.stack(
        [
            enco.hallucinate(
                model,
                masks[g],
                target,
                cfg.samples_per,
                uniforms=state.rng.random((cfg.samples_per, n)),
                cfg=state.enco_cfg,
            )
            for g in range(masks.shape[0])
        ]
    )
    return masks, values, info


def git_score(state: TargetingState, cfg: HallucinationConfig | None = None) -> StrategyScore:
    """Expected gradient-response score: per candidate, the L2 norm of the
    gamma/theta gradient that hallucinated do(candidate) batches would
    induce, averaged over a fresh mask ensemble per candidate."""
    cfg = cfg or HallucinationConfig()
    model = state.model
    n = model.n
    scores = np.zeros(n)
    info = {"cyclic_retries": 0, "pruned_edges": 0}
    for k in range(n):
        masks, values, einfo = _hallucinated_ensemble(state, k, cfg)
        info["cyclic_retries"] += einfo["cyclic_retries"]
        info["pruned_edges"] += einfo["pruned_edges"]
        grad_gamma, grad_theta = enco.estimate_interventional_gradients(
            model, masks, values, np.full(masks.shape[0], k), state.enco_cfg
        )
        scores[k] = np.sqrt((grad_gamma**2).sum() + (grad_theta**2).sum())
    return StrategyScore(scores, _argmax(scores), info)


def ait_score(state: TargetingState, cfg: HallucinationConfig | None = None) -> StrategyScore:
    """Between-graph versus within-graph dispersion of hallucinated
    interventional samples, F-statistic style, shared mask ensemble."""
    cfg = cfg or HallucinationConfig()
    model = state.model
    n = model.n
    info = {"cyclic_retries": 0, "pruned_edges": 0}
    drawn = []
    for _ in range(cfg.graphs):
        mask, stats = enco.acyclic_mask_from_uniforms(
            model, _draw_mask_block(state, cfg), state.enco_cfg
        )
        drawn.append(mask)
        info["cyclic_retries"] += stats["cyclic_retries"]
        info["pruned_edges"] += stats["pruned_edges"]
    masks = np.stack(drawn)

    scores = np.zeros(n)
    if cfg.graphs >= 2 and cfg.samples_per >= 2:
        for k in range(n):
            _, values, _ = _hallucinated_ensemble(state, k, cfg, masks=masks)
            enc = model.one_hot(values).astype(np.float64)  # (G, S, width)
            means = enc.mean(axis=1)
            between = means.var(axis=0, ddof=1)
            within = enc.var(axis=1, ddof=1).mean(axis=0)
            keep = within > 0
            # the clamped node only reflects the forced draw, not a response
            keep[model.block(k)] = False
            scores[k] = float((between[keep] / within[keep]).sum()) if keep.any() else 0.0
    return StrategyScore(scores, _argmax(scores), info)


def cbed_score(state: TargetingState, cfg: HallucinationConfig | None = None) -> StrategyScore:
    """Mutual-information proxy: per candidate, sum over nodes of the
    entropy of the mixture of per-mask empirical marginals minus the mean
    per-mask entropy (a factored BALD-style bound), shared mask ensemble."""
    cfg = cfg or HallucinationConfig()
    model = state.model
    n = model.n
    info = {"cyclic_retries": 0, "pruned_edges": 0}
    drawn = []
    for _ in range(cfg.graphs):
        mask, stats = enco.acyclic_mask_from_uniforms(
            model, _draw_mask_block(state, cfg), state.enco_cfg
        )
        drawn.append(mask)
        info["cyclic_retries"] += stats["cyclic_retries"]
        info["pruned_edges"] += stats["pruned_edges"]
    masks = np.stack(drawn)

    def entropy(p: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, p * np.log(p), 0.0)
        return -terms.sum(axis=-1)

    scores = np.zeros(n)
    for k in range(n):
        _, values, _ = _hallucinated_ensemble(state, k, cfg, masks=masks)
        enc = model.one_hot(values).astype(np.float64)
        marginals = enc.mean(axis=1)  # (G, width) per-mask empirical marginals
        mi = 0.0
        for j in range(n):
            block = marginals[:, model.block(j)]
            mi += float(entropy(block.mean(axis=0)) - entropy(block).mean())
        scores[k] = mi
    return StrategyScore(scores, _argmax(scores), info)


# --- external chooser ------------------------------------------------------

class ExternalChannel(Protocol):
    def ask(self, info: dict) -> str:
        """Present round info, block until a reply arrives, return it."""

    def warn(self, message: str) -> None:
        """Surface a validation problem to the chooser."""


def next_external(state: TargetingState, channel: ExternalChannel) -> int:
    """Delegate the choice to an interactive channel; re-prompt on invalid
    names until a valid node name or index arrives."""
    names = state.node_names or [f"x{i}" for i in range(state.model.n)]
    beliefs = enco.edge_probabilities(state.model, state.enco_cfg)
    info = {
        "round": state.round,
        "node_names": list(names),
        "history": list(state.history),
        "edge_beliefs": beliefs.tolist(),
        "edges_over_half": int((beliefs > 0.5).sum()),
    }
    lower = {name.lower(): idx for idx, name in enumerate(names)}
    while True:
        reply = channel.ask(info).strip()
        if reply.lower() in lower:
            return lower[reply.lower()]
        try:
            idx = int(reply)
            if 0 <= idx < len(names):
                return idx
        except ValueError:
            pass
        channel.warn(f"unknown node {reply!r}; expected one of {', '.join(names)}")


def next_target(
    name: str,
    state: TargetingState,
    halluc_cfg: HallucinationConfig | None = None,
    channel: ExternalChannel | None = None,
) -> int:
    """Dispatch a registered strategy by name and return the chosen node."""
    if name == "random":
        return next_random(state)
    if name == "round_robin":
        return next_round_robin(state)
    if name == "degree_prob":
        return next_degree_prob(state)
    if name == "git":
        return git_score(state, halluc_cfg).chosen
    if name == "ait":
        return ait_score(state, halluc_cfg).chosen
    if name == "cbed":
        return cbed_score(state, halluc_cfg).chosen
    if name == "external":
        if channel is None:
            raise ValueError("external strategy needs a channel")
        return next_external(state, channel)
    raise ValueError(f"unknown strategy {name!r}")
