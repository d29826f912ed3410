"""Staged intervention targeting: a language-model warmup list, a
bootstrapped list drawn from still-isolated nodes, a double-selection
replay of both lists, then hand-off to a numerical base strategy.

Round arithmetic (rounds are 1-based; W = t_warmup, B = t_bootstrapped):
rounds 1..W serve the warmup list; round W+1 snapshots the isolated nodes
from the current beliefs, fills the bootstrapped list, and serves its
first entry; rounds W+2..W+B serve the rest; rounds W+B+1..2(W+B) replay
warmup then bootstrapped targets in order; later rounds delegate to the
base strategy.  Any missing list entry falls back to the base strategy
and is logged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import enco, strategies
from .graph import isolated_nodes
from .llm import LlmClient, PromptSpec, self_consistent_targets
from .netio import VariableDescriptions
from .strategies import HallucinationConfig, TargetingState

DATASET_DEFAULT_K = {"asia": 4, "child": 4, "insurance": 5, "alarm": 4}


@dataclass
class LegitConfig:
    t_warmup: int = 3
    t_bootstrapped: int = 2
    base_strategy: str = "git"
    belief_threshold: float = 0.5
    n_samples: int = 5

    def validate(self) -> None:
        if self.t_warmup < 1:
            raise ValueError("t_warmup must be at least 1")
        if self.t_bootstrapped < 0:
            raise ValueError("t_bootstrapped must be non-negative")
        if self.base_strategy not in strategies.STRATEGY_NAMES:
            raise ValueError(f"unknown base strategy {self.base_strategy!r}")
        if not 0.0 < self.belief_threshold < 1.0:
            raise ValueError("belief_threshold must lie strictly between 0 and 1")


@dataclass
class LegitSchedule:
    warmup_targets: list[int]
    bootstrapped_targets: list[int] | None = None
    isolated_snapshot: list[int] | None = None
    events: list[str] = field(default_factory=list)

    def replay_targets(self, cfg: LegitConfig) -> list[int]:
        boot = self.bootstrapped_targets or []
        return self.warmup_targets[: cfg.t_warmup] + boot[: cfg.t_bootstrapped]


def request_size(cfg: LegitConfig, dataset: str | None) -> int:
    """How many targets to ask for: enough to cover warmup plus
    bootstrapped stages, never below the dataset's customary ask."""
    base = DATASET_DEFAULT_K.get(dataset or "", 4)
    return max(cfg.t_warmup + cfg.t_bootstrapped, base)


def _fill_round_robin(chosen: list[int], k: int, n: int, events: list[str]) -> list[int]:
    if len(chosen) >= k:
        return chosen[:k]
    events.append(
        f"ranking supplied {len(chosen)} of {k} targets; filling round-robin"
    )
    out = list(chosen)
    for idx in range(n):
        if len(out) >= k:
            break
        if idx not in out:
            out.append(idx)
    return out[:k]


def plan_warmup(
    client: LlmClient,
    descs: VariableDescriptions,
    k: int,
    cfg: LegitConfig,
    node_order: list[str] | None = None,
    seed: int = 0,
    dataset: str | None = None,
    ask: int | None = None,
) -> tuple[list[int], list[str]]:
    """Self-consistent warmup ranking mapped to node indices; short
    rankings are completed round-robin over unchosen nodes.

    ``node_order`` defines what the returned indices mean; it defaults to
    the description-file order but engine callers pass the network order.
    """
    order = node_order or descs.node_names
    if sorted(order) != sorted(descs.node_names):
        raise ValueError("node_order must cover exactly the described variables")
    if k > len(order):
        raise ValueError("cannot request more targets than variables")
    spec = PromptSpec(
        descs.domain_blurb,
        list(descs.entries.items()),
        ask or request_size(cfg, dataset),
        "warmup",
    )
    result = self_consistent_targets(
        spec, client, order, n_samples=cfg.n_samples, seed=seed, fixture_dataset=dataset
    )
    events = list(result.diagnostics)
    chosen = [order.index(name) for name in result.ranking]
    return _fill_round_robin(chosen, k, len(order), events), events


def plan_bootstrapped(
    client: LlmClient,
    descs: VariableDescriptions,
    k: int,
    isolated: list[int],
    cfg: LegitConfig,
    node_order: list[str] | None = None,
    seed: int = 0,
    dataset: str | None = None,
) -> tuple[list[int], list[str]]:
    """Ranking restricted to currently isolated nodes.  An empty isolated
    set skips the stage; when every isolated node must be chosen anyway the
    call is answered without consulting the model."""
    if not isolated:
        return [], ["isolated set empty; bootstrapped stage skipped"]
    if len(isolated) <= k:
        return list(isolated), ["all isolated nodes required; no query issued"]
    order = node_order or descs.node_names
    restricted = [(order[i], descs.entries[order[i]]) for i in isolated]
    spec = PromptSpec(descs.domain_blurb, restricted, k, "bootstrapped")
    result = self_consistent_targets(
        spec,
        client,
        [name for name, _ in restricted],
        n_samples=cfg.n_samples,
        seed=seed,
        fixture_dataset=dataset,
    )
    events = list(result.diagnostics)
    chosen = [order.index(name) for name in result.ranking if order.index(name) in isolated]
    if len(chosen) < k:
        events.append(f"bootstrapped ranking supplied {len(chosen)} of {k}; filling from isolated set")
        for idx in isolated:
            if len(chosen) >= k:
                break
            if idx not in chosen:
                chosen.append(idx)
    return chosen[:k], events


class LegitOrchestrator:
    """Owns the schedule and resolves each round's target."""

    def __init__(
        self,
        cfg: LegitConfig,
        client: LlmClient,
        descs: VariableDescriptions,
        dataset: str | None = None,
        node_order: list[str] | None = None,
        halluc_cfg: HallucinationConfig | None = None,
        seed: int = 0,
    ):
        cfg.validate()
        self.cfg = cfg
        self.client = client
        self.descs = descs
        self.dataset = dataset
        self.node_order = node_order
        self.halluc_cfg = halluc_cfg or HallucinationConfig()
        self.seed = seed
        self.schedule: LegitSchedule | None = None

    def _ensure_warmup(self) -> LegitSchedule:
        if self.schedule is None:
            targets, events = plan_warmup(
                self.client,
                self.descs,
                self.cfg.t_warmup,
                self.cfg,
                node_order=self.node_order,
                seed=self.seed,
                dataset=self.dataset,
            )
            self.schedule = LegitSchedule(warmup_targets=targets, events=events)
        return self.schedule

    def _base(self, state: TargetingState, note: str | None = None) -> int:
        if note:
            self._ensure_warmup().events.append(note)
        return strategies.next_target(self.cfg.base_strategy, state, self.halluc_cfg)

    def next_target(self, state: TargetingState) -> int:
        """Resolve the target for ``state.round`` (1-based)."""
        cfg = self.cfg
        sched = self._ensure_warmup()
        rnd = state.round
        w, b = cfg.t_warmup, cfg.t_bootstrapped

        if rnd <= w:
            return sched.warmup_targets[rnd - 1]

        if sched.bootstrapped_targets is None:
            # snapshot once, with the beliefs fitted after round W
            beliefs = enco.edge_probabilities(state.model, state.enco_cfg)
            isolated = isolated_nodes(beliefs, cfg.belief_threshold)
            sched.isolated_snapshot = [int(i) for i in isolated]
            if b == 0:
                sched.bootstrapped_targets = []
                sched.events.append("t_bootstrapped is 0; bootstrapped stage skipped")
            else:
                targets, events = plan_bootstrapped(
                    self.client,
                    self.descs,
                    b,
                    sched.isolated_snapshot,
                    cfg,
                    node_order=self.node_order,
                    seed=self.seed,
                    dataset=self.dataset,
                )
                sched.bootstrapped_targets = targets
                sched.events.extend(events)

        if rnd <= w + b:
            boot_pos = rnd - w - 1
            if boot_pos < len(sched.bootstrapped_targets):
                return sched.bootstrapped_targets[boot_pos]
            return self._base(state, f"round {rnd}: bootstrapped list exhausted; base strategy used")

        staged = sched.replay_targets(cfg)
        if rnd <= 2 * (w + b):
            replay_pos = rnd - w - b - 1
            if replay_pos < len(staged):
                return staged[replay_pos]
            return self._base(state, f"round {rnd}: replay list exhausted; base strategy used")

        return self._base(state)


def stage_name(rnd: int, cfg: LegitConfig) -> str:
    w, b = cfg.t_warmup, cfg.t_bootstrapped
    if rnd <= w:
        return "warmup"
    if rnd <= w + b:
        return "bootstrapped"
    if rnd <= 2 * (w + b):
        return "replay"
    return "base"
