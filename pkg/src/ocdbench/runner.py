"""Multi-seed online discovery runs.

Configuration, the per-round acquisition loop, metric logging and result
persistence.  The :class:`OnlineRun` object owns a single seed's loop and is
driven either by :func:`run_online_discovery` (batch mode) or by the HTTP
service (interactive mode), so both paths produce identical records.
"""

from __future__ import annotations

import dataclasses
import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import seeds
from .enco import EncoConfig, edge_probabilities, fit, init_model
from .graph import save_matrix, threshold_graph
from .legit import LegitConfig, LegitOrchestrator
from .llm import EndpointConfig, LlmClient
from .metrics import bsf, shd, sid
from .netio import BayesNet, load_descriptions, load_network
from .scm import Dataset, sample_interventional, sample_observational
from .strategies import (
    STRATEGY_NAMES,
    HallucinationConfig,
    TargetingState,
    next_target,
)

RUN_STRATEGIES = STRATEGY_NAMES + ("legit",)


class SuiteError(RuntimeError):
    """Every seed of a suite failed."""


def desk_enco() -> EncoConfig:
    """Refit schedule sized for minutes-scale desk runs.

    EncoConfig's own defaults keep the reference protocol; this trades
    optimizer steps for a larger edge-logit rate so warm refits stay
    useful at a fraction of the budget.
    """
    return EncoConfig(
        dist_iters_F=150,
        graph_iters_G=25,
        graph_samples_K=25,
        epochs=5,
        lr_gamma=0.2,
        lr_model=1e-2,
    )


def desk_config(**overrides) -> "RunConfig":
    """RunConfig preset using the desk-scale fit schedule with two warm
    alternation epochs per round."""
    overrides.setdefault("enco", desk_enco())
    overrides.setdefault("round_epochs", 2)
    return RunConfig(**overrides)


def dataset_name(network: str) -> str:
    """Bare dataset label for a network reference (path stems kept)."""
    p = Path(network)
    return p.stem if p.suffix else network


@dataclass
class RunConfig:
    network: str = "asia"
    strategy: str = "round_robin"
    rounds_T: int = 33
    batch_per_round: int = 32
    obs_samples: int = 5000
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    enco: EncoConfig = field(default_factory=EncoConfig)
    legit: LegitConfig | None = None
    llm: EndpointConfig = field(default_factory=EndpointConfig)
    halluc: HallucinationConfig = field(default_factory=HallucinationConfig)
    refit: str = "warm"
    # warm refits may use fewer alternation epochs than the initial fit;
    # None keeps enco.epochs
    round_epochs: int | None = None
    output_dir: str | None = None

    def validate(self) -> None:
        if not self.network:
            raise ValueError("network reference required")
        if self.strategy not in RUN_STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {RUN_STRATEGIES}")
        if self.rounds_T < 1:
            raise ValueError("rounds_T must be at least 1")
        if self.batch_per_round < 1:
            raise ValueError("batch_per_round must be at least 1")
        if self.obs_samples < 1:
            raise ValueError("obs_samples must be at least 1")
        if not self.seeds:
            raise ValueError("at least one seed required")
        if self.refit not in ("cold", "warm"):
            raise ValueError("refit must be 'cold' or 'warm'")
        if self.round_epochs is not None and self.round_epochs < 0:
            raise ValueError("round_epochs must be non-negative")
        self.enco.validate()
        if self.legit is not None:
            self.legit.validate()
        self.llm.validate()

    def to_mapping(self) -> dict:
        out = dataclasses.asdict(self)
        if self.legit is None:
            out.pop("legit")
        return out

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key, sub in (("enco", EncoConfig), ("legit", LegitConfig),
                         ("llm", EndpointConfig), ("halluc", HallucinationConfig)):
            if isinstance(kwargs.get(key), dict):
                kwargs[key] = sub(**kwargs[key])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


def load_run_config(path: str | Path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a key/value mapping")
    data.pop("strategies", None)  # sweep list handled by the caller
    return RunConfig.from_mapping(data)


@dataclass(frozen=True)
class RoundRecord:
    round: int
    target: int
    seconds: float
    shd: int
    sid: int
    bsf: float | None
    belief_sha256: str

    def key(self) -> tuple:
        """Deterministic fields only; wall clock excluded on purpose."""
        return (self.round, self.target, self.shd, self.sid, self.bsf, self.belief_sha256)


@dataclass
class SeedResult:
    seed: int
    records: list[RoundRecord]
    final_beliefs: np.ndarray | None = None
    failed: bool = False
    error: str | None = None
    llm_network_calls: int = 0


@dataclass
class RunResult:
    cfg: RunConfig
    per_seed: list[SeedResult]

    @property
    def failed_seeds(self) -> list[int]:
        return [s.seed for s in self.per_seed if s.failed]

    def final_metric(self, name: str) -> list[float]:
        vals = []
        for s in self.per_seed:
            if s.failed or not s.records:
                continue
            v = getattr(s.records[-1], name)
            if v is not None:
                vals.append(float(v))
        return vals


def belief_checksum(beliefs: np.ndarray) -> str:
    return hashlib.sha256(
        np.ascontiguousarray(beliefs, dtype=np.float64).tobytes()
    ).hexdigest()


class OnlineRun:
    """One seed's online discovery loop.

    All randomness is drawn from generators freshly derived per (seed,
    stream, round), so a loop interrupted and resumed from a checkpoint
    continues byte-identically to an uninterrupted one.
    """

    def __init__(self, cfg: RunConfig, seed: int, net: BayesNet | None = None):
        cfg.validate()
        self.cfg = cfg
        self.seed = int(seed)
        self.net = net if net is not None else load_network(cfg.network)
        self.truth = self.net.adjacency()
        self.obs = sample_observational(
            self.net, cfg.obs_samples, seeds.generator(self.seed, seeds.OBS)
        )
        self.model = self._fresh_model()
        self.ints: list[Dataset] = []
        self.history: list[int] = []
        self.records: list[RoundRecord] = []
        self.fitted_initial = False
        self.llm_client: LlmClient | None = None
        self.orchestrator: LegitOrchestrator | None = None
        if cfg.strategy == "legit":
            name = dataset_name(cfg.network)
            descs = load_descriptions(name, self.net)
            self.llm_client = LlmClient(cfg.llm)
            self.orchestrator = LegitOrchestrator(
                cfg.legit or LegitConfig(),
                self.llm_client,
                descs,
                dataset=name,
                node_order=self.net.node_names,
                halluc_cfg=cfg.halluc,
                seed=seeds.derive_int(self.seed, seeds.SHUFFLE),
            )

    def _fresh_model(self):
        return init_model(
            self.net.state_counts, self.cfg.enco, seeds.derive_int(self.seed, seeds.INIT)
        )

    @property
    def round(self) -> int:
        """Completed rounds."""
        return len(self.records)

    @property
    def remaining(self) -> int:
        return self.cfg.rounds_T - self.round

    @property
    def done(self) -> bool:
        return self.round >= self.cfg.rounds_T

    def beliefs(self) -> np.ndarray:
        return edge_probabilities(self.model, self.cfg.enco)

    def metrics_now(self) -> dict:
        learned = threshold_graph(self.beliefs()).adj
        return {
            "shd": shd(self.truth, learned),
            "sid": sid(self.truth, learned),
            "bsf": bsf(self.truth, learned),
        }

    def fit_initial(self) -> None:
        fit(self.model, self.obs, [], self.cfg.enco, seeds.derive_int(self.seed, seeds.FIT, 0))
        self.fitted_initial = True

    def choose_target(self, channel=None, strategy: str | None = None) -> int:
        """Next target under the configured strategy, or an override name
        (used by the service's auto mode)."""
        rnd = self.round + 1
        state = TargetingState(
            round=rnd,
            model=self.model,
            history=list(self.history),
            rng=seeds.generator(self.seed, seeds.STRATEGY, rnd),
            net_ref=self.net,
            enco_cfg=self.cfg.enco,
            node_names=self.net.node_names,
        )
        if strategy is not None:
            return next_target(strategy, state, halluc_cfg=self.cfg.halluc, channel=channel)
        if self.orchestrator is not None:
            return self.orchestrator.next_target(state)
        return next_target(self.cfg.strategy, state, halluc_cfg=self.cfg.halluc, channel=channel)

    def step(self, target: int) -> RoundRecord:
        if not self.fitted_initial:
            raise RuntimeError("initial fit required before interventions")
        if self.done:
            raise RuntimeError("round budget exhausted")
        if not 0 <= target < self.net.n:
            raise ValueError(f"target {target} out of range for {self.net.n} nodes")
        t0 = time.perf_counter()
        rnd = self.round + 1
        batch = sample_interventional(
            self.net,
            target,
            self.cfg.batch_per_round,
            seeds.generator(self.seed, seeds.INTERVENTION, rnd),
        )
        self.ints.append(batch)
        self.history.append(target)
        if self.cfg.refit == "cold":
            self.model = self._fresh_model()
            refit_cfg = self.cfg.enco
        elif self.cfg.round_epochs is not None:
            refit_cfg = dataclasses.replace(self.cfg.enco, epochs=self.cfg.round_epochs)
        else:
            refit_cfg = self.cfg.enco
        ramp = self.cfg.enco.lambda_ramp_rounds
        if ramp > 0 and rnd < ramp:
            lam = self.cfg.enco.lambda_sparse * (rnd / ramp)
            refit_cfg = dataclasses.replace(refit_cfg, lambda_sparse=lam)
        fit(self.model, self.obs, self.ints, refit_cfg, seeds.derive_int(self.seed, seeds.FIT, rnd))
        beliefs = self.beliefs()
        learned = threshold_graph(beliefs).adj
        record = RoundRecord(
            round=rnd,
            target=int(target),
            seconds=time.perf_counter() - t0,
            shd=shd(self.truth, learned),
            sid=sid(self.truth, learned),
            bsf=bsf(self.truth, learned),
            belief_sha256=belief_checksum(beliefs),
        )
        self.records.append(record)
        return record

    def network_calls(self) -> int:
        return self.llm_client.network_calls if self.llm_client is not None else 0

    # checkpoint support for the HTTP service

    def snapshot(self) -> dict:
        state = {
            "model": self.model.save_bytes(),
            "int_values": [d.values for d in self.ints],
            "int_targets": [int(d.targets[0]) for d in self.ints],
            "records": [dataclasses.asdict(r) for r in self.records],
            "fitted_initial": self.fitted_initial,
        }
        if self.orchestrator is not None and self.orchestrator.schedule is not None:
            state["legit_schedule"] = dataclasses.asdict(self.orchestrator.schedule)
        return state

    def restore(self, state: dict) -> None:
        from .enco import EncoModel
        from .legit import LegitSchedule

        self.model = EncoModel.load(state["model"])
        self.ints = [
            Dataset.interventional(vals, tgt)
            for vals, tgt in zip(state["int_values"], state["int_targets"])
        ]
        self.records = [RoundRecord(**r) for r in state["records"]]
        self.history = [r.target for r in self.records]
        self.fitted_initial = bool(state["fitted_initial"])
        if self.orchestrator is not None and "legit_schedule" in state:
            self.orchestrator.schedule = LegitSchedule(**state["legit_schedule"])


def run_online_discovery(
    cfg: RunConfig,
    seed: int,
    net: BayesNet | None = None,
    channel=None,
) -> SeedResult:
    """Run one seed end to end; failures keep partial records."""
    run = OnlineRun(cfg, seed, net=net)
    try:
        run.fit_initial()
        while not run.done:
            run.step(run.choose_target(channel))
    except Exception as exc:
        return SeedResult(
            seed=seed,
            records=run.records,
            final_beliefs=run.beliefs(),
            failed=True,
            error=f"{type(exc).__name__}: {exc}",
            llm_network_calls=run.network_calls(),
        )
    return SeedResult(
        seed=seed,
        records=run.records,
        final_beliefs=run.beliefs(),
        llm_network_calls=run.network_calls(),
    )


def run_suite(cfg: RunConfig, net: BayesNet | None = None) -> RunResult:
    cfg.validate()
    per_seed = [run_online_discovery(cfg, s, net=net) for s in cfg.seeds]
    if all(s.failed for s in per_seed):
        detail = "; ".join(f"seed {s.seed}: {s.error}" for s in per_seed)
        raise SuiteError(f"all seeds failed: {detail}")
    return RunResult(cfg=cfg, per_seed=per_seed)


def run_sweep(base_cfg: RunConfig, strategies: list[str], net: BayesNet | None = None) -> dict[str, RunResult]:
    out = {}
    for strategy in strategies:
        cfg = dataclasses.replace(base_cfg, strategy=strategy)
        out[strategy] = run_suite(cfg, net=net)
    return out


# --- persistence -----------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def summary_rows(result: RunResult) -> list[tuple[str, str, float, float]]:
    """(strategy, metric, mean, std) per final-round metric; population std."""
    rows = []
    for metric in ("shd", "sid", "bsf"):
        vals = result.final_metric(metric)
        if vals:
            rows.append((result.cfg.strategy, metric, float(np.mean(vals)), float(np.std(vals))))
    if result.failed_seeds:
        rows.append((result.cfg.strategy, "failed_seeds", float(len(result.failed_seeds)), 0.0))
    return rows


def write_summary(path: Path, rows: list[tuple[str, str, float, float]]) -> None:
    lines = ["strategy,metric,mean,std"]
    lines += [f"{s},{m},{_fmt(mean)},{_fmt(std)}" for s, m, mean, std in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_results(result: RunResult, out_dir: str | Path, net: BayesNet | None = None) -> list[Path]:
    """Persist a suite: config echo, per-round rows, timings, final graphs,
    summary and the per-window target histogram.

    rounds.csv carries only fields that are deterministic for a (config,
    seed) pair; wall-clock seconds live in timings.csv.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if net is None:
        net = load_network(result.cfg.network)
    written = []

    echo = out / "config.echo"
    echo.write_text(yaml.safe_dump(result.cfg.to_mapping(), sort_keys=True), encoding="utf-8")
    written.append(echo)

    rounds = ["seed,round,target,shd,sid,bsf,belief_sha256"]
    timings = ["seed,round,seconds"]
    for sr in result.per_seed:
        for r in sr.records:
            name = net.node_names[r.target]
            rounds.append(
                f"{sr.seed},{r.round},{name},{r.shd},{r.sid},{_fmt(r.bsf)},{r.belief_sha256}"
            )
            timings.append(f"{sr.seed},{r.round},{r.seconds:.6f}")
    rounds_path = out / "rounds.csv"
    rounds_path.write_text("\n".join(rounds) + "\n", encoding="utf-8")
    written.append(rounds_path)
    timings_path = out / "timings.csv"
    timings_path.write_text("\n".join(timings) + "\n", encoding="utf-8")
    written.append(timings_path)

    graphs_dir = out / "final_graphs"
    graphs_dir.mkdir(exist_ok=True)
    for sr in result.per_seed:
        if sr.final_beliefs is None:
            continue
        bpath = graphs_dir / f"seed{sr.seed}_beliefs.csv"
        apath = graphs_dir / f"seed{sr.seed}_adjacency.csv"
        save_matrix(bpath, sr.final_beliefs)
        save_matrix(apath, threshold_graph(sr.final_beliefs).adj)
        written += [bpath, apath]

    summary_path = out / "summary.csv"
    write_summary(summary_path, summary_rows(result))
    written.append(summary_path)

    hist = ["window,node,count"]
    counts: dict[tuple[int, int], int] = {}
    for sr in result.per_seed:
        for r in sr.records:
            start = ((r.round - 1) // 5) * 5 + 1
            counts[(start, r.target)] = counts.get((start, r.target), 0) + 1
    for (start, target), c in sorted(counts.items()):
        end = min(start + 4, result.cfg.rounds_T)
        hist.append(f"{start}-{end},{net.node_names[target]},{c}")
    hist_path = out / "targets_hist.csv"
    hist_path.write_text("\n".join(hist) + "\n", encoding="utf-8")
    written.append(hist_path)

    if result.failed_seeds:
        fail_path = out / "failures.txt"
        fail_path.write_text(
            "\n".join(
                f"seed {s.seed}: {s.error}" for s in result.per_seed if s.failed
            ) + "\n",
            encoding="utf-8",
        )
        written.append(fail_path)
    return written
