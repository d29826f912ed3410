"""Command-line entry points: runs, sweeps, metrics, the HTTP service."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import runner
from .graph import load_matrix, threshold_graph
from .legit import LegitConfig
from .metrics import bsf, shd, sid
from .netio import fetch_network, load_network
from .runner import RunConfig, load_run_config


def _parse_seeds(text: str) -> list[int]:
    """Either a count ("5" -> seeds 0..4) or an explicit list ("0,3,7")."""
    if "," in text:
        return [int(part) for part in text.split(",") if part.strip()]
    return list(range(int(text)))


def _apply_run_flags(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    updates = {}
    if args.network is not None:
        updates["network"] = args.network
    if args.strategy is not None:
        updates["strategy"] = args.strategy
    if args.rounds is not None:
        updates["rounds_T"] = args.rounds
    if args.batch is not None:
        updates["batch_per_round"] = args.batch
    if args.obs is not None:
        updates["obs_samples"] = args.obs
    if args.seeds is not None:
        updates["seeds"] = _parse_seeds(args.seeds)
    if args.refit is not None:
        updates["refit"] = args.refit
    if args.round_epochs is not None:
        updates["round_epochs"] = args.round_epochs
    if args.out is not None:
        updates["output_dir"] = args.out
    cfg = dataclasses.replace(cfg, **updates)
    if args.llm_mode is not None:
        cfg.llm = dataclasses.replace(cfg.llm, mode=args.llm_mode)
    if args.warmup is not None or args.bootstrapped is not None:
        base = cfg.legit or LegitConfig()
        if args.warmup is not None:
            base = dataclasses.replace(base, t_warmup=args.warmup)
        if args.bootstrapped is not None:
            base = dataclasses.replace(base, t_bootstrapped=args.bootstrapped)
        cfg.legit = base
    cfg.validate()
    return cfg


def _cmd_run(args: argparse.Namespace) -> int:
    if args.config:
        cfg = load_run_config(args.config)
    elif args.scale == "paper":
        cfg = RunConfig()
    else:
        cfg = runner.desk_config()
    cfg = _apply_run_flags(cfg, args)
    result = runner.run_suite(cfg)
    out = cfg.output_dir or "results"
    runner.write_results(result, out)
    for row in runner.summary_rows(result):
        print(f"{row[0]},{row[1]},{row[2]:.4f},{row[3]:.4f}")
    print(f"results written to {out}", file=sys.stderr)
    return 1 if result.failed_seeds else 0


def _cmd_suite(args: argparse.Namespace) -> int:
    import yaml

    with open(args.config, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    strategies = raw.get("strategies") or [raw.get("strategy", "round_robin")]
    base = load_run_config(args.config)
    out_root = Path(args.out or base.output_dir or "results")
    combined = []
    for strategy in strategies:
        cfg = dataclasses.replace(base, strategy=strategy)
        cfg.validate()
        result = runner.run_suite(cfg)
        runner.write_results(result, out_root / strategy)
        combined += runner.summary_rows(result)
    runner.write_summary(out_root / "summary.csv", combined)
    for row in combined:
        print(f"{row[0]},{row[1]},{row[2]:.4f},{row[3]:.4f}")
    print(f"results written to {out_root}", file=sys.stderr)
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    net = load_network(args.truth)
    truth = net.adjacency()
    learned = load_matrix(args.learned)
    if learned.shape != truth.shape:
        print(f"shape mismatch: truth {truth.shape}, learned {learned.shape}", file=sys.stderr)
        return 2
    adj = threshold_graph(learned, args.tau).adj
    b = bsf(truth, adj)
    print("shd,sid,bsf")
    print(f"{shd(truth, adj)},{sid(truth, adj)},{'undefined' if b is None else format(b, '.6g')}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(checkpoint_dir=args.state_dir, max_sessions=args.max_sessions)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_fetch(args: argparse.Namespace) -> int:
    path = fetch_network(args.name, args.dest)
    print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocdbench",
        description="online causal discovery benchmark: run strategies, score graphs, serve sessions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="multi-seed run of one strategy")
    p_run.add_argument("--config", help="YAML run configuration to start from")
    p_run.add_argument(
        "--scale",
        choices=["desk", "paper"],
        default="desk",
        help="fit schedule when no --config given: desk (minutes) or the full reference protocol",
    )
    p_run.add_argument("--network", help="bundled name (asia/child/insurance/alarm) or .bif path")
    p_run.add_argument("--strategy", choices=runner.RUN_STRATEGIES)
    p_run.add_argument("--rounds", type=int)
    p_run.add_argument("--batch", type=int)
    p_run.add_argument("--obs", type=int)
    p_run.add_argument("--seeds", help="seed count ('5') or explicit list ('0,3,7')")
    p_run.add_argument("--llm-mode", choices=["live", "cached", "replay"])
    p_run.add_argument("--refit", choices=["cold", "warm"])
    p_run.add_argument("--round-epochs", type=int)
    p_run.add_argument("--warmup", type=int, help="LLM warmup rounds (legit)")
    p_run.add_argument("--bootstrapped", type=int, help="LLM bootstrapped rounds (legit)")
    p_run.add_argument("--out")
    p_run.set_defaults(fn=_cmd_run)

    p_suite = sub.add_parser("suite", help="multi-strategy sweep from a config file")
    p_suite.add_argument("--config", required=True)
    p_suite.add_argument("--out")
    p_suite.set_defaults(fn=_cmd_suite)

    p_metrics = sub.add_parser("metrics", help="score a learned matrix against a network")
    p_metrics.add_argument("--truth", required=True, help="bundled name or .bif path")
    p_metrics.add_argument("--learned", required=True, help="matrix CSV (beliefs or adjacency)")
    p_metrics.add_argument("--tau", type=float, default=0.5)
    p_metrics.set_defaults(fn=_cmd_metrics)

    p_serve = sub.add_parser("serve", help="HTTP session service")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--state-dir", default=None, help="checkpoint directory for resumable sessions")
    p_serve.add_argument("--max-sessions", type=int, default=16)
    p_serve.set_defaults(fn=_cmd_serve)

    p_fetch = sub.add_parser("fetch", help="download a network definition")
    p_fetch.add_argument("--name", required=True)
    p_fetch.add_argument("--dest", default="networks")
    p_fetch.set_defaults(fn=_cmd_fetch)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
