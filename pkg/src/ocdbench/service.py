"""HTTP session API over the online discovery loop.

Each session owns one :class:`~ocdbench.runner.OnlineRun`; an external
chooser (browser UI or scripted client) posts intervention targets round by
round, or hands remaining rounds to an automatic strategy.  Ground truth and
live metrics appear in responses only when the session was created with
``reveal_truth`` — study mode shows exactly what an automatic strategy
would see: beliefs, descriptions and its own history.
"""

from __future__ import annotations

import dataclasses
import json
import secrets
import shutil
import tempfile
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware

from .netio import load_descriptions
from .runner import OnlineRun, RunConfig, RunResult, SeedResult, write_results
from .strategies import STRATEGY_NAMES

AUTO_STRATEGIES = tuple(s for s in STRATEGY_NAMES if s != "external")

# interactive default: shallow refit schedule so an Asia round lands in
# seconds, overridable per session via the config payload
_SERVICE_ENCO = {
    "dist_iters_F": 150,
    "graph_iters_G": 25,
    "graph_samples_K": 25,
    "epochs": 5,
    "lr_gamma": 0.2,
    "lr_model": 1e-2,
}


class Session:
    def __init__(self, sid: str, run: OnlineRun, reveal_truth: bool):
        self.id = sid
        self.run = run
        self.reveal_truth = reveal_truth
        self.status = "fitting"
        self.error: str | None = None
        self.lock = threading.Lock()
        self.used_tokens: set[str] = set()
        self.fit_completed_at: float | None = None
        try:
            self.descriptions = load_descriptions(
                self.run.cfg.network, self.run.net
            ).entries
        except Exception:
            self.descriptions = {}

    def refresh_status(self) -> None:
        if self.status != "failed":
            self.status = "done" if self.run.done else "awaiting-choice"

    def state_view(self) -> dict:
        run = self.run
        view = {
            "id": self.id,
            "status": self.status,
            "round": run.round,
            "rounds_total": run.cfg.rounds_T,
            "batch_per_round": run.cfg.batch_per_round,
            "network": run.cfg.network,
            "node_names": run.net.node_names,
            "state_counts": [int(c) for c in run.net.state_counts],
            "descriptions": {k: v for k, v in self.descriptions.items()},
            "history": [run.net.node_names[t] for t in run.history],
            "beliefs": np.round(run.beliefs(), 6).tolist(),
            "fit_completed_at": self.fit_completed_at,
            "seed": run.seed,
        }
        if self.error is not None:
            view["error"] = self.error
        if self.reveal_truth:
            view["truth"] = run.truth.astype(int).tolist()
            view["metrics"] = run.metrics_now()
        return view


class SessionManager:
    def __init__(self, checkpoint_dir: str | Path | None = None, max_sessions: int = 16):
        self.sessions: dict[str, Session] = {}
        self.max_sessions = max_sessions
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.lock = threading.Lock()
        if self.checkpoint_dir:
            self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
            self._resume_all()

    # --- persistence -------------------------------------------------------

    def _session_dir(self, sid: str) -> Path | None:
        return self.checkpoint_dir / sid if self.checkpoint_dir else None

    def checkpoint(self, session: Session) -> None:
        sdir = self._session_dir(session.id)
        if sdir is None:
            return
        sdir.mkdir(parents=True, exist_ok=True)
        state = session.run.snapshot()
        meta = {
            "cfg": session.run.cfg.to_mapping(),
            "seed": session.run.seed,
            "reveal_truth": session.reveal_truth,
            "records": state["records"],
            "int_targets": state["int_targets"],
            "fitted_initial": state["fitted_initial"],
            "legit_schedule": state.get("legit_schedule"),
        }
        (sdir / "meta.json").write_text(json.dumps(meta), encoding="utf-8")
        (sdir / "model.bin").write_bytes(state["model"])
        if state["int_values"]:
            np.savez_compressed(sdir / "ints.npz", values=np.stack(state["int_values"]))
        else:
            (sdir / "ints.npz").unlink(missing_ok=True)

    def _resume_one(self, sdir: Path) -> None:
        meta = json.loads((sdir / "meta.json").read_text(encoding="utf-8"))
        cfg = RunConfig.from_mapping(meta["cfg"])
        run = OnlineRun(cfg, meta["seed"])
        state = {
            "model": (sdir / "model.bin").read_bytes(),
            "int_values": [],
            "int_targets": meta["int_targets"],
            "records": meta["records"],
            "fitted_initial": meta["fitted_initial"],
        }
        if (sdir / "ints.npz").exists():
            with np.load(sdir / "ints.npz") as data:
                state["int_values"] = list(data["values"])
        if meta.get("legit_schedule") is not None:
            state["legit_schedule"] = meta["legit_schedule"]
        run.restore(state)
        session = Session(sdir.name, run, meta["reveal_truth"])
        if run.fitted_initial:
            session.status = "done" if run.done else "awaiting-choice"
            session.fit_completed_at = time.time()
            self.sessions[session.id] = session
        else:
            self.sessions[session.id] = session
            self._spawn(session, self._do_initial_fit)

    def _resume_all(self) -> None:
        for sdir in sorted(self.checkpoint_dir.iterdir()):
            if (sdir / "meta.json").exists():
                try:
                    self._resume_one(sdir)
                except Exception:
                    continue  # unreadable checkpoints are skipped, not fatal

    # --- lifecycle ---------------------------------------------------------

    def _spawn(self, session: Session, fn, *args) -> None:
        threading.Thread(target=fn, args=(session, *args), daemon=True).start()

    def _do_initial_fit(self, session: Session) -> None:
        try:
            session.run.fit_initial()
            session.fit_completed_at = time.time()
            self.checkpoint(session)
            with session.lock:
                session.status = "awaiting-choice"
        except Exception as exc:
            with session.lock:
                session.status = "failed"
                session.error = f"{type(exc).__name__}: {exc}"

    def _do_round(self, session: Session, target: int) -> None:
        try:
            session.run.step(target)
            session.fit_completed_at = time.time()
            self.checkpoint(session)
            with session.lock:
                session.refresh_status()
        except Exception as exc:
            with session.lock:
                session.status = "failed"
                session.error = f"{type(exc).__name__}: {exc}"

    def _do_auto(self, session: Session, strategy: str, rounds: int) -> None:
        try:
            for _ in range(rounds):
                target = session.run.choose_target(strategy=strategy)
                session.run.step(target)
                session.fit_completed_at = time.time()
                self.checkpoint(session)
            with session.lock:
                session.refresh_status()
        except Exception as exc:
            with session.lock:
                session.status = "failed"
                session.error = f"{type(exc).__name__}: {exc}"

    def create(self, payload: dict) -> Session:
        if len(self.sessions) >= self.max_sessions:
            raise HTTPException(503, "session capacity exceeded")
        network = payload.get("network")
        if not network:
            raise HTTPException(422, "network name required")
        overrides = dict(payload.get("config") or {})
        seed = int(payload.get("seed", 0))
        enco = {**_SERVICE_ENCO, **(overrides.pop("enco", None) or {})}
        mapping = {
            "network": network,
            "strategy": "external",
            "seeds": [seed],
            "enco": enco,
            "round_epochs": overrides.pop("round_epochs", 1),
            **overrides,
        }
        try:
            cfg = RunConfig.from_mapping(mapping)
            run = OnlineRun(cfg, seed)
        except HTTPException:
            raise
        except Exception as exc:
            raise HTTPException(400, f"invalid session request: {exc}") from exc
        session = Session(secrets.token_hex(8), run, bool(payload.get("reveal_truth", False)))
        self.sessions[session.id] = session
        self._spawn(session, self._do_initial_fit)
        return session

    def get(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise HTTPException(404, f"unknown session {sid!r}")
        return session

    def post_intervention(self, sid: str, payload: dict) -> Session:
        session = self.get(sid)
        token = payload.get("token")
        with session.lock:
            if token and token in session.used_tokens:
                return session  # retry of an accepted request; budget untouched
            if session.status == "fitting":
                raise HTTPException(409, "session busy: fit in progress")
            if session.status == "done":
                raise HTTPException(409, "session done: round budget exhausted")
            if session.status == "failed":
                raise HTTPException(409, f"session failed: {session.error}")
            target = payload.get("target")
            if isinstance(target, str):
                try:
                    target = session.run.net.index_of(target)
                except KeyError:
                    raise HTTPException(422, f"unknown node {payload.get('target')!r}")
            if not isinstance(target, int) or not 0 <= target < session.run.net.n:
                raise HTTPException(422, "target must name a node of the network")
            if token:
                session.used_tokens.add(token)
            session.status = "fitting"
        self._spawn(session, self._do_round, target)
        return session

    def run_auto(self, sid: str, payload: dict) -> Session:
        session = self.get(sid)
        strategy = payload.get("strategy")
        if strategy not in AUTO_STRATEGIES:
            raise HTTPException(422, f"strategy must be one of {AUTO_STRATEGIES}")
        rounds = payload.get("rounds")
        if not isinstance(rounds, int) or rounds < 0:
            raise HTTPException(422, "rounds must be a non-negative integer")
        with session.lock:
            if session.status == "fitting":
                raise HTTPException(409, "session busy: fit in progress")
            if session.status == "failed":
                raise HTTPException(409, f"session failed: {session.error}")
            if rounds > session.run.remaining:
                raise HTTPException(422, f"only {session.run.remaining} rounds remain")
            if rounds == 0:
                return session
            session.status = "fitting"
        self._spawn(session, self._do_auto, strategy, rounds)
        return session

    def export(self, sid: str) -> dict:
        session = self.get(sid)
        run = session.run
        result = RunResult(
            cfg=run.cfg,
            per_seed=[SeedResult(seed=run.seed, records=list(run.records),
                                 final_beliefs=run.beliefs())],
        )
        tmp = Path(tempfile.mkdtemp(prefix="ocdbench_export_"))
        try:
            write_results(result, tmp, net=run.net)
            files = {}
            for path in sorted(tmp.rglob("*")):
                if not path.is_file():
                    continue
                rel = str(path.relative_to(tmp))
                if not session.reveal_truth and rel in ("rounds.csv", "summary.csv"):
                    continue  # metric columns stay hidden in study mode
                files[rel] = path.read_text(encoding="utf-8")
            return {"id": session.id, "files": files}
        finally:
            shutil.rmtree(tmp, ignore_errors=True)

    def drop(self, sid: str) -> None:
        self.sessions.pop(sid, None)
        sdir = self._session_dir(sid)
        if sdir and sdir.exists():
            shutil.rmtree(sdir, ignore_errors=True)


def create_app(checkpoint_dir: str | Path | None = None, max_sessions: int = 16) -> FastAPI:
    app = FastAPI(title="online causal discovery sessions")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    manager = SessionManager(checkpoint_dir=checkpoint_dir, max_sessions=max_sessions)
    app.state.manager = manager

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict = Body(...)):
        return manager.create(payload).state_view()

    @app.get("/sessions/{sid}")
    def get_state(sid: str):
        session = manager.get(sid)
        with session.lock:
            return session.state_view()

    @app.post("/sessions/{sid}/interventions")
    def post_intervention(sid: str, payload: dict = Body(...)):
        return manager.post_intervention(sid, payload).state_view()

    @app.post("/sessions/{sid}/auto")
    def run_auto(sid: str, payload: dict = Body(...)):
        return manager.run_auto(sid, payload).state_view()

    @app.get("/sessions/{sid}/export")
    def export(sid: str):
        return manager.export(sid)

    @app.delete("/sessions/{sid}", status_code=204)
    def drop(sid: str):
        manager.drop(sid)

    return app
