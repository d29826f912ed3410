#!/usr/bin/env python3
"""Record service fixtures for the UI test suite.

Drives the real HTTP app in-process and freezes the exact JSON bodies the
browser would see, so the vitest suite runs hermetically. The round-robin
recording is cross-checked against the batch runner before anything is
written: the fixture ships with proof that replaying it means replaying
the engine.
"""

import json
import sys
import time
from pathlib import Path
from types import SimpleNamespace

from fastapi.testclient import TestClient

from ocdbench import seeds
from ocdbench.netio import load_network
from ocdbench.runner import RunConfig, run_suite, write_results
from ocdbench.service import _SERVICE_ENCO, create_app
from ocdbench.strategies import TargetingState, next_round_robin

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

TINY_ENCO = {
    "hidden_size": 8, "dist_iters_F": 30, "graph_iters_G": 8,
    "graph_samples_K": 6, "epochs": 2, "graph_obs_rows": 24,
    "graph_rows_per_target": 8,
}
RR_SHARED = {"rounds_T": 4, "batch_per_round": 8, "obs_samples": 400}

# heavier profile so the strong asia edges actually light up in the view
VIEW_ENCO = {
    "hidden_size": 24, "epochs": 30, "dist_iters_F": 300,
    "graph_iters_G": 50, "graph_samples_K": 16, "graph_obs_rows": 48,
    "graph_rows_per_target": 16, "dist_mix_interventional": True,
    "lr_gamma": 0.5, "lr_theta": 1.0, "lambda_sparse": 0.005,
    "weight_decay": 1e-3,
}


def wait_settled(client, sid, timeout=300.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        view = client.get(f"/sessions/{sid}").json()
        if view["status"] == "failed":
            raise RuntimeError(f"session failed: {view.get('error')}")
        if view["status"] != "fitting":
            return view
        time.sleep(0.05)
    raise RuntimeError("timed out waiting for fit")


def record_round_robin(client, tmp_out):
    create_request = {
        "network": "asia", "seed": 0, "reveal_truth": True,
        "config": {**RR_SHARED, "enco": TINY_ENCO},
    }
    view = client.post("/sessions", json=create_request).json()
    sid = view["id"]
    states = [wait_settled(client, sid)]
    steps = []
    names = states[0]["node_names"]
    while states[-1]["status"] != "done":
        view = states[-1]
        state = TargetingState(
            round=view["round"] + 1,
            model=SimpleNamespace(n=len(names)),
            history=[names.index(h) for h in view["history"]],
            rng=seeds.generator(view["seed"], seeds.STRATEGY, view["round"] + 1),
        )
        target = names[next_round_robin(state)]
        resp = client.post(f"/sessions/{sid}/interventions", json={"target": target})
        assert resp.status_code == 200, resp.text
        steps.append({"target": target})
        states.append(wait_settled(client, sid))
    export = client.get(f"/sessions/{sid}/export").json()

    # proof of parity: the recording equals a batch round-robin run
    cfg = RunConfig.from_mapping({
        "network": "asia", "strategy": "round_robin", "seeds": [0],
        "round_epochs": 1, "enco": {**_SERVICE_ENCO, **TINY_ENCO}, **RR_SHARED,
    })
    net = load_network("asia")
    write_results(run_suite(cfg, net=net), tmp_out, net=net)
    runner_rounds = (tmp_out / "rounds.csv").read_text(encoding="utf-8")
    if export["files"]["rounds.csv"] != runner_rounds:
        raise SystemExit("recorded session diverges from the batch runner")

    # auto mode must land on the same records as the manual drive
    auto_req = dict(create_request, seed=0)
    aview = client.post("/sessions", json=auto_req).json()
    wait_settled(client, aview["id"])
    client.post(f"/sessions/{aview['id']}/auto",
                json={"strategy": "round_robin", "rounds": RR_SHARED["rounds_T"]})
    wait_settled(client, aview["id"])
    aexport = client.get(f"/sessions/{aview['id']}/export").json()
    if aexport["files"]["rounds.csv"] != runner_rounds:
        raise SystemExit("auto-mode session diverges from the batch runner")

    return {
        "create_request": create_request,
        "states": states,
        "steps": steps,
        "export": export,
        "runner_rounds_csv": runner_rounds,
    }


def record_views(client):
    # observational data alone cannot orient smoke->bronc (Markov
    # equivalence); a couple of do(smoke)/do(either) rounds settle it
    out = {}
    for label, reveal in (("study", False), ("truth", True)):
        req = {
            "network": "asia", "seed": 0, "reveal_truth": reveal,
            "config": {"rounds_T": 2, "batch_per_round": 64,
                       "obs_samples": 5000, "round_epochs": 12,
                       "enco": VIEW_ENCO},
        }
        view = client.post("/sessions", json=req).json()
        sid = view["id"]
        wait_settled(client, sid, timeout=600)
        for target in ("smoke", "either"):
            resp = client.post(f"/sessions/{sid}/interventions",
                               json={"target": target})
            assert resp.status_code == 200, resp.text
            wait_settled(client, sid, timeout=600)
        out[label] = client.get(f"/sessions/{sid}").json()
    names = out["study"]["node_names"]
    smoke, bronc = names.index("smoke"), names.index("bronc")
    belief = out["study"]["beliefs"][smoke][bronc]
    if belief <= 0.9:
        raise SystemExit(f"smoke->bronc belief only {belief}; view fixture too weak")
    assert "truth" not in out["study"] and "metrics" not in out["study"]
    assert "truth" in out["truth"] and "metrics" in out["truth"]
    return out


def main():
    import tempfile

    OUT.mkdir(parents=True, exist_ok=True)
    with TestClient(create_app()) as client:
        with tempfile.TemporaryDirectory() as tmp:
            rr = record_round_robin(client, Path(tmp))
        views = record_views(client)
    (OUT / "asia_round_robin.json").write_text(
        json.dumps(rr, indent=1), encoding="utf-8")
    (OUT / "asia_study_view.json").write_text(
        json.dumps(views["study"], indent=1), encoding="utf-8")
    (OUT / "asia_truth_view.json").write_text(
        json.dumps(views["truth"], indent=1), encoding="utf-8")
    print("fixtures written to", OUT)
    smoke_bronc = views["study"]["beliefs"][
        views["study"]["node_names"].index("smoke")
    ][views["study"]["node_names"].index("bronc")]
    print(f"smoke->bronc study belief: {smoke_bronc}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
