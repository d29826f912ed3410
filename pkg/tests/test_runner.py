"""Online loop: determinism, checkpoint resume, persistence, failure paths."""

import dataclasses
import hashlib

import numpy as np
import pytest
import yaml

from ocdbench import seeds
from ocdbench.enco import EncoConfig
from ocdbench.graph import load_matrix
from ocdbench.runner import (
    OnlineRun,
    RoundRecord,
    RunConfig,
    RunResult,
    SeedResult,
    SuiteError,
    belief_checksum,
    dataset_name,
    desk_config,
    desk_enco,
    load_run_config,
    run_online_discovery,
    run_suite,
    run_sweep,
    write_results,
)

TINY = EncoConfig(
    hidden_size=8, dist_iters_F=30, graph_iters_G=8, graph_samples_K=6,
    epochs=2, graph_obs_rows=24, graph_rows_per_target=8,
)


def tiny_cfg(**overrides) -> RunConfig:
    base = dict(
        network="chain3", strategy="round_robin", rounds_T=3,
        batch_per_round=8, obs_samples=200, seeds=[0, 1], enco=TINY,
        round_epochs=1,
    )
    base.update(overrides)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def chain_suite(chain3_net):
    return run_suite(tiny_cfg(), net=chain3_net)


# --- configuration ----------------------------------------------------------

def test_config_validation_catches_each_field():
    tiny_cfg().validate()
    bad = [
        dict(network=""), dict(strategy="quantum"), dict(rounds_T=0),
        dict(batch_per_round=0), dict(obs_samples=0), dict(seeds=[]),
        dict(refit="lukewarm"), dict(round_epochs=-1),
    ]
    for kwargs in bad:
        with pytest.raises(ValueError):
            tiny_cfg(**kwargs).validate()


def test_desk_config_presets():
    cfg = desk_config(network="asia", strategy="git")
    assert cfg.enco == desk_enco()
    assert cfg.round_epochs == 2
    custom = desk_config(enco=TINY, round_epochs=0)
    assert custom.enco == TINY and custom.round_epochs == 0


def test_config_mapping_round_trip():
    cfg = tiny_cfg()
    mapping = cfg.to_mapping()
    assert "legit" not in mapping  # None is omitted, not serialized
    assert RunConfig.from_mapping(mapping) == cfg
    with pytest.raises(ValueError, match="unknown config keys"):
        RunConfig.from_mapping({**mapping, "rounds": 5})


def test_load_run_config(tmp_path):
    cfg = tiny_cfg()
    path = tmp_path / "run.yaml"
    data = cfg.to_mapping()
    data["strategies"] = ["random", "git"]  # sweep key is the caller's business
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    assert load_run_config(path) == cfg

    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a\n- list\n", encoding="utf-8")
    with pytest.raises(ValueError, match="mapping"):
        load_run_config(bad)


def test_dataset_name():
    assert dataset_name("asia") == "asia"
    assert dataset_name("nets/custom.bif") == "custom"


def test_belief_checksum_is_plain_sha256():
    arr = np.array([[0.0, 0.25], [0.75, 0.0]])
    assert belief_checksum(arr) == hashlib.sha256(arr.tobytes()).hexdigest()


def test_round_record_key_excludes_wall_clock():
    a = RoundRecord(1, 2, 0.5, 3, 4, 0.5, "x")
    b = RoundRecord(1, 2, 99.0, 3, 4, 0.5, "x")
    assert a.key() == b.key()


# --- the online loop --------------------------------------------------------

def test_loop_produces_full_records(chain_suite):
    assert chain_suite.failed_seeds == []
    for sr in chain_suite.per_seed:
        assert [r.round for r in sr.records] == [1, 2, 3]
        for r in sr.records:
            assert 0 <= r.target < 3
            assert r.shd >= 0 and r.sid >= 0
            assert r.bsf is None or -1.0 <= r.bsf <= 1.0
            assert len(r.belief_sha256) == 64
        assert sr.final_beliefs.shape == (3, 3)
        assert sr.llm_network_calls == 0
    assert len(chain_suite.final_metric("shd")) == 2


def test_reruns_are_deterministic(chain3_net, chain_suite):
    again = run_suite(tiny_cfg(), net=chain3_net)
    for sr1, sr2 in zip(chain_suite.per_seed, again.per_seed):
        assert [r.key() for r in sr1.records] == [r.key() for r in sr2.records]
        np.testing.assert_array_equal(sr1.final_beliefs, sr2.final_beliefs)


def test_checkpoint_resume_matches_uninterrupted_run(chain3_net):
    cfg = tiny_cfg(rounds_T=4, seeds=[0])
    straight = run_online_discovery(cfg, 0, net=chain3_net)

    first = OnlineRun(cfg, 0, net=chain3_net)
    first.fit_initial()
    for _ in range(2):
        first.step(first.choose_target())
    state = first.snapshot()

    resumed = OnlineRun(cfg, 0, net=chain3_net)
    resumed.restore(state)
    assert resumed.round == 2 and not resumed.done
    while not resumed.done:
        resumed.step(resumed.choose_target())

    assert [r.key() for r in resumed.records] == [r.key() for r in straight.records]
    np.testing.assert_array_equal(resumed.beliefs(), straight.final_beliefs)


def test_cold_refit_also_deterministic(chain3_net):
    cfg = tiny_cfg(refit="cold", seeds=[0])
    a = run_online_discovery(cfg, 0, net=chain3_net)
    b = run_online_discovery(cfg, 0, net=chain3_net)
    assert not a.failed
    assert [r.key() for r in a.records] == [r.key() for r in b.records]


def test_sparsity_ramp_scales_round_refits_only(chain3_net, monkeypatch):
    from ocdbench import runner as runner_mod

    seen = []
    real_fit = runner_mod.fit

    def spy(model, obs, ints, cfg, seed):
        seen.append(cfg.lambda_sparse)
        return real_fit(model, obs, ints, cfg, seed)

    monkeypatch.setattr(runner_mod, "fit", spy)
    enco = dataclasses.replace(TINY, lambda_sparse=0.008, lambda_ramp_rounds=4)
    run = OnlineRun(tiny_cfg(rounds_T=4, seeds=[0], enco=enco), 0, net=chain3_net)
    run.fit_initial()
    while not run.done:
        run.step(run.choose_target())
    # full-strength initial fit, then a linear anneal over the first
    # lambda_ramp_rounds interventions
    assert seen == [0.008, 0.002, 0.004, 0.006, 0.008]


def test_step_guards(chain3_net):
    run = OnlineRun(tiny_cfg(), 0, net=chain3_net)
    with pytest.raises(RuntimeError, match="initial fit"):
        run.step(0)
    run.fit_initial()
    with pytest.raises(ValueError, match="out of range"):
        run.step(5)
    for _ in range(3):
        run.step(run.choose_target())
    assert run.done
    with pytest.raises(RuntimeError, match="budget"):
        run.step(0)


def test_observations_shared_across_strategies(chain3_net):
    a = OnlineRun(tiny_cfg(strategy="random"), 7, net=chain3_net)
    b = OnlineRun(tiny_cfg(strategy="round_robin"), 7, net=chain3_net)
    np.testing.assert_array_equal(a.obs.values, b.obs.values)
    c = OnlineRun(tiny_cfg(strategy="random"), 8, net=chain3_net)
    assert (a.obs.values != c.obs.values).any()


def test_intervention_stream_keyed_by_round_not_history(chain3_net):
    # same (seed, round) must draw from the same generator regardless of
    # which targets earlier rounds picked, or resume determinism breaks
    cfg = tiny_cfg(seeds=[0], rounds_T=2)
    a = OnlineRun(cfg, 0, net=chain3_net)
    a.fit_initial()
    a.step(0)
    a.step(1)
    b = OnlineRun(cfg, 0, net=chain3_net)
    b.fit_initial()
    b.step(2)
    b.step(1)
    np.testing.assert_array_equal(a.ints[1].values, b.ints[1].values)
    assert seeds.generator(0, seeds.INTERVENTION, 2).random() == pytest.approx(
        seeds.generator(0, seeds.INTERVENTION, 2).random()
    )


# --- suites, sweeps and failures --------------------------------------------

def test_external_without_channel_fails_softly(chain3_net):
    res = run_online_discovery(tiny_cfg(strategy="external"), 0, net=chain3_net)
    assert res.failed
    assert "channel" in res.error
    assert res.records == []

    with pytest.raises(SuiteError, match="all seeds failed"):
        run_suite(tiny_cfg(strategy="external"), net=chain3_net)


def test_run_sweep_covers_strategies(chain3_net):
    out = run_sweep(tiny_cfg(seeds=[0], rounds_T=2), ["random", "round_robin"], net=chain3_net)
    assert set(out) == {"random", "round_robin"}
    assert all(len(r.per_seed) == 1 for r in out.values())
    assert out["random"].cfg.strategy == "random"


def test_legit_runner_uses_fixture_warmup():
    cfg = RunConfig(
        network="asia", strategy="legit", rounds_T=2, batch_per_round=4,
        obs_samples=120, seeds=[0], enco=TINY, round_epochs=0,
    )
    res = run_online_discovery(cfg, 0)
    assert not res.failed, res.error
    # network order: asia tub smoke lung bronc either xray dysp;
    # fixture consensus starts smoke, asia
    assert [r.target for r in res.records] == [2, 0]
    assert res.llm_network_calls == 0


# --- persistence ------------------------------------------------------------

def test_write_results_layout_and_content(tmp_path, chain3_net, chain_suite):
    files = write_results(chain_suite, tmp_path, net=chain3_net)
    names = {f.name for f in files}
    assert {"config.echo", "rounds.csv", "timings.csv", "summary.csv", "targets_hist.csv"} <= names
    assert "failures.txt" not in names

    echoed = yaml.safe_load((tmp_path / "config.echo").read_text(encoding="utf-8"))
    assert RunConfig.from_mapping(echoed) == chain_suite.cfg

    rounds = (tmp_path / "rounds.csv").read_text(encoding="utf-8").splitlines()
    assert rounds[0] == "seed,round,target,shd,sid,bsf,belief_sha256"
    assert len(rounds) == 1 + 2 * 3
    for line in rounds[1:]:
        cells = line.split(",")
        assert cells[2] in chain3_net.node_names  # targets written as names

    timings = (tmp_path / "timings.csv").read_text(encoding="utf-8").splitlines()
    assert timings[0] == "seed,round,seconds"
    assert len(timings) == len(rounds)

    for sr in chain_suite.per_seed:
        beliefs = load_matrix(tmp_path / "final_graphs" / f"seed{sr.seed}_beliefs.csv")
        np.testing.assert_array_equal(beliefs, sr.final_beliefs)
        adj = load_matrix(tmp_path / "final_graphs" / f"seed{sr.seed}_adjacency.csv")
        assert adj.dtype == bool

    hist = (tmp_path / "targets_hist.csv").read_text(encoding="utf-8").splitlines()
    assert hist[0] == "window,node,count"
    assert all(line.startswith("1-3,") for line in hist[1:])  # single 5-round window
    assert sum(int(line.split(",")[2]) for line in hist[1:]) == 2 * 3


def test_summary_matches_population_stats(tmp_path, chain3_net, chain_suite):
    write_results(chain_suite, tmp_path, net=chain3_net)
    rows = (tmp_path / "summary.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0] == "strategy,metric,mean,std"
    parsed = {line.split(",")[1]: line.split(",") for line in rows[1:]}
    shds = chain_suite.final_metric("shd")
    assert float(parsed["shd"][2]) == pytest.approx(np.mean(shds))
    assert float(parsed["shd"][3]) == pytest.approx(np.std(shds))  # ddof=0


def test_rounds_csv_bytes_stable_across_reruns(tmp_path, chain3_net, chain_suite):
    again = run_suite(tiny_cfg(), net=chain3_net)
    write_results(chain_suite, tmp_path / "a", net=chain3_net)
    write_results(again, tmp_path / "b", net=chain3_net)
    assert (tmp_path / "a" / "rounds.csv").read_bytes() == (
        tmp_path / "b" / "rounds.csv"
    ).read_bytes()


def test_failed_seed_reported_in_files(tmp_path, chain3_net):
    ok = SeedResult(
        seed=0,
        records=[RoundRecord(1, 0, 0.1, 2, 1, None, "0" * 64)],
        final_beliefs=np.zeros((3, 3)),
    )
    broken = SeedResult(seed=1, records=[], failed=True, error="ValueError: boom")
    result = RunResult(cfg=tiny_cfg(), per_seed=[ok, broken])
    assert result.failed_seeds == [1]
    assert result.final_metric("bsf") == []  # None values are skipped

    files = write_results(result, tmp_path, net=chain3_net)
    fail_path = tmp_path / "failures.txt"
    assert fail_path in files
    assert "seed 1: ValueError: boom" in fail_path.read_text(encoding="utf-8")

    summary = (tmp_path / "summary.csv").read_text(encoding="utf-8")
    assert "failed_seeds,1" in summary
