import csv
import json
import math

import numpy as np
import pytest

from rhopomcpow import harness
from rhopomcpow.harness import (DigestMismatch, ExperimentConfig, RunRecord, emit_reports,
                                log_log_slope, pooled_stderr, replay, run_experiment,
                                summarize, summary_csv, timing_profile)
from rhopomcpow.model import ContractError


def tiny(**kw):
    base = dict(problem="light_dark", planners=["rho_pomcpow", "pomcpow"], budgets=[8],
                episodes=3, seed=11, max_depth=3, filter_particles=30)
    base.update(kw)
    return ExperimentConfig(**base)


def rec(planner, ret, ep=0):
    return RunRecord(planner, "1it", ep, ep, ret, 1, True, 0.0, 0.0, [0.001])


def test_stderr_formula():
    vals = [1.0, 4.0, -2.0, 7.5]
    rows = summarize([rec("p", v, i) for i, v in enumerate(vals)])
    x = np.array(vals)
    direct = math.sqrt(((x - x.mean()) ** 2).sum() / (len(x) - 1)) / math.sqrt(len(x))
    assert rows[0]["mean"] == pytest.approx(x.mean())
    assert rows[0]["stderr"] == pytest.approx(direct, rel=1e-12)
    assert rows[0]["n"] == 4


def test_single_episode_summary_is_that_return():
    rows = summarize([rec("p", 3.25)])
    assert rows[0]["mean"] == 3.25 and rows[0]["stderr"] == 0.0


def test_pooled_stderr():
    assert pooled_stderr(3.0, 4.0) == 5.0


def test_empty_guards(tmp_path):
    with pytest.raises(ContractError):
        summarize([])
    with pytest.raises(ContractError):
        emit_reports([], tmp_path)


def test_nonfinite_return_rejected():
    with pytest.raises(ContractError):
        rec("p", float("nan"))


def test_config_validation():
    with pytest.raises(ContractError):
        tiny(planners=["astar"])
    with pytest.raises(ContractError):
        tiny(problem="maze")
    with pytest.raises(ContractError):
        tiny(episodes=0)
    with pytest.raises(ContractError):
        tiny(budgets=[])
    with pytest.raises(ContractError):
        tiny(budgets=[{"label": "x"}])


def test_golden_columns(tmp_path):
    cfg = tiny(episodes=2)
    paths = emit_reports(run_experiment(cfg), tmp_path, cfg,
                         timings={"incremental": [0.1, 0.2]},
                         bounds=harness.visitation_bounds(t_values=(100,)))
    expect = {
        "summary": "planner,budget,mean,stderr,n",
        "records": "planner,budget,episode,seed,return,steps,terminated,initial_entropy,"
                   "terminal_entropy,plan_seconds_mean",
        "timings": "iteration,cumulative_seconds,variant",
        "bounds": "t,path,tau,N_observed,K_bound,floor_K,threshold_k,eligible,vacuous,pass",
    }
    for key, header in expect.items():
        assert paths[key].read_text().splitlines()[0] == header
    rows = list(csv.DictReader(paths["summary"].open()))
    assert [(r["planner"], r["budget"], r["n"]) for r in rows] == [
        ("rho_pomcpow", "8it", "2"), ("pomcpow", "8it", "2")]
    m = json.loads(paths["manifest"].read_text())
    assert m["episode_seeds"] == [11, 12] and m["deterministic"] is True


def test_replay_is_byte_identical(tmp_path):
    cfg = tiny()
    first = emit_reports(run_experiment(cfg), tmp_path / "a", cfg)
    again = replay(first["manifest"], tmp_path / "b")
    assert first["summary"].read_bytes() == again["summary"].read_bytes()


def test_workers_do_not_change_results():
    cfg = tiny()
    assert summary_csv(run_experiment(cfg, workers=1)) == summary_csv(run_experiment(cfg, workers=2))


def test_planners_share_environment_streams():
    recs = run_experiment(tiny(episodes=2))
    a = [r.initial_entropy for r in recs if r.planner == "pomcpow"]
    b = [r.initial_entropy for r in recs if r.planner == "rho_pomcpow"]
    assert a == b
    env, filt, _ = harness.episode_rngs(5)
    env2, filt2, _ = harness.episode_rngs(5)
    assert env.random() == env2.random() and filt.random() != env.random()


def test_objective_default_by_problem():
    assert tiny().resolved_objective() == "state"
    assert tiny(problem="active_localization",
                planners=["rho_pomcpow"]).resolved_objective() == "shaped"


def test_budget_labels():
    cfg = tiny(budgets=[100, {"seconds": 0.1}, {"iterations": 5, "label": "tiny"}])
    assert [cfg.budget_label(j) for j in range(3)] == ["100it", "0.1s", "tiny"]


def test_log_log_slope_recovers_power():
    t = np.arange(1, 1001)
    assert log_log_slope(t, 3.0 * t ** 2.0, 100, 1000) == pytest.approx(2.0, abs=1e-9)


def test_profile_single_iteration():
    res = timing_profile(iterations=1, fit_from=1)
    assert all(len(c) == 1 for c in res["curves"].values())
    assert res["digest_match"]


def test_profile_digest_mismatch_is_fatal(monkeypatch):
    real = harness.make_planner

    def skewed(model, config):
        if not config.incremental:
            config = type(config)(**{**config.__dict__, "max_depth": 1})
        return real(model, config)

    monkeypatch.setattr(harness, "make_planner", skewed)
    with pytest.raises(DigestMismatch, match="different trees"):
        timing_profile(iterations=50, variants=("incremental", "from_scratch"), repeats=1)


def test_profile_repeat_mismatch_is_fatal(monkeypatch):
    real = harness.make_planner
    calls = {"n": 0}

    def skewed(model, config):
        calls["n"] += 1
        if calls["n"] == 2:
            config = type(config)(**{**config.__dict__, "max_depth": 1})
        return real(model, config)

    monkeypatch.setattr(harness, "make_planner", skewed)
    with pytest.raises(DigestMismatch, match="repeated incremental"):
        timing_profile(iterations=50, variants=("incremental",), repeats=2)


def test_profile_takes_median_iteration(monkeypatch):
    cumulative = iter([[1.0, 3.0], [2.0, 3.0], [5.0, 9.0]])
    real = harness.make_planner

    def fake_times(model, config):
        planner = real(model, config)
        plan = planner.plan

        def timed_plan(root, rng):
            a = plan(root, rng)
            planner.iteration_times = next(cumulative)
            return a
        planner.plan = timed_plan
        return planner

    monkeypatch.setattr(harness, "make_planner", fake_times)
    res = timing_profile(iterations=2, variants=("pomcpow",), repeats=3, fit_from=2)
    # per-iteration times (1, 2), (2, 1), (5, 4) -> medians (2, 2)
    assert res["curves"]["pomcpow"] == pytest.approx([2.0, 4.0])
    assert res["repeats"] == {"pomcpow": 3}


def test_profile_rejects_zero_repeats():
    with pytest.raises(ContractError):
        timing_profile(iterations=1, repeats=0)


def test_shannon_and_boers_oracles_small():
    s = harness.shannon_oracle(n=300)
    assert s["max_abs_error"] <= 1e-9 and s["merges"] == 29
    b = harness.boers_oracle(n=200, every=50)
    assert b["max_rel_error"] <= 1e-8 and b["checks"] == 4
