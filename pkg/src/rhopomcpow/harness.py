"""Experiment runner: episodes, summary statistics, timing profiles, bound checks
and the incremental-vs-batch oracle sweeps. Everything is written as CSV/JSON.

Seeding rule: episode ``i`` of an experiment with master seed ``S`` uses seed
``S + i``; that seed's ``SeedSequence`` is split into independent streams for
the environment, the agent's particle filter and the planner. Every planner and
budget therefore faces the same true initial states and environment noise.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
import csv
import io
import json
import math
import os
from pathlib import Path
import time

import numpy as np

from . import __version__, kernels
from ._accel import backend_name
from .belief import WeightedParticleBelief, filter_step
from .entropy import EntropyCache, boers_batch, boers_update, shannon_update
from .envs import PROBLEMS, SyntheticDepthTwo, load_problem
from .model import ContractError
from .planner import PLANNERS, PlannerConfig, make_planner, tuned_config
from .select import AugerParams, check_visitation_bounds, params_from_dict
from .tree import BeliefTree, full_recompute_q, full_recompute_v, lvu_update_q, lvu_update_v

SUMMARY_COLUMNS = ["planner", "budget", "mean", "stderr", "n"]
RECORD_COLUMNS = ["planner", "budget", "episode", "seed", "return", "steps", "terminated",
                  "initial_entropy", "terminal_entropy", "plan_seconds_mean"]
TIMING_COLUMNS = ["iteration", "cumulative_seconds", "variant"]
BOUND_COLUMNS = ["t", "path", "tau", "N_observed", "K_bound", "floor_K", "threshold_k",
                 "eligible", "vacuous", "pass"]


class DigestMismatch(RuntimeError):
    """Paired timing runs grew different trees, so their timings are not comparable."""


def episode_rngs(seed: int):
    env, filt, plan = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(env), np.random.default_rng(filt), np.random.default_rng(plan)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    problem: str | dict
    planners: list
    budgets: list
    episodes: int = 100
    seed: int = 0
    out: str = "results"
    incremental: bool = True
    filter_particles: int = 200
    max_depth: int = 20
    objective: str | None = None  # "state" or "shaped"; default depends on the problem

    def __post_init__(self):
        if self.episodes < 1:
            raise ContractError("episodes must be >= 1")
        if not self.budgets:
            raise ContractError("budgets must be non-empty")
        if not self.planners:
            raise ContractError("planners must be non-empty")
        self.planners = [p if isinstance(p, dict) else {"planner": p} for p in self.planners]
        for p in self.planners:
            if p.get("planner") not in PLANNERS:
                raise ContractError(f"unknown planner {p.get('planner')!r}; choose from {PLANNERS}")
        self.budgets = [b if isinstance(b, dict) else {"iterations": int(b)} for b in self.budgets]
        for b in self.budgets:
            if "iterations" not in b and "seconds" not in b:
                raise ContractError(f"budget {b} needs 'iterations' or 'seconds'")
        if self.objective not in (None, "state", "shaped"):
            raise ContractError(f"objective must be 'state' or 'shaped', got {self.objective!r}")
        self.model()  # fails early on a bad problem id or map

    def model(self):
        if isinstance(self.problem, str) and self.problem not in PROBLEMS \
                and not Path(self.problem).exists():
            raise ContractError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        return load_problem(self.problem)

    @property
    def problem_id(self) -> str:
        return self.model().name

    def resolved_objective(self) -> str:
        if self.objective:
            return self.objective
        return "shaped" if self.problem_id == "active_localization" else "state"

    def planner_label(self, i: int) -> str:
        p = self.planners[i]
        return p.get("label", p["planner"])

    def budget_label(self, j: int) -> str:
        b = self.budgets[j]
        if "label" in b:
            return str(b["label"])
        return f"{b['iterations']}it" if "iterations" in b else f"{b['seconds']}s"

    def planner_config(self, i: int, j: int) -> PlannerConfig:
        p = dict(self.planners[i])
        p.pop("label", None)
        pid = p.pop("planner")
        b = self.budgets[j]
        kw = {"max_depth": self.max_depth, "incremental": self.incremental,
              "iterations": b.get("iterations"), "time_budget": b.get("seconds")}
        if "selection" in p:
            p["selection"] = params_from_dict(p["selection"])
        kw.update(p)
        return tuned_config(pid, self.problem_id, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if "config" in d and "episode_seeds" in d:  # a manifest
            d = d["config"]
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class RunRecord:
    planner: str
    budget: str
    episode: int
    seed: int
    ret: float
    steps: int
    terminated: bool
    initial_entropy: float
    terminal_entropy: float
    plan_seconds: list = field(default_factory=list)

    def __post_init__(self):
        if not math.isfinite(self.ret):
            raise ContractError(f"episode {self.episode} return is not finite")

    def row(self) -> dict:
        return {"planner": self.planner, "budget": self.budget, "episode": self.episode,
                "seed": self.seed, "return": repr(float(self.ret)), "steps": self.steps,
                "terminated": int(self.terminated),
                "initial_entropy": repr(float(self.initial_entropy)),
                "terminal_entropy": repr(float(self.terminal_entropy)),
                "plan_seconds_mean": f"{np.mean(self.plan_seconds):.6f}"}


# --------------------------------------------------------------------------
# episodes
# --------------------------------------------------------------------------

def run_episode(model, pcfg: PlannerConfig, seed: int, filter_particles: int = 200,
                objective: str = "state", planner_label: str = "", budget_label: str = "",
                episode: int = 0) -> RunRecord:
    """Closed-loop episode: plan from the agent's particle filter, act, filter."""
    env_rng, filt_rng, plan_rng = episode_rngs(seed)
    s = model.sample_initial_state(env_rng)
    parts = model.initial_belief(filt_rng, filter_particles).active_states().copy()
    h0 = model.initial_entropy()
    h = h0
    lam = model.shaping_weight if pcfg.shaping_weight is None else pcfg.shaping_weight
    total = 0.0
    disc = 1.0
    times = []
    steps = 0
    terminated = False
    for _ in range(model.step_cap):
        root = WeightedParticleBelief.from_particles(parts)
        planner = make_planner(model, pcfg)
        t0 = time.perf_counter()
        a = planner.plan(root, plan_rng)
        times.append(time.perf_counter() - t0)
        s, o, r, terminated = model.step(s, a, env_rng)
        parts, h_post, _ = filter_step(model, parts, a, o, filt_rng)
        if objective == "shaped":
            r += lam * (h - h_post)
        h = h_post
        total += disc * r
        disc *= model.discount
        steps += 1
        if terminated:
            break
    return RunRecord(planner_label, budget_label, episode, seed, total, steps, terminated,
                     h0, h, times)


def _episode_task(args):
    cfg_dict, i, j, ep = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    return run_episode(cfg.model(), cfg.planner_config(i, j), cfg.seed + ep,
                       cfg.filter_particles, cfg.resolved_objective(), cfg.planner_label(i),
                       cfg.budget_label(j), ep)


def run_experiment(cfg: ExperimentConfig, workers: int = 1, progress=None) -> list:
    """All (planner, budget, episode) runs; the record order never depends on workers."""
    cfg_dict = cfg.to_dict()
    tasks = [(cfg_dict, i, j, ep) for i in range(len(cfg.planners))
             for j in range(len(cfg.budgets)) for ep in range(cfg.episodes)]
    if workers <= 1:
        records = []
        for t in tasks:
            records.append(_episode_task(t))
            if progress:
                progress(len(records), len(tasks))
        return records
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_episode_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))


def summarize(records: list) -> list:
    """Mean and standard error (sample sd / sqrt(n)) per (planner, budget), in first-seen order."""
    if not records:
        raise ContractError("no records to summarize")
    groups = {}
    for r in records:
        groups.setdefault((r.planner, r.budget), []).append(r.ret)
    rows = []
    for (planner, budget), vals in groups.items():
        x = np.array(vals, dtype=float)
        se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
        rows.append({"planner": planner, "budget": budget, "mean": float(x.mean()),
                     "stderr": se, "n": len(x)})
    return rows


def pooled_stderr(se_a: float, se_b: float) -> float:
    return math.sqrt(se_a ** 2 + se_b ** 2)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r[c] for c in columns})
    return buf.getvalue()


def summary_csv(records) -> str:
    rows = [{**r, "mean": repr(r["mean"]), "stderr": repr(r["stderr"])}
            for r in summarize(records)]
    return _csv_text(SUMMARY_COLUMNS, rows)


def emit_reports(records, out_dir, config: ExperimentConfig | None = None,
                 timings=None, bounds=None) -> dict:
    """Write summary.csv, records.csv, manifest.json and optional timings/bounds CSVs."""
    if not records:
        raise ContractError("refusing to write reports for an empty record set")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"summary": out / "summary.csv", "records": out / "records.csv"}
    paths["summary"].write_text(summary_csv(records))
    paths["records"].write_text(_csv_text(RECORD_COLUMNS, [r.row() for r in records]))
    if timings:
        paths["timings"] = write_timings(timings, out)
    if bounds:
        paths["bounds"] = write_bounds(bounds, out)
    if config is not None:
        paths["manifest"] = write_manifest(config, out)
    return paths


def write_timings(timings: dict, out_dir) -> Path:
    rows = []
    for variant, cum in timings.items():
        rows += [{"iteration": k + 1, "cumulative_seconds": f"{c:.9f}", "variant": variant}
                 for k, c in enumerate(cum)]
    p = Path(out_dir) / "timings.csv"
    p.write_text(_csv_text(TIMING_COLUMNS, rows))
    return p


def write_bounds(rows: list, out_dir) -> Path:
    fmt = [{**r, "K_bound": repr(float(r["K_bound"])), "eligible": int(r["eligible"]),
            "vacuous": int(r["vacuous"]), "pass": int(r["pass"])} for r in rows]
    p = Path(out_dir) / "bounds.csv"
    p.write_text(_csv_text(BOUND_COLUMNS, fmt))
    return p


def write_manifest(config: ExperimentConfig, out_dir) -> Path:
    manifest = {
        "config": config.to_dict(),
        "episode_seeds": [config.seed + ep for ep in range(config.episodes)],
        "seeding": "episode seed = master seed + episode index; "
                   "SeedSequence(seed).spawn(3) -> environment, filter, planner",
        "package_version": __version__,
        "kernel_backend": backend_name(),
        "deterministic": all("seconds" not in b for b in config.budgets),
    }
    p = Path(out_dir) / "manifest.json"
    p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return p


def replay(manifest_path, out_dir, workers: int = 1) -> dict:
    cfg = ExperimentConfig.load(manifest_path)
    records = run_experiment(cfg, workers)
    return emit_reports(records, out_dir, cfg)


# --------------------------------------------------------------------------
# timing profile
# --------------------------------------------------------------------------

# Narrow observation branching so node beliefs grow with the iteration count;
# at the tuned Light-Dark widths every node holds a handful of particles and
# the quadratic batch cost never shows.
PROFILE_SELECTION = {"kind": "dpw", "c": 100.0, "k_o": 0.5, "alpha_o": 1 / 30,
                     "widen_actions": False}


def log_log_slope(iterations, cumulative, lo: int, hi: int) -> float:
    it = np.asarray(iterations, dtype=float)
    c = np.asarray(cumulative, dtype=float)
    m = (it >= lo) & (it <= hi)
    return float(np.polyfit(np.log(it[m]), np.log(c[m]), 1)[0])


def timing_profile(problem="light_dark", iterations: int = 10_000, seed: int = 0,
                   max_depth: int = 3, selection: dict | None = None,
                   variants=("incremental", "from_scratch", "pomcpow"),
                   root_particles: int = 500, fit_from: int | None = None,
                   repeats: int = 15, scratch_repeats: int = 1) -> dict:
    """Paired cumulative planning CPU-time curves from one shared seed.

    ``incremental`` and ``from_scratch`` are rho-POMCPOW differing only in the
    reward path and must grow identical trees; ``pomcpow`` is the
    state-reward baseline with the same selection parameters. Each variant is
    planned ``repeats`` times (``scratch_repeats`` for the slow from-scratch
    path), interleaved so a slow spell on the machine hits every variant, and
    the curve takes the median time of every iteration. Repeats must grow the
    same tree.
    """
    if repeats < 1 or scratch_repeats < 1:
        raise ContractError("repeats must be >= 1")
    model = load_problem(problem) if not hasattr(problem, "step") else problem
    sel = params_from_dict(selection or PROFILE_SELECTION)
    root_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    root = model.initial_belief(root_rng, root_particles)
    counts = {v: scratch_repeats if v == "from_scratch" else repeats for v in variants}
    runs, digests, actions = {v: [] for v in variants}, {}, {}
    for r in range(max(counts.values())):
        for v in variants:
            if r >= counts[v]:
                continue
            cfg = PlannerConfig(planner="pomcpow" if v == "pomcpow" else "rho_pomcpow",
                                iterations=iterations, max_depth=max_depth, selection=sel,
                                incremental=(v != "from_scratch"), record_timings=True)
            planner = make_planner(model, cfg)
            a = planner.plan(root, np.random.default_rng(seed))
            runs[v].append(np.diff(np.asarray(planner.iteration_times), prepend=0.0))
            digest = planner.digest(a)
            if v in digests and digests[v] != digest:
                raise DigestMismatch(f"repeated {v} runs grew different trees")
            digests[v], actions[v] = digest, a
    lo = fit_from or max(1, iterations // 10)
    curves = {v: list(np.cumsum(np.median(runs[v], axis=0))) for v in variants}
    slopes = {v: log_log_slope(np.arange(1, iterations + 1), curves[v], lo, iterations)
              for v in variants} if iterations > lo else {}
    if "incremental" in digests and "from_scratch" in digests \
            and digests["incremental"] != digests["from_scratch"]:
        raise DigestMismatch("incremental and from-scratch runs grew different trees")
    return {"curves": curves, "digests": digests, "actions": actions, "slopes": slopes,
            "fit_range": [lo, iterations], "iterations": iterations,
            "repeats": counts,
            "digest_match": digests.get("incremental") == digests.get("from_scratch")}


# --------------------------------------------------------------------------
# visitation bounds
# --------------------------------------------------------------------------

def visitation_bounds(t_values=(100, 1_000, 10_000), alpha_a: float = 0.5,
                      alpha_o: float = 0.5, e: float = 0.5, seed: int = 0) -> list:
    """Grow depth-2 trees with the consistent strategies and check every node's bound."""
    model = SyntheticDepthTwo()
    params = AugerParams(alpha_a=alpha_a, alpha_o=alpha_o, e=e)
    rows = []
    for t in t_values:
        cfg = PlannerConfig(planner="rho_pomcpow", iterations=int(t), max_depth=2,
                            selection=params, shaping_weight=0.0)
        planner = make_planner(model, cfg)
        rng = np.random.default_rng(seed)
        planner.plan(model.initial_belief(rng, 100), rng)
        for r in check_visitation_bounds(planner.tree, params, int(t)):
            r["floor_K"] = math.floor(r["K_bound"] + 1e-12)
            rows.append(r)
    return rows


def bounds_summary(rows: list) -> dict:
    return {"nodes": len(rows),
            "eligible": sum(r["eligible"] for r in rows),
            "eligible_nonvacuous": sum(r["eligible"] and not r["vacuous"] for r in rows),
            "vacuous": sum(r["vacuous"] for r in rows),
            "violations": sum(not r["pass"] for r in rows)}


# --------------------------------------------------------------------------
# incremental-vs-batch oracle sweeps
# --------------------------------------------------------------------------

def shannon_oracle(n: int = 10_000, seed: int = 0, merge_every: int = 10) -> dict:
    """Random insertions (every ``merge_every``-th repeats an existing state) with
    the O(1) entropy update checked against batch recomputation after each one.

    Two timings are reported. ``speedup`` compares like with like: the whole
    incremental sequence run by the compiled update loop against the compiled
    batch kernel called once per step. ``python_speedup`` compares the
    per-call library functions (interpreter-bound O(1) update vs batch call).
    """
    rng = np.random.default_rng(seed)
    b = WeightedParticleBelief(dim=2, paired=False, track_shannon=False)
    cache = EntropyCache()
    states = rng.standard_normal((n, 2))
    weights = rng.uniform(0.01, 2.0, n)
    old_sums = np.zeros(n)
    new_sums = np.zeros(n)
    w_old = np.zeros(n)
    w_new = np.zeros(n)
    batch_vals = np.zeros(n)
    max_err = 0.0
    t_py = 0.0
    t_batch = 0.0
    merges = 0
    for i in range(n):
        if merge_every and i > 0 and i % merge_every == 0:
            s = b.states[int(rng.integers(b.count))].copy()
            merges += 1
        else:
            s = states[i]
        old_sums[i] = b.weight_sum
        k = b.insert(s, float(weights[i]))
        w_new[i] = b.weights[k]
        w_old[i] = w_new[i] - weights[i] if b.last_insert[1] else 0.0
        new_sums[i] = b.weight_sum
        t0 = time.perf_counter()
        inc = shannon_update(cache, old_sums[i], new_sums[i], w_old[i], w_new[i])
        t1 = time.perf_counter()
        batch_vals[i] = kernels.shannon_batch(b.weights, b.count)
        t2 = time.perf_counter()
        t_py += t1 - t0
        t_batch += t2 - t1
        max_err = max(max_err, abs(inc - batch_vals[i]))
    replay_vals = np.zeros(n)
    one = np.ones(1)
    kernels.shannon_replay(np.zeros(1), one, np.zeros(1), one, np.zeros(1))  # load/compile once
    t0 = time.perf_counter()
    kernels.shannon_replay(old_sums, new_sums, w_old, w_new, replay_vals)
    t_inc = time.perf_counter() - t0
    max_err = max(max_err, float(np.max(np.abs(replay_vals - batch_vals))))
    return {"n": n, "merges": merges, "max_abs_error": max_err,
            "incremental_seconds": t_inc, "batch_seconds": t_batch,
            "speedup": t_batch / max(t_inc, 1e-12),
            "python_incremental_seconds": t_py,
            "python_speedup": t_batch / max(t_py, 1e-12)}


def boers_oracle(n: int = 2_000, seed: int = 0, every: int = 100, problem="light_dark") -> dict:
    """Grow one (prior, posterior) belief under the Light-Dark models, comparing the
    incremental Boers value against a from-scratch evaluation."""
    model = load_problem(problem) if isinstance(problem, str) else problem
    rng = np.random.default_rng(seed)
    a = 2
    prior = model.initial_belief(rng, 200).active_states()
    s_true = model.transition_sample(model.x0, a, rng)
    o = model.observation_sample(a, s_true, rng)
    b = WeightedParticleBelief(dim=2, paired=True, track_shannon=False)
    t_inc = 0.0
    t_batch = 0.0
    max_rel = 0.0
    checks = 0
    for i in range(1, n + 1):
        s = prior[int(rng.integers(len(prior)))]
        s_next = model.transition_sample(s, a, rng)
        z = model.observation_density(o, a, s_next)
        b.insert(s_next, max(z, 1e-300), s, 1.0)
        t0 = time.perf_counter()
        inc = boers_update(b, a, o, model, z_new=max(z, 1e-300))
        t1 = time.perf_counter()
        batch = boers_batch(b, a, o, model)
        t2 = time.perf_counter()
        t_inc += t1 - t0
        t_batch += t2 - t1
        if i % every == 0 or i == n:
            max_rel = max(max_rel, abs(inc - batch) / max(abs(batch), 1e-300))
            checks += 1
    return {"n": n, "checks": checks, "max_rel_error": max_rel,
            "incremental_seconds": t_inc, "batch_seconds": t_batch,
            "speedup": t_batch / max(t_inc, 1e-12)}


def lvu_oracle(n_updates: int = 100_000, seed: int = 0, depth: int = 4, n_actions: int = 3,
               gamma: float = 0.95) -> dict:
    """Random descents through a growing tree. Every visit redraws the child's
    reward (as a belief-dependent reward would drift), and each O(1) backup is
    compared with a full recomputation over that node's children."""
    rng = np.random.default_rng(seed)
    tree = BeliefTree(gamma)
    root = tree.add_belief_node(-1, None, None, 0, rollout_count=0)
    stats = {"updates": 0, "max_abs_error": 0.0}

    def check(inc, ref):
        stats["updates"] += 1
        stats["max_abs_error"] = max(stats["max_abs_error"], abs(inc - ref))

    def sim_v(h, d):
        if d == 0:
            tree.b_N[h] += 1
            return tree.b_V[h]
        kids = tree.b_children[h]
        if not kids or (len(kids) < n_actions and rng.random() < 0.3):
            ha = tree.add_action_node(h, len(kids))
        else:
            ha = kids[int(rng.integers(len(kids)))]
        q_prev = tree.a_Q[ha]
        q = sim_q(ha, d)
        tree.b_N[h] += 1
        v = lvu_update_v(tree, h, ha, q, q_prev)
        check(v, full_recompute_v(tree, h))
        return v

    def sim_q(ha, d):
        kids = tree.a_children[ha]
        new = not kids or rng.random() < 0.2
        if new:
            hao = tree.add_belief_node(ha, None, None, tree.b_depth[tree.a_parent[ha]] + 1)
        else:
            hao = kids[int(rng.integers(len(kids)))]
        rho_prev, v_prev = tree.b_rho[hao], tree.b_V[hao]
        rho = float(rng.normal(0.0, 10.0))
        tree.b_rho[hao] = rho
        if new:
            tree.set_rollout(hao, float(rng.normal(0.0, 10.0)))
            v = tree.b_V[hao]
        else:
            v = sim_v(hao, d - 1)
        tree.a_N[ha] += 1
        q = lvu_update_q(tree, ha, hao, rho, rho_prev, v, v_prev)
        check(q, full_recompute_q(tree, ha))
        return q

    t0 = time.perf_counter()
    while stats["updates"] < n_updates:
        sim_v(root, depth)
    stats["seconds"] = time.perf_counter() - t0
    stats["nodes"] = tree.n_belief_nodes + tree.n_action_nodes
    return stats


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
