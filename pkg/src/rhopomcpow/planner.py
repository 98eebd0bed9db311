"""Online planners: rho-POMCPOW (LVU backups, incremental belief rewards),
POMCPOW (running-average backups, state rewards) and PFT-DPW (fixed-size
particle beliefs as MDP states).
"""
from dataclasses import dataclass, field, asdict
import json
import math
import time
import warnings

import numpy as np

from .belief import WeightedParticleBelief, filter_step, systematic_resample
from .entropy import boers_batch, boers_update, info_gain
from .model import ContractError, gaussian_entropy
from .select import (AugerParams, DpwParams, auger_action_select, auger_observation_select,
                     dpw_action_select, dpw_observation_select, expands, params_from_dict)
from .tree import BeliefTree, lvu_update_q, lvu_update_v

PLANNERS = ("rho_pomcpow", "pomcpow", "pft_dpw")


@dataclass
class PlannerConfig:
    planner: str = "rho_pomcpow"
    max_depth: int = 20
    iterations: int | None = 1000
    time_budget: float | None = None
    selection: DpwParams | AugerParams = field(default_factory=DpwParams)
    incremental: bool = True
    init_particles: int = 1
    pft_particles: int = 50
    shaping_weight: float | None = None
    record_timings: bool = False

    def __post_init__(self):
        if self.planner not in PLANNERS:
            raise ContractError(f"unknown planner {self.planner!r}; choose from {PLANNERS}")
        if self.max_depth < 1:
            raise ContractError("max_depth must be >= 1")
        if self.iterations is None and self.time_budget is None:
            raise ContractError("give an iteration budget, a time budget, or both")
        if self.init_particles < 1 or self.pft_particles < 1:
            raise ContractError("particle counts must be >= 1")
        if isinstance(self.selection, dict):
            self.selection = params_from_dict(self.selection)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["selection"] = self.selection.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlannerConfig":
        return cls(**d)


# Tuned Light-Dark values, reused for Active Localization.
TUNED = {
    "rho_pomcpow": dict(c=120.0, k_o=6.0, alpha_o=1 / 30),
    "pomcpow": dict(c=100.0, k_o=4.0, alpha_o=1 / 30),
    "pft_dpw": dict(c=80.0, k_o=3.0, alpha_o=1 / 40),
}


def tuned_config(planner: str, problem: str = "light_dark", **overrides) -> PlannerConfig:
    sel = DpwParams(widen_actions=False, **TUNED[planner])
    kw = dict(planner=planner, selection=sel)
    if planner == "rho_pomcpow" and problem == "active_localization":
        kw["init_particles"] = 10
    kw.update(overrides)
    return PlannerConfig(**kw)


class _TreePlanner:
    """Shared budget loop, action choice and bookkeeping."""

    def __init__(self, model, config: PlannerConfig):
        self.model = model
        self.config = config
        self.tree = None
        self.rng = None
        self.iteration_times = []
        self.info = {}
        self.trace = None
        sel = config.selection
        self._auger = isinstance(sel, AugerParams)

    # strategy dispatch -----------------------------------------------------
    def _new_belief_node(self, parent_action, obs, belief, depth, terminal, rollout_count=1):
        tree = self.tree
        return tree.add_belief_node(parent_action, obs, belief, depth, terminal, rollout_count)

    def _select_action(self, h):
        if self._auger:
            return auger_action_select(self.tree, h, self.config.selection, self.rng,
                                       self.model.n_actions)
        return dpw_action_select(self.tree, h, self.config.selection, self.rng,
                                 self.model.n_actions)

    def _select_observation(self, ha, s_next):
        if self._auger:
            return auger_observation_select(self.tree, ha, self.config.selection, self.model,
                                            s_next, self.rng)
        return dpw_observation_select(self.tree, ha, self.config.selection, self.model,
                                      s_next, self.rng)

    # budget loop -------------------------------------------------------------
    def _run(self, iterate, root):
        cfg = self.config
        max_iter = cfg.iterations if cfg.iterations is not None else math.inf
        deadline = None
        start = time.perf_counter()
        if cfg.time_budget is not None:
            deadline = start + cfg.time_budget
        # profiles record process CPU time so other processes' slices do not count
        cpu0 = time.process_time()
        times = self.iteration_times = []
        it = 0
        if max_iter > 0 and (deadline is None or cfg.time_budget > 0):
            while it < max_iter:
                depth = iterate()
                it += 1
                if cfg.record_timings:
                    times.append(time.process_time() - cpu0)
                if self.trace is not None:
                    self._write_trace(it, depth, root)
                # the clock is only read every 32 iterations
                if deadline is not None and it % 32 == 0 and time.perf_counter() >= deadline:
                    break
        self.info = {"iterations": it, "seconds": time.perf_counter() - start,
                     "zero_budget": it == 0}
        return it

    def _write_trace(self, it, depth, root):
        tree = self.tree
        kids = tree.b_children[root]
        stats = [{"action": tree.a_action[ha], "N": tree.a_N[ha], "Q": tree.a_Q[ha]}
                 for ha in kids]
        self.trace.write(json.dumps({"iteration": it, "depth": depth, "root": stats}) + "\n")

    def _best_action(self, root):
        tree = self.tree
        best = None
        best_q = -math.inf
        for ha in tree.b_children[root]:
            if tree.a_N[ha] > 0 and tree.a_Q[ha] > best_q:
                best_q = tree.a_Q[ha]
                best = tree.a_action[ha]
        if best is None:
            warnings.warn("planning budget produced no iterations; acting at random",
                          RuntimeWarning, stacklevel=3)
            self.info["warning"] = "zero_budget"
            return int(self.rng.integers(self.model.n_actions))
        return best

    def digest(self, action=None) -> str:
        return self.tree.digest(action)


class RhoPOMCPOW(_TreePlanner):
    """State-simulator tree search with belief-dependent rewards and LVU backups."""

    def __init__(self, model, config: PlannerConfig):
        super().__init__(model, config)
        lam = config.shaping_weight
        self.shaping_weight = model.shaping_weight if lam is None else lam
        self.reward_updates = 0

    def plan(self, root_belief: WeightedParticleBelief, rng) -> int:
        if root_belief.count < 1:
            raise ContractError("root belief is empty")
        self.rng = rng
        self.tree = BeliefTree(self.model.discount)
        root = self._new_belief_node(-1, None, root_belief, 0, False, rollout_count=0)
        self.tree.b_entropy[root] = gaussian_entropy(root_belief.active_states(),
                                                     root_belief.active_weights())
        d = self.config.max_depth

        def iterate():
            self._reached = 0
            self.simulate_v(root_belief.sample(rng), root, d)
            return self._reached

        self._run(iterate, root)
        action = self._best_action(root)
        self.info["action"] = action
        return action

    def simulate_v(self, s, h: int, d: int) -> float:
        tree = self.tree
        if d == 0 or tree.b_terminal[h]:
            tree.b_N[h] += 1
            return tree.b_V[h]
        ha = self._select_action(h)
        q_prev = tree.a_Q[ha]
        q = self.simulate_q(s, ha, d)
        tree.b_N[h] += 1
        return lvu_update_v(tree, h, ha, q, q_prev)

    def simulate_q(self, s, ha: int, d: int) -> float:
        tree = self.tree
        model = self.model
        rng = self.rng
        a = tree.a_action[ha]
        depth = self.config.max_depth - d + 1
        if depth > self._reached:
            self._reached = depth
        s_next = model.transition_sample(s, a, rng)
        hao, o = self._select_observation(ha, s_next)
        new = hao < 0
        if new:
            belief = WeightedParticleBelief(model.state_dim, paired=True, track_shannon=False)
            hao = self._new_belief_node(ha, o, belief, depth, model.is_terminal_action(a))
        else:
            belief = tree.b_belief[hao]
            o = tree.b_obs[hao]
        self._add_particle(belief, s, s_next, a, o)
        if new and self.config.init_particles > 1:
            parent = tree.b_belief[tree.a_parent[ha]]
            for _ in range(self.config.init_particles - 1):
                sp = parent.sample(rng)
                self._add_particle(belief, sp, model.transition_sample(sp, a, rng), a, o)
        rho_prev = tree.b_rho[hao]
        v_prev = tree.b_V[hao]
        rho = self.update_reward(hao, ha)
        if new:
            v = 0.0 if tree.b_terminal[hao] else model.rollout(s_next, d - 1, rng)
            tree.set_rollout(hao, v)
        else:
            v = self.simulate_v(belief.sample(rng), hao, d - 1)
        tree.a_N[ha] += 1
        return lvu_update_q(tree, ha, hao, rho, rho_prev, v, v_prev)

    def _add_particle(self, belief, s, s_next, a, o):
        model = self.model
        z = model.observation_density(o, a, s_next)
        if not z > 0.0:
            z = 1e-300
        belief.insert(s_next, z, s, 1.0, model.state_reward(s, a, s_next))
        if self.config.incremental:
            boers_update(belief, a, o, model, z_new=z)

    def update_reward(self, hao: int, ha: int) -> float:
        """rho(hao) = E[R_s] + lambda * (H(parent) - H(hao)) on the current particles."""
        tree = self.tree
        belief = tree.b_belief[hao]
        self.reward_updates += 1
        if self.config.incremental:
            h_post = belief.entropy_cache.boers.value
            state_term = belief.mean_reward
        else:
            a = tree.a_action[ha]
            h_post = boers_batch(belief, a, tree.b_obs[hao], self.model)
            n = belief.count
            state_term = float(belief.weights[:n] @ belief.rewards[:n]) / float(belief.weights[:n].sum())
        tree.b_entropy[hao] = h_post
        h_prior = tree.b_entropy[tree.a_parent[ha]]
        rho = float(state_term + self.shaping_weight * info_gain(h_prior, h_post))
        tree.b_rho[hao] = rho
        return rho


class POMCPOW(_TreePlanner):
    """Classic POMCPOW: running-average Q over sampled returns, state rewards only."""

    def plan(self, root_belief: WeightedParticleBelief, rng) -> int:
        if root_belief.count < 1:
            raise ContractError("root belief is empty")
        self.rng = rng
        self.tree = BeliefTree(self.model.discount)
        root = self._new_belief_node(-1, None, root_belief, 0, False, rollout_count=0)
        d = self.config.max_depth

        def iterate():
            self._reached = 0
            self.simulate(root_belief.sample(rng), root, d)
            return self._reached

        self._run(iterate, root)
        action = self._best_action(root)
        self.info["action"] = action
        return action

    def simulate(self, s, h: int, d: int) -> float:
        tree = self.tree
        if d == 0 or tree.b_terminal[h]:
            return 0.0
        model = self.model
        rng = self.rng
        ha = self._select_action(h)
        a = tree.a_action[ha]
        depth = self.config.max_depth - d + 1
        if depth > self._reached:
            self._reached = depth
        s_next = model.transition_sample(s, a, rng)
        hao, o = self._select_observation(ha, s_next)
        new = hao < 0
        if new:
            belief = WeightedParticleBelief(model.state_dim, paired=False, track_shannon=False)
            hao = self._new_belief_node(ha, o, belief, depth, model.is_terminal_action(a))
        else:
            belief = tree.b_belief[hao]
            o = tree.b_obs[hao]
        z = model.observation_density(o, a, s_next)
        belief.insert(s_next, z if z > 0.0 else 1e-300)
        if new:
            r = model.state_reward(s, a, s_next)
            future = 0.0 if tree.b_terminal[hao] else model.rollout(s_next, d - 1, rng)
            tree.b_N[hao] += 1
        else:
            s_next = belief.sample(rng)
            r = model.state_reward(s, a, s_next)
            future = self.simulate(s_next, hao, d - 1)
            if tree.b_terminal[hao] or d == 1:
                tree.b_N[hao] += 1
        total = r + model.discount * future
        tree.b_N[h] += 1
        tree.a_N[ha] += 1
        tree.a_Q[ha] += (total - tree.a_Q[ha]) / tree.a_N[ha]
        return total


class PFTDPW(_TreePlanner):
    """Belief-MDP search over m-particle beliefs; rewards computed once per node."""

    def __init__(self, model, config: PlannerConfig):
        super().__init__(model, config)
        lam = config.shaping_weight
        self.shaping_weight = model.shaping_weight if lam is None else lam
        self.reward_computations = 0

    def plan(self, root_belief: WeightedParticleBelief, rng) -> int:
        if root_belief.count < 1:
            raise ContractError("root belief is empty")
        self.rng = rng
        m = self.config.pft_particles
        idx = systematic_resample(root_belief.active_weights(), m, rng)
        particles = root_belief.active_states()[idx].copy()
        self.tree = BeliefTree(self.model.discount)
        root = self._new_belief_node(-1, None, particles, 0, False, rollout_count=0)
        self.tree.b_entropy[root] = gaussian_entropy(particles)
        d = self.config.max_depth

        def iterate():
            self._reached = 0
            self.simulate(root, d)
            return self._reached

        self._run(iterate, root)
        action = self._best_action(root)
        self.info["action"] = action
        return action

    def _expand(self, h: int, ha: int, depth: int):
        """Particle-filter step for a fresh observation; returns the child id."""
        tree = self.tree
        model = self.model
        rng = self.rng
        a = tree.a_action[ha]
        parts = tree.b_belief[h]
        m = len(parts)
        s = parts[int(rng.integers(m))]
        s_next = model.transition_sample(s, a, rng)
        o = model.observation_sample(a, s_next, rng)
        kept, h_post, state_term = filter_step(model, parts, a, o, rng)
        self.reward_computations += 1
        rho = state_term + self.shaping_weight * info_gain(tree.b_entropy[h], h_post)
        child = self._new_belief_node(ha, o, kept, depth, model.is_terminal_action(a))
        tree.b_rho[child] = rho
        tree.b_entropy[child] = h_post
        return child

    def simulate(self, h: int, d: int) -> float:
        tree = self.tree
        if d == 0 or tree.b_terminal[h]:
            return 0.0
        rng = self.rng
        ha = self._select_action(h)
        depth = self.config.max_depth - d + 1
        if depth > self._reached:
            self._reached = depth
        kids = tree.a_children[ha]
        sel = self.config.selection
        if isinstance(sel, DpwParams):
            widen = len(kids) <= sel.k_o * tree.a_N[ha] ** sel.alpha_o
        else:
            widen = expands(tree.a_N[ha] + 1, sel.alpha_o) or not kids
        if widen:
            child = self._expand(h, ha, depth)
            if tree.b_terminal[child]:
                future = 0.0
            else:
                parts = tree.b_belief[child]
                future = self.model.rollout(parts[int(rng.integers(len(parts)))], d - 1, rng)
            tree.b_N[child] += 1
        else:
            counts = np.array([tree.b_N[c] for c in kids], dtype=float)
            child = kids[int(np.searchsorted(np.cumsum(counts), rng.random() * counts.sum(),
                                             side="right"))]
            future = self.simulate(child, d - 1)
            if tree.b_terminal[child] or d == 1:
                tree.b_N[child] += 1
        total = tree.b_rho[child] + self.model.discount * future
        tree.b_N[h] += 1
        tree.a_N[ha] += 1
        tree.a_Q[ha] += (total - tree.a_Q[ha]) / tree.a_N[ha]
        return total


def make_planner(model, config: PlannerConfig):
    return {"rho_pomcpow": RhoPOMCPOW, "pomcpow": POMCPOW, "pft_dpw": PFTDPW}[config.planner](
        model, config)


def plan(belief_root, config: PlannerConfig, model, rng) -> int:
    """One planning call with a fresh tree; returns the chosen action index."""
    return make_planner(model, config).plan(belief_root, rng)
