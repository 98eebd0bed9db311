"""The two beacon-navigation benchmarks: 2-D Light-Dark and Active Localization.

Both share the motion model (8 unit-circle moves plus a terminating "stay",
Gaussian noise 0.1 I), a relative-position observation of the nearest beacon
whose variance grows with distance, and a -1 step cost. Map geometry (beacons,
obstacles, goal, start) is data; the packaged JSON maps are repo-defined.
"""
from dataclasses import dataclass, field
from importlib import resources
import json
import math
from pathlib import Path

import numpy as np

from . import kernels
from .belief import WeightedParticleBelief
from .model import ContractError, ProblemModel, iso_gauss_pdf_many

SQRT_HALF = math.sqrt(2.0) / 2.0
STAY = 8


def unit_circle_actions() -> np.ndarray:
    angles = np.arange(8) * (np.pi / 4.0)
    moves = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    moves[np.abs(moves) < 1e-12] = 0.0
    return np.vstack([moves, np.zeros((1, 2))])


@dataclass(frozen=True, eq=False)
class BeaconNavigation(ProblemModel):
    beacons: np.ndarray
    x0: np.ndarray
    obstacles: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    goal: np.ndarray | None = None
    goal_radius: float = 1.0
    discount: float = 0.95
    shaping_weight: float = 30.0
    transition_var: float = 0.1
    init_var: float = 2.5
    step_cost: float = -1.0
    goal_reward: float = 100.0
    fail_reward: float = -100.0
    collision_penalty: float = -50.0
    step_cap: int = 50
    name: str = "beacon_navigation"
    actions: np.ndarray = field(default_factory=unit_circle_actions)
    terminal_actions: frozenset = frozenset({STAY})
    state_dim: int = 2

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "beacons", np.atleast_2d(np.asarray(self.beacons, dtype=float)))
        set_(self, "x0", np.asarray(self.x0, dtype=float))
        obs = np.asarray(self.obstacles, dtype=float).reshape(-1, 3)
        set_(self, "obstacles", obs)
        if self.goal is not None:
            set_(self, "goal", np.asarray(self.goal, dtype=float))
        if len(self.beacons) == 0 or self.beacons.shape[1] != 2:
            raise ContractError("need at least one 2-D beacon")
        self._check_params()
        set_(self, "beacon_var", self._beacon_var())

    def _beacon_var(self) -> np.ndarray:
        return np.full(len(self.beacons), 0.5)

    # beacons ---------------------------------------------------------------
    def nearest_beacon(self, position):
        """Euclidean-nearest beacon; ties go to the lowest index."""
        p = np.asarray(position, dtype=float)
        d2 = ((self.beacons - p) ** 2).sum(axis=1)
        b = int(np.argmin(d2))
        return b, math.sqrt(float(d2[b]))

    def observation_var(self, s_next) -> float:
        b, dist = self.nearest_beacon(s_next)
        return SQRT_HALF * dist + float(self.beacon_var[b])

    def _nearest(self, sx: float, sy: float):
        bx = self.beacons
        best = 0
        best_d2 = math.inf
        for i in range(len(bx)):
            dx = bx[i, 0] - sx
            dy = bx[i, 1] - sy
            d2 = dx * dx + dy * dy
            if d2 < best_d2:
                best_d2 = d2
                best = i
        return best, best_d2

    def observation_sample(self, a, s_next, rng) -> np.ndarray:
        sx, sy = float(s_next[0]), float(s_next[1])
        b, d2 = self._nearest(sx, sy)
        sd = math.sqrt(SQRT_HALF * math.sqrt(d2) + self.beacon_var[b])
        zx, zy = rng.standard_normal(2)
        return np.array([self.beacons[b, 0] - sx + sd * zx, self.beacons[b, 1] - sy + sd * zy])

    def observation_density(self, o, a, s_next) -> float:
        sx, sy = float(s_next[0]), float(s_next[1])
        best, best_d2 = self._nearest(sx, sy)
        bx = self.beacons
        var = SQRT_HALF * math.sqrt(best_d2) + self.beacon_var[best]
        ex = float(o[0]) - (bx[best, 0] - sx)
        ey = float(o[1]) - (bx[best, 1] - sy)
        return math.exp(-0.5 * (ex * ex + ey * ey) / var) / (2.0 * math.pi * var)

    def observation_density_many(self, o, a, states) -> np.ndarray:
        states = np.atleast_2d(states)
        d2 = ((states[:, None, :] - self.beacons[None, :, :]) ** 2).sum(axis=2)
        idx = np.argmin(d2, axis=1)
        dist = np.sqrt(d2[np.arange(len(states)), idx])
        var = SQRT_HALF * dist + self.beacon_var[idx]
        return iso_gauss_pdf_many(np.asarray(o, dtype=float)[None, :],
                                  self.beacons[idx] - states, var)

    # reward / dynamics -----------------------------------------------------
    def in_goal(self, s) -> bool:
        if self.goal is None:
            return False
        dx = float(s[0]) - self.goal[0]
        dy = float(s[1]) - self.goal[1]
        return dx * dx + dy * dy <= self.goal_radius ** 2

    def in_obstacle(self, s) -> bool:
        for cx, cy, r in self.obstacles:
            dx = float(s[0]) - cx
            dy = float(s[1]) - cy
            if dx * dx + dy * dy <= r * r:
                return True
        return False

    def state_reward(self, s, a, s_next) -> float:
        r = self.step_cost
        if len(self.obstacles) and self.in_obstacle(s_next):
            r += self.collision_penalty
        if a == STAY and self.goal is not None:
            r += self.goal_reward if self.in_goal(s) else self.fail_reward
        return r

    def step(self, state, action: int, rng):
        """One environment transition: (next_state, observation, reward, terminal)."""
        self.check_action(action)
        s_next = self.transition_sample(state, action, rng)
        o = self.observation_sample(action, s_next, rng)
        return s_next, o, self.state_reward(state, action, s_next), action == STAY

    def rollout(self, s, depth: int, rng) -> float:
        if depth <= 0:
            return 0.0
        u = rng.random(depth)
        z = rng.standard_normal((depth, 2))
        has_goal = self.goal is not None
        gx, gy = (float(self.goal[0]), float(self.goal[1])) if has_goal else (0.0, 0.0)
        return float(kernels.nav_rollout(
            float(s[0]), float(s[1]), depth, self.discount, self.actions, STAY,
            math.sqrt(self.transition_var), u, z, self.step_cost, has_goal, gx, gy,
            self.goal_radius, self.goal_reward, self.fail_reward, self.obstacles,
            self.collision_penalty))

    # initial belief --------------------------------------------------------
    def sample_initial_state(self, rng) -> np.ndarray:
        return self.x0 + math.sqrt(self.init_var) * rng.standard_normal(2)

    def initial_belief(self, rng, n_particles: int) -> WeightedParticleBelief:
        if n_particles < 1:
            raise ContractError("initial belief needs at least one particle")
        pts = self.x0 + math.sqrt(self.init_var) * rng.standard_normal((n_particles, 2))
        return WeightedParticleBelief.from_particles(pts)

    def initial_entropy(self) -> float:
        """Differential entropy of the Gaussian initial belief."""
        return math.log(2.0 * math.pi * math.e * self.init_var)

    def to_config(self) -> dict:
        return {
            "problem": self.name,
            "beacons": self.beacons.tolist(),
            "obstacles": [{"c": [float(x), float(y)], "r": float(r)} for x, y, r in self.obstacles],
            "goal": None if self.goal is None else self.goal.tolist(),
            "x0": self.x0.tolist(),
            "lambda": self.shaping_weight,
            "gamma": self.discount,
            "step_cap": self.step_cap,
        }


@dataclass(frozen=True, eq=False)
class LightDark2D(BeaconNavigation):
    """Reach a unit-radius goal disc and stop there (+100) or anywhere else (-100)."""
    name: str = "light_dark"

    def __post_init__(self):
        if self.goal is None:
            raise ContractError("Light-Dark needs a goal")
        super().__post_init__()


@dataclass(frozen=True, eq=False)
class ActiveLocalization(BeaconNavigation):
    """Pure information objective; beacon noise shrinks with distance from the origin."""
    name: str = "active_localization"
    obstacle_free: bool = False

    def __post_init__(self):
        if self.obstacle_free:
            object.__setattr__(self, "obstacles", np.zeros((0, 3)))
        object.__setattr__(self, "goal", None)
        super().__post_init__()

    def _beacon_var(self) -> np.ndarray:
        norms = np.linalg.norm(self.beacons, axis=1)
        if np.any(norms <= 0.0):
            raise ContractError("Active Localization beacons must sit away from the origin")
        return 0.5 / norms


PROBLEMS = {"light_dark": LightDark2D, "active_localization": ActiveLocalization}


def problem_from_config(cfg: dict) -> BeaconNavigation:
    cfg = dict(cfg)
    pid = cfg.pop("problem")
    if pid not in PROBLEMS:
        raise ContractError(f"unknown problem {pid!r}; choose from {sorted(PROBLEMS)}")
    kw = {
        "beacons": cfg["beacons"],
        "x0": cfg["x0"],
        "obstacles": [[o["c"][0], o["c"][1], o["r"]] for o in cfg.get("obstacles", [])],
    }
    if cfg.get("goal") is not None:
        kw["goal"] = cfg["goal"]
    if "lambda" in cfg:
        kw["shaping_weight"] = float(cfg["lambda"])
    if "gamma" in cfg:
        kw["discount"] = float(cfg["gamma"])
    if "step_cap" in cfg:
        kw["step_cap"] = int(cfg["step_cap"])
    if pid == "active_localization" and cfg.get("obstacle_free"):
        kw["obstacle_free"] = True
    return PROBLEMS[pid](**kw)


def default_map(problem: str) -> dict:
    text = resources.files("rhopomcpow.maps").joinpath(f"{problem}.json").read_text()
    return json.loads(text)


def load_problem(source) -> BeaconNavigation:
    """Build a problem from a map dict, a JSON path, or a packaged map name."""
    if isinstance(source, dict):
        return problem_from_config(source)
    if isinstance(source, str) and source in PROBLEMS:
        return problem_from_config(default_map(source))
    return problem_from_config(json.loads(Path(source).read_text()))


class SyntheticDepthTwo(ProblemModel):
    """Small 1-D problem for the visitation-bound experiment.

    Three drift actions, noisy position readings (every observation is a fresh
    branch) and a state reward squashed into [0, 1]. No information shaping,
    so all rewards stay bounded.
    """
    state_dim = 1
    discount = 1.0
    shaping_weight = 0.0
    transition_var = 0.25
    actions = np.array([[-1.0], [0.0], [1.0]])
    obs_var = 0.5
    name = "synthetic_depth_two"

    def observation_sample(self, a, s_next, rng):
        return np.asarray(s_next, dtype=float) + math.sqrt(self.obs_var) * rng.standard_normal(1)

    def observation_density(self, o, a, s_next) -> float:
        e = float(o[0]) - float(s_next[0])
        return math.exp(-0.5 * e * e / self.obs_var) / math.sqrt(2.0 * math.pi * self.obs_var)

    def state_reward(self, s, a, s_next) -> float:
        return 1.0 / (1.0 + math.exp(-float(s_next[0])))

    def sample_initial_state(self, rng) -> np.ndarray:
        return rng.standard_normal(1)

    def initial_belief(self, rng, n_particles: int) -> WeightedParticleBelief:
        return WeightedParticleBelief.from_particles(rng.standard_normal((n_particles, 1)))
