"""Generative problem contract shared by planners and benchmark environments."""
from dataclasses import dataclass
import math

import numpy as np


class ContractError(ValueError):
    """A caller broke an operation's precondition."""


@dataclass(frozen=True)
class ShapedReward:
    state_term: float
    info_term: float

    @property
    def total(self) -> float:
        return self.state_term + self.info_term


def iso_gauss_pdf(x, mean, var: float) -> float:
    """Density of N(mean, var * I) at ``x``."""
    d = len(x)
    r2 = 0.0
    for k in range(d):
        diff = float(x[k]) - float(mean[k])
        r2 += diff * diff
    return (2.0 * math.pi * var) ** (-0.5 * d) * math.exp(-0.5 * r2 / var)


def iso_gauss_pdf_many(xs: np.ndarray, mean, var) -> np.ndarray:
    """Row-wise N(mean, var_i * I) density; ``mean`` and ``var`` may be per-row."""
    d = xs.shape[1]
    diff = xs - mean
    r2 = np.einsum("ij,ij->i", diff, diff)
    return (2.0 * np.pi * var) ** (-0.5 * d) * np.exp(-0.5 * r2 / var)


def gaussian_entropy(states: np.ndarray, weights: np.ndarray | None = None,
                     min_var: float = 1e-12) -> float:
    """Differential entropy of the Gaussian moment-matched to a particle set."""
    states = np.atleast_2d(states)
    d = states.shape[1]
    if weights is None:
        weights = np.ones(states.shape[0])
    w = weights / weights.sum()
    mu = w @ states
    diff = states - mu
    cov = (diff * w[:, None]).T @ diff
    det = float(np.linalg.det(cov + min_var * np.eye(d)))
    return 0.5 * (d * math.log(2.0 * math.pi * math.e) + math.log(max(det, 1e-300)))


class ProblemModel:
    """Continuous-state rho-POMDP with an additive isotropic Gaussian transition.

    Subclasses provide ``actions`` (K x d array of displacement vectors),
    ``transition_var``, ``discount`` and ``shaping_weight`` plus the observation
    model and the state reward. All stochastic methods take an explicit numpy
    ``Generator``.
    """

    state_dim = 2
    discount = 0.95
    shaping_weight = 0.0
    transition_var = 0.1
    actions = np.zeros((1, 2))
    terminal_actions = frozenset()

    def _check_params(self):
        if not 0.0 < self.discount <= 1.0:
            raise ContractError(f"discount must be in (0, 1], got {self.discount}")
        if self.shaping_weight < 0.0:
            raise ContractError(f"shaping_weight must be >= 0, got {self.shaping_weight}")
        if self.state_dim < 1:
            raise ContractError("state_dim must be positive")

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def check_action(self, a: int):
        if not 0 <= a < len(self.actions):
            raise ContractError(f"action {a} outside 0..{len(self.actions) - 1}")

    def is_terminal_action(self, a: int) -> bool:
        return a in self.terminal_actions

    # transition ------------------------------------------------------------
    def transition_mean(self, s, a: int) -> np.ndarray:
        return s + self.actions[a]

    def transition_sample(self, s, a: int, rng) -> np.ndarray:
        mean = self.transition_mean(s, a)
        if self.transition_var == 0.0:
            return np.array(mean, dtype=float)
        return mean + math.sqrt(self.transition_var) * rng.standard_normal(self.state_dim)

    def transition_density(self, s_next, s, a: int) -> float:
        if self.transition_var <= 0.0:
            raise ContractError("transition density needs a positive transition_var")
        return iso_gauss_pdf(s_next, self.transition_mean(s, a), self.transition_var)

    # observation -----------------------------------------------------------
    def observation_sample(self, a: int, s_next, rng):
        raise NotImplementedError

    def observation_density(self, o, a: int, s_next) -> float:
        raise NotImplementedError

    def observation_density_many(self, o, a: int, states: np.ndarray) -> np.ndarray:
        return np.array([self.observation_density(o, a, s) for s in states])

    # reward ----------------------------------------------------------------
    def state_reward(self, s, a: int, s_next) -> float:
        raise NotImplementedError

    def shaped_reward(self, state_term: float, h_prior: float, h_post: float) -> ShapedReward:
        return ShapedReward(state_term, self.shaping_weight * (h_prior - h_post))

    # rollout ---------------------------------------------------------------
    def rollout_action(self, step: int, depth: int, rng) -> int:
        """Uniform over actions; terminal actions only in the last third."""
        allow_terminal = step >= depth - (depth + 2) // 3
        if allow_terminal or not self.terminal_actions:
            return int(rng.integers(len(self.actions)))
        live = [a for a in range(len(self.actions)) if a not in self.terminal_actions]
        return live[int(rng.integers(len(live)))]

    def rollout(self, s, depth: int, rng) -> float:
        total = 0.0
        disc = 1.0
        for k in range(depth):
            a = self.rollout_action(k, depth, rng)
            s_next = self.transition_sample(s, a, rng)
            total += disc * self.state_reward(s, a, s_next)
            if self.is_terminal_action(a):
                break
            disc *= self.discount
            s = s_next
        return total
