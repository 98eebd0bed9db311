"""Growing weighted-particle beliefs with cached aggregates."""
import json
import math

import numpy as np

from . import kernels
from .entropy import EntropyCache, boers_batch, shannon_update
from .model import ContractError

WEIGHT_FLOOR = 1e-300


class WeightedParticleBelief:
    """Append-only particle set; bit-identical states are merged.

    When ``paired`` is set every posterior particle remembers the prior particle
    that generated it (and that prior particle's weight), which is what the
    Boers estimator sums over. ``reward_sum`` tracks ``sum_i w_i r_i`` for the
    running expected state reward.
    """

    __slots__ = ("dim", "paired", "merge", "track_shannon", "count", "weight_sum",
                 "prior_weight_sum", "reward_sum", "states", "weights",
                 "prior_states", "prior_weights", "rewards", "entropy_cache",
                 "version", "last_insert", "_index", "_fenwick")

    def __init__(self, dim: int = 2, capacity: int = 8, paired: bool = True,
                 merge: bool = True, track_shannon: bool = True):
        capacity = max(1, int(capacity))
        self.dim = dim
        self.paired = paired
        self.merge = merge
        self.track_shannon = track_shannon
        self.count = 0
        self.weight_sum = 0.0
        self.prior_weight_sum = 0.0
        self.reward_sum = 0.0
        self.states = np.zeros((capacity, dim))
        self.weights = np.zeros(capacity)
        self.prior_states = np.zeros((capacity, dim)) if paired else None
        self.prior_weights = np.zeros(capacity) if paired else None
        self.rewards = np.zeros(capacity)
        self.entropy_cache = EntropyCache()
        self.version = 0
        self.last_insert = None
        self._index = {}
        self._fenwick = np.zeros(capacity + 1)

    @classmethod
    def from_particles(cls, states, weights=None, **kw) -> "WeightedParticleBelief":
        states = np.atleast_2d(np.asarray(states, dtype=float))
        kw.setdefault("paired", False)
        b = cls(dim=states.shape[1], capacity=len(states), **kw)
        if weights is None:
            weights = np.ones(len(states))
        for s, w in zip(states, weights):
            b.insert(s, float(w))
        return b

    def __len__(self):
        return self.count

    def _grow(self, need: int):
        cap = len(self.weights)
        while cap < need:
            cap *= 2
        for name in ("states", "weights", "prior_states", "prior_weights", "rewards"):
            old = getattr(self, name)
            if old is None:
                continue
            new = np.zeros((cap,) + old.shape[1:])
            new[: len(old)] = old
            setattr(self, name, new)
        self._fenwick = np.zeros(cap + 1)
        kernels.fenwick_build(self._fenwick, self.weights, self.count)

    def insert(self, state, weight: float, prior_state=None, prior_weight: float = 1.0,
               reward: float = 0.0) -> int:
        """Add one particle (or merge into a bit-identical one); returns its index."""
        if not weight > 0.0:
            raise ContractError(f"particle weight must be positive, got {weight}")
        if weight < WEIGHT_FLOOR:
            weight = WEIGHT_FLOOR
        if self.paired:
            if prior_state is None:
                raise ContractError("paired belief needs a prior_state")
            if not prior_weight > 0.0:
                raise ContractError(f"prior weight must be positive, got {prior_weight}")
            if prior_weight < WEIGHT_FLOOR:
                prior_weight = WEIGHT_FLOOR
        else:
            prior_weight = 0.0
        state = np.asarray(state, dtype=float)
        key = state.tobytes() if self.merge else None
        k = self._index.get(key) if key is not None else None
        old_w = 0.0
        if k is not None:
            merged = True
            old_w = float(self.weights[k])
            self.weights[k] = old_w + weight
            if self.paired:
                self.prior_weights[k] += prior_weight
        else:
            merged = False
            k = self.count
            if k >= len(self.weights):
                self._grow(k + 1)
            self.states[k] = state
            self.weights[k] = weight
            self.rewards[k] = reward
            if self.paired:
                self.prior_states[k] = prior_state
                self.prior_weights[k] = prior_weight
            if key is not None:
                self._index[key] = k
            self.count = k + 1
        old_sum = self.weight_sum
        self.weight_sum = old_sum + weight
        self.prior_weight_sum += prior_weight
        self.reward_sum += weight * reward
        kernels.fenwick_add(self._fenwick, k, weight)
        if self.track_shannon:
            shannon_update(self.entropy_cache, old_sum, self.weight_sum, old_w, old_w + weight)
        self.version += 1
        self.last_insert = (k, merged, weight, prior_weight)
        return k

    # queries ---------------------------------------------------------------
    def active_states(self) -> np.ndarray:
        return self.states[: self.count]

    def active_weights(self) -> np.ndarray:
        return self.weights[: self.count]

    def normalized_weight(self, i: int) -> float:
        if not 0 <= i < self.count:
            raise IndexError(f"particle {i} outside 0..{self.count - 1}")
        return float(self.weights[i]) / self.weight_sum

    def normalized_weights(self) -> np.ndarray:
        return self.active_weights() / self.weight_sum

    def sample_index(self, rng) -> int:
        """Draw a particle index with probability proportional to its weight."""
        if self.count == 0:
            raise ContractError("cannot sample from an empty belief")
        k = kernels.fenwick_search(self._fenwick, rng.random() * self.weight_sum)
        return k if k < self.count else self.count - 1

    def sample(self, rng) -> np.ndarray:
        return self.states[self.sample_index(rng)]

    @property
    def mean_reward(self) -> float:
        """Running weighted average of the stored per-particle state rewards."""
        return self.reward_sum / self.weight_sum

    def to_records(self) -> list:
        out = []
        for i in range(self.count):
            rec = {"state": self.states[i].tolist(), "weight": float(self.weights[i])}
            if self.paired:
                rec["prior_state"] = self.prior_states[i].tolist()
                rec["prior_weight"] = float(self.prior_weights[i])
            out.append(rec)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_records())


def expected_state_reward(belief: WeightedParticleBelief, a: int, model) -> float:
    """sum_i w'_i R(prior_i, a, s'_i) / sum_i w'_i, recomputed from the stored pairs."""
    if belief.count < 1:
        raise ContractError("expected reward of an empty belief")
    total = 0.0
    for i in range(belief.count):
        prior = belief.prior_states[i] if belief.paired else belief.states[i]
        total += belief.weights[i] * model.state_reward(prior, a, belief.states[i])
    return total / belief.weight_sum


def systematic_resample(weights: np.ndarray, n: int, rng) -> np.ndarray:
    """n indices drawn by low-variance systematic resampling."""
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    u = (rng.random() + np.arange(n)) / n
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(weights) - 1)


def filter_step(model, particles: np.ndarray, a: int, o, rng, resample: bool = True):
    """Bootstrap particle-filter update of an equally weighted particle array.

    Returns ``(particles', boers_entropy, expected_state_reward)``; the entropy
    is evaluated on the weighted (prior, posterior) pairs before resampling.
    """
    m = len(particles)
    noise = math.sqrt(model.transition_var) * rng.standard_normal(particles.shape)
    moved = model.transition_mean(particles, a) + noise
    w = np.maximum(model.observation_density_many(o, a, moved), WEIGHT_FLOOR)
    rewards = np.array([model.state_reward(particles[j], a, moved[j]) for j in range(m)])
    state_term = float(w @ rewards) / float(w.sum())
    pair = WeightedParticleBelief(particles.shape[1], capacity=m, paired=True, merge=False,
                                  track_shannon=False)
    pair.states[:m] = moved
    pair.weights[:m] = w
    pair.prior_states[:m] = particles
    pair.prior_weights[:m] = 1.0
    pair.count = m
    pair.weight_sum = float(w.sum())
    pair.prior_weight_sum = float(m)
    h_post = boers_batch(pair, a, o, model)
    if resample:
        moved = moved[systematic_resample(w, m, rng)]
    return moved, h_post, state_term
