"""Shannon and Boers entropy of particle beliefs, batch and incremental.

The incremental Boers path caches, per belief, the mixture values
``c_i = sum_j T(s'_i | s_j, a) w_j / W`` together with running sums of the two
observation terms. Adding (or merging) one particle pair then costs O(N):
each cached ``c_i`` is rescaled by ``W / W_new`` and receives the new prior
particle's kernel contribution, the new ``c_k`` is built once, and the
``sum_i w'_i log c_i`` term is re-summed.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .kernels import LOG_FLOOR
from .model import ContractError


def xlogx(x: float) -> float:
    return x * math.log(x) if x > 0.0 else 0.0


@dataclass
class BoersCache:
    c: np.ndarray
    z: np.ndarray
    prior_mean: np.ndarray
    prior_weight_sum: float = 0.0
    post_weight_sum: float = 0.0
    term1_num: float = 0.0
    term2_num: float = 0.0
    term3_num: float = 0.0
    count: int = 0
    version: int = 0
    value: float = 0.0
    floor_events: int = 0

    @classmethod
    def empty(cls, dim: int, capacity: int = 8) -> "BoersCache":
        return cls(c=np.zeros(capacity), z=np.zeros(capacity),
                   prior_mean=np.zeros((capacity, dim)))

    def _reserve(self, n: int):
        cap = len(self.c)
        if n <= cap:
            return
        while cap < n:
            cap *= 2
        self.c = _grow(self.c, cap)
        self.z = _grow(self.z, cap)
        self.prior_mean = _grow(self.prior_mean, cap)


def _grow(arr, cap):
    out = np.zeros((cap,) + arr.shape[1:])
    out[: len(arr)] = arr
    return out


@dataclass
class EntropyCache:
    shannon_wlogw_sum: float = 0.0
    shannon_value: float = 0.0
    boers: BoersCache | None = field(default=None)


# --------------------------------------------------------------------------
# Shannon
# --------------------------------------------------------------------------

def shannon_batch(belief_or_weights) -> float:
    """Entropy of the normalised particle weights, with 0 log 0 = 0."""
    if hasattr(belief_or_weights, "active_weights"):
        w = belief_or_weights.active_weights()
    else:
        w = np.asarray(belief_or_weights, dtype=float)
    if w.size == 0:
        raise ContractError("entropy of an empty belief")
    return float(kernels.shannon_batch(np.ascontiguousarray(w, dtype=float), len(w)))


def shannon_update(cache: EntropyCache, old_weight_sum: float, new_weight_sum: float,
                   w_k_old: float, w_k_new: float) -> float:
    """O(1) entropy update after particle k's weight moves from w_k_old to w_k_new.

    ``w_k_old = 0`` encodes a brand-new particle.
    """
    if not new_weight_sum > 0.0:
        raise ContractError(f"new weight sum must be positive, got {new_weight_sum}")
    delta = xlogx(w_k_new) - xlogx(w_k_old)
    cache.shannon_wlogw_sum += delta
    if old_weight_sum <= 0.0:
        value = -cache.shannon_wlogw_sum / new_weight_sum + math.log(new_weight_sum)
    else:
        # H~ = (W / W~)(H - log W) - delta / W~ + log W~, from
        # H = log W - (sum w log w) / W applied before and after the change.
        ratio = old_weight_sum / new_weight_sum
        value = (ratio * (cache.shannon_value - math.log(old_weight_sum))
                 - delta / new_weight_sum + math.log(new_weight_sum))
    cache.shannon_value = value
    return value


# --------------------------------------------------------------------------
# Boers
# --------------------------------------------------------------------------

def _require_pairs(belief):
    if belief.count < 1:
        raise ContractError("Boers entropy needs at least one particle")
    if not belief.paired:
        raise ContractError("Boers entropy needs prior/posterior particle pairs")


def boers_batch_diag(belief, a: int, o, model):
    """From-scratch Boers estimate, O(N^2). Returns ``(value, floor_events)``."""
    _require_pairs(belief)
    n = belief.count
    post = belief.states[:n]
    prior_mean = np.ascontiguousarray(model.transition_mean(belief.prior_states[:n], a))
    z = np.ascontiguousarray(model.observation_density_many(o, a, post), dtype=float)
    value, floors = kernels.boers_batch(post, belief.weights[:n], prior_mean,
                                        belief.prior_weights[:n], z,
                                        float(model.transition_var))
    return float(value), int(floors)


def boers_batch(belief, a: int, o, model) -> float:
    return boers_batch_diag(belief, a, o, model)[0]


def boers_update(belief, a: int, o, model, z_new: float | None = None) -> float:
    """Fold the belief's most recent insertion into its Boers cache, O(N).

    ``z_new`` is Z(o | a, s'_k) for the inserted particle when the caller
    already has it; otherwise it is evaluated here.
    """
    _require_pairs(belief)
    ec = belief.entropy_cache
    if ec.boers is None:
        ec.boers = BoersCache.empty(belief.dim, max(8, len(belief.weights)))
    bc = ec.boers
    if belief.version != bc.version + 1 or belief.last_insert is None:
        raise ContractError(
            f"Boers cache out of sync (cache v{bc.version}, belief v{belief.version})")
    k, merged, d_post, d_prior = belief.last_insert
    n = belief.count
    if merged:
        if not (k < bc.count and n == bc.count):
            raise ContractError("Boers cache count mismatch on merge")
    elif not (k == bc.count and n == bc.count + 1):
        raise ContractError("Boers cache count mismatch on insert")

    bc._reserve(n)
    if not merged:
        bc.prior_mean[k] = model.transition_mean(belief.prior_states[k], a)
        if z_new is None:
            z_new = model.observation_density(o, a, belief.states[k])
        bc.z[k] = z_new
    z_k = float(bc.z[k])

    w_old = bc.prior_weight_sum
    w_new = w_old + d_prior
    inv_w_new = 1.0 / w_new
    t3, floors = kernels.boers_update_c(
        belief.states, bc.c, bc.prior_mean, belief.prior_weights, belief.weights,
        n, k, not merged, w_old * inv_w_new, d_prior * inv_w_new, inv_w_new,
        float(model.transition_var))

    bc.term1_num += z_k * d_prior
    bc.term2_num += d_post * math.log(max(z_k, LOG_FLOOR))
    bc.term3_num = t3
    bc.prior_weight_sum = w_new
    bc.post_weight_sum = belief.weight_sum
    bc.count = n
    bc.version = belief.version
    bc.floor_events += floors

    t1 = bc.term1_num * inv_w_new
    if t1 < LOG_FLOOR:
        t1 = LOG_FLOOR
        bc.floor_events += 1
    wp = bc.post_weight_sum
    bc.value = math.log(t1) - bc.term2_num / wp - t3 / wp
    return bc.value


def info_gain(h_prior: float, h_post: float) -> float:
    return h_prior - h_post
