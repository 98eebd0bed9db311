import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rhopomcpow.belief import WeightedParticleBelief
from rhopomcpow.entropy import (EntropyCache, boers_batch, boers_batch_diag, boers_update,
                                info_gain, shannon_batch, shannon_update)
from rhopomcpow.model import ContractError

# frozen values from direct evaluation of -sum p log p
H_1_3 = 0.5623351446188083      # weights {1, 3}
H_2_1 = 0.6365141682948128      # weights {2, 1}
LOG_PEAK = -0.46470802658470023  # -log(1 / (2 pi 0.1))


def test_frozen_values_are_what_they_claim():
    assert H_1_3 == pytest.approx(math.log(4) - 0.75 * math.log(3), abs=1e-15)
    assert H_2_1 == pytest.approx(math.log(3) - (2 / 3) * math.log(2), abs=1e-15)
    assert LOG_PEAK == pytest.approx(math.log(2 * math.pi * 0.1), abs=1e-15)


def test_shannon_batch_examples():
    assert shannon_batch([1, 1, 1, 1]) == pytest.approx(math.log(4), abs=1e-15)
    assert shannon_batch([5.0]) == 0.0
    assert shannon_batch([1.0, 3.0]) == pytest.approx(H_1_3, abs=1e-15)
    with pytest.raises(ContractError):
        shannon_batch([])


def test_shannon_update_examples():
    c = EntropyCache()
    shannon_update(c, 0.0, 1.0, 0.0, 1.0)
    assert c.shannon_value == pytest.approx(0.0, abs=1e-15)
    assert shannon_update(c, 1.0, 2.0, 0.0, 1.0) == pytest.approx(math.log(2), abs=1e-15)
    # merge: particle 0 goes 1 -> 2
    assert shannon_update(c, 2.0, 3.0, 1.0, 2.0) == pytest.approx(H_2_1, abs=1e-15)
    with pytest.raises(ContractError):
        shannon_update(c, 3.0, 0.0, 1.0, 1.0)


def test_belief_tracks_shannon(rng):
    b = WeightedParticleBelief(2, paired=False)
    for i in range(500):
        s = b.states[int(rng.integers(b.count))].copy() if i % 7 == 6 else rng.normal(size=2)
        b.insert(s, float(rng.uniform(0.01, 3)))
        assert abs(b.entropy_cache.shannon_value - shannon_batch(b)) <= 1e-9


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=60))
def test_shannon_bounds(ws):
    h = shannon_batch(ws)
    assert -1e-12 <= h <= math.log(len(ws)) + 1e-12


def naive_boers(belief, a, o, model):
    """Straight transcription of the estimator with explicit loops (test-only oracle)."""
    n = belief.count
    w_prior = [belief.prior_weights[i] for i in range(n)]
    wp = sum(w_prior)
    w_post = [belief.weights[i] for i in range(n)]
    wq = sum(w_post)
    z = [model.observation_density(o, a, belief.states[i]) for i in range(n)]
    t1 = math.log(sum(z[i] * w_prior[i] / wp for i in range(n)))
    t2 = sum(w_post[i] / wq * math.log(z[i]) for i in range(n))
    t3 = 0.0
    for i in range(n):
        c = sum(model.transition_density(belief.states[i], belief.prior_states[j], a)
                * w_prior[j] / wp for j in range(n))
        t3 += w_post[i] / wq * math.log(c)
    return t1 - t2 - t3


def grow_pairs(model, n, rng, a=2, o=None, prior_weights=False):
    o = np.array([1.0, 2.0]) if o is None else o
    b = WeightedParticleBelief(2, paired=True, track_shannon=False)
    prior = model.initial_belief(rng, 40).active_states()
    for _ in range(n):
        s = prior[int(rng.integers(len(prior)))]
        sn = model.transition_sample(s, a, rng)
        z = model.observation_density(o, a, sn)
        pw = float(rng.uniform(0.5, 2.0)) if prior_weights else 1.0
        b.insert(sn, z, s, pw)
        yield b, a, o, z


def test_boers_single_particle_is_minus_log_transition(light_dark):
    b = WeightedParticleBelief(2, paired=True)
    s = np.array([0.2, -0.1])
    b.insert(s + light_dark.actions[3], 0.7, prior_state=s)
    h = boers_batch(b, 3, np.array([0.0, 0.0]), light_dark)
    assert h == pytest.approx(LOG_PEAK, abs=1e-12)
    h_inc = boers_update(b, 3, np.array([0.0, 0.0]), light_dark)
    assert h_inc == pytest.approx(LOG_PEAK, abs=1e-12)


def test_boers_matches_naive(light_dark, rng):
    for b, a, o, _ in grow_pairs(light_dark, 50, rng, prior_weights=True):
        pass
    assert boers_batch(b, a, o, light_dark) == pytest.approx(naive_boers(b, a, o, light_dark),
                                                             rel=1e-10)


def test_boers_incremental_equals_batch_each_step(light_dark, rng):
    for b, a, o, z in grow_pairs(light_dark, 120, rng, prior_weights=True):
        inc = boers_update(b, a, o, light_dark, z_new=z)
        ref = boers_batch(b, a, o, light_dark)
        assert abs(inc - ref) <= 1e-8 * abs(ref)


def test_boers_incremental_with_merges(light_dark, rng):
    b = WeightedParticleBelief(2, paired=True, track_shannon=False)
    o = np.array([0.0, 1.0])
    pts = []
    for i in range(80):
        if i % 5 == 4:
            sn, s = pts[int(rng.integers(len(pts)))]
        else:
            s = rng.normal(size=2)
            sn = light_dark.transition_sample(s, 1, rng)
            pts.append((sn, s))
        b.insert(sn, light_dark.observation_density(o, 1, sn), s, 1.0)
        inc = boers_update(b, 1, o, light_dark)
        assert inc == pytest.approx(boers_batch(b, 1, o, light_dark), rel=1e-8)


def test_boers_desync_is_a_contract_error(light_dark, rng):
    b = WeightedParticleBelief(2, paired=True)
    o = np.zeros(2)
    b.insert([0.0, 0.0], 1.0, [0.0, 0.0])
    boers_update(b, 0, o, light_dark)
    b.insert([1.0, 0.0], 1.0, [0.0, 0.0])
    b.insert([2.0, 0.0], 1.0, [1.0, 0.0])
    with pytest.raises(ContractError):
        boers_update(b, 0, o, light_dark)


def test_boers_needs_pairs(light_dark):
    b = WeightedParticleBelief(2, paired=False)
    b.insert([0.0, 0.0], 1.0)
    with pytest.raises(ContractError):
        boers_batch(b, 0, np.zeros(2), light_dark)


def test_boers_floor_events_reported(light_dark):
    b = WeightedParticleBelief(2, paired=True)
    b.insert([0.0, 0.0], 1.0, [0.0, 0.0])
    b.insert([60.0, 0.0], 1.0, [0.0, 0.0])  # c_i underflows
    _, floors = boers_batch_diag(b, 8, np.zeros(2), light_dark)
    assert floors >= 1


def test_info_gain():
    assert info_gain(1.3, 1.3) == 0.0
    assert info_gain(2.0, 0.5) == 1.5
