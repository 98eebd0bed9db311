import math

import numpy as np
import pytest

from rhopomcpow.envs import STAY, ActiveLocalization, LightDark2D, load_problem, default_map
from rhopomcpow.entropy import shannon_batch
from rhopomcpow.model import ContractError


def test_stay_in_goal(light_dark, rng):
    _, _, r, term = light_dark.step(np.array([0.0, 7.0]), STAY, rng)
    assert (r, term) == (99.0, True)


def test_stay_outside_goal(light_dark, rng):
    _, _, r, term = light_dark.step(np.array([5.0, 0.0]), STAY, rng)
    assert (r, term) == (-101.0, True)


def test_move_is_not_terminal(light_dark, rng):
    _, _, r, term = light_dark.step(np.zeros(2), 0, rng)
    assert (r, term) == (-1.0, False)


def test_collision_penalty(active_loc):
    # obstacle disc at (3, 3), radius 1
    assert active_loc.state_reward(np.array([3.0, 1.5]), 2, np.array([3.0, 2.5])) == -51.0
    assert active_loc.state_reward(np.array([0.0, 0.0]), 2, np.array([0.0, 1.0])) == -1.0


def test_nearest_beacon_examples():
    one = LightDark2D(beacons=[[2.0, 2.0]], x0=[0.0, 0.0], goal=[0.0, 5.0])
    assert one.nearest_beacon(np.array([-9.0, 4.0]))[0] == 0
    two = LightDark2D(beacons=[[1.0, 0.0], [-1.0, 0.0]], x0=[0.0, 0.0], goal=[0.0, 5.0])
    assert two.nearest_beacon(np.zeros(2)) == (0, 1.0)
    assert two.nearest_beacon(np.array([-1.0, 0.0])) == (1, 0.0)


def test_initial_belief_moments(light_dark, rng):
    b = light_dark.initial_belief(rng, 100_000)
    pts = b.active_states()
    assert np.all(np.abs(pts.mean(axis=0) - light_dark.x0) < 0.05)
    assert np.allclose(np.cov(pts.T), 2.5 * np.eye(2), atol=0.125)
    assert shannon_batch(b) == pytest.approx(math.log(100_000), abs=1e-9)


def test_initial_belief_needs_particles(light_dark, rng):
    with pytest.raises(ContractError):
        light_dark.initial_belief(rng, 0)


def test_light_dark_noise_grows_with_distance(light_dark):
    b = light_dark.beacons[0]
    traces = [2 * light_dark.observation_var(b + np.array([d, 0.0])) for d in (0.0, 0.5, 1.0, 2.0)]
    assert all(x < y for x, y in zip(traces, traces[1:]))


def test_active_localization_beacon_gradient():
    m = ActiveLocalization(beacons=[[1.0, 0.0], [0.0, 4.0]], x0=[0.0, 0.0])
    near = m.observation_var(np.array([1.0, 0.0]))
    far = m.observation_var(np.array([0.0, 4.0]))
    assert far < near
    assert near == pytest.approx(0.5) and far == pytest.approx(0.125)


def test_obstacle_free_variant():
    m = ActiveLocalization(beacons=[[1.0, 0.0]], x0=[0.0, 0.0], obstacles=[[0.0, 0.0, 5.0]],
                           obstacle_free=True)
    assert len(m.obstacles) == 0


def test_rollout_edge_cases(light_dark, rng):
    assert light_dark.rollout(np.zeros(2), 0, rng) == 0.0
    # "stay" is only allowed on the last of two steps, and the goal is out of reach
    far = LightDark2D(beacons=[[0.0, 0.0]], x0=[0.0, 0.0], goal=[0.0, 5.0], discount=1.0)
    vals = {far.rollout(np.zeros(2), 2, np.random.default_rng(i)) for i in range(50)}
    assert vals == {-2.0, -102.0}


def test_rollout_never_stays_early():
    m = LightDark2D(beacons=[[0.0, 0.0]], x0=[0.0, 0.0], goal=[0.0, 5.0], discount=1.0)
    rng = np.random.default_rng(0)
    for depth in (3, 9):
        cut = depth - (depth + 2) // 3
        for step in range(cut):
            assert all(m.rollout_action(step, depth, rng) != STAY for _ in range(200))


def test_packaged_maps_load():
    for name in ("light_dark", "active_localization"):
        m = load_problem(name)
        assert m.to_config()["problem"] == name
        assert load_problem(m.to_config()).to_config() == m.to_config()
        assert default_map(name)["step_cap"] == 50


def test_unknown_problem():
    with pytest.raises(ContractError):
        load_problem({"problem": "maze", "beacons": [[0, 0]], "x0": [0, 0]})
