import pytest
from hypothesis import given, settings, strategies as st

from rhopomcpow.harness import lvu_oracle
from rhopomcpow.tree import (BeliefTree, full_recompute_q, full_recompute_v, lvu_update_q,
                             lvu_update_v)


def small_tree(gamma=0.9):
    t = BeliefTree(gamma)
    root = t.add_belief_node(-1, None, None, 0, rollout_count=0)
    return t, root


def test_first_visit_v_matches_full():
    t, root = small_tree()
    ha = t.add_action_node(root, 0)
    t.a_N[ha] = 1
    t.a_Q[ha] = 3.5
    t.b_N[root] = 1
    assert lvu_update_v(t, root, ha, 3.5, 0.0) == pytest.approx(full_recompute_v(t, root))
    assert t.b_V[root] == 3.5


def test_single_child_first_visit_q():
    t, root = small_tree(gamma=0.9)
    ha = t.add_action_node(root, 0)
    hao = t.add_belief_node(ha, None, None, 1)
    t.set_rollout(hao, 2.0)
    t.b_rho[hao] = 1.0
    t.a_N[ha] = 1
    assert lvu_update_q(t, ha, hao, 1.0, 0.0, 2.0, 0.0) == pytest.approx(1.0 + 0.9 * 2.0)


def test_gamma_zero_uses_rewards_only():
    t, root = small_tree(gamma=0.0)
    ha = t.add_action_node(root, 0)
    a = t.add_belief_node(ha, None, None, 1)
    b = t.add_belief_node(ha, None, None, 1)
    for node, rho in ((a, 2.0), (b, 4.0)):
        t.set_rollout(node, 1000.0)
        t.b_rho[node] = rho
        t.a_N[ha] += 1
        lvu_update_q(t, ha, node, rho, 0.0, 1000.0, 0.0)
    assert t.a_Q[ha] == pytest.approx(3.0)


def test_stable_q_only_renormalises():
    # V <- V + (N(ha) q - (N(ha)-1) q - V)/N(h) = V + (q - V)/N(h)
    t, root = small_tree()
    ha = t.add_action_node(root, 0)
    t.b_V[root] = 1.0
    t.b_N[root] = 4
    t.a_N[ha] = 3
    assert lvu_update_v(t, root, ha, 5.0, 5.0) == pytest.approx(1.0 + (5.0 - 1.0) / 4)


def test_leaf_full_recompute_is_rollout():
    t, root = small_tree()
    ha = t.add_action_node(root, 0)
    leaf = t.add_belief_node(ha, None, None, 1)
    t.set_rollout(leaf, -7.25)
    assert full_recompute_v(t, leaf) == -7.25


def test_symmetric_children():
    t, root = small_tree()
    for a in range(2):
        ha = t.add_action_node(root, a)
        t.a_N[ha] = 5
        t.a_Q[ha] = 2.0
    t.b_N[root] = 10
    assert full_recompute_v(t, root) == pytest.approx(2.0)


def test_stale_replay_is_detected():
    t, root = small_tree()
    ha = t.add_action_node(root, 0)
    hao = t.add_belief_node(ha, None, None, 1)
    t.set_rollout(hao, 1.0)
    t.b_rho[hao] = 2.0
    t.a_N[ha] = 1
    lvu_update_q(t, ha, hao, 2.0, 0.0, 1.0, 0.0)
    # second visit: the reward drifts from 2 to 3
    t.b_N[hao] = 2
    t.a_N[ha] = 2
    t.b_rho[hao] = 3.0
    lvu_update_q(t, ha, hao, 3.0, 2.0, 1.0, 1.0)
    assert t.a_Q[ha] == pytest.approx(full_recompute_q(t, ha))
    lvu_update_q(t, ha, hao, 3.0, 2.0, 1.0, 1.0)  # same delta applied twice
    assert abs(t.a_Q[ha] - full_recompute_q(t, ha)) > 1e-6


def test_lvu_oracle_short():
    res = lvu_oracle(n_updates=5_000, seed=3)
    assert res["updates"] >= 5_000
    assert res["max_abs_error"] <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.floats(0.0, 1.0))
def test_lvu_property(seed, depth, gamma):
    assert lvu_oracle(n_updates=300, seed=seed, depth=depth, gamma=gamma)["max_abs_error"] <= 1e-9


def test_digest_ignores_values_but_not_counts():
    t1, r1 = small_tree()
    t2, r2 = small_tree()
    t1.add_action_node(r1, 0)
    t2.add_action_node(r2, 0)
    t2.a_Q[0] = 99.0
    assert t1.digest() == t2.digest()
    t2.a_N[0] = 1
    assert t1.digest() != t2.digest()


def test_stats_json_shape():
    t, root = small_tree()
    ha = t.add_action_node(root, 0)
    t.add_belief_node(ha, None, None, 1)
    s = t.stats()
    assert s["belief_nodes"] == 2 and s["action_nodes"] == 1
    assert s["depth_histogram"] == {"0": 1, "1": 1}
