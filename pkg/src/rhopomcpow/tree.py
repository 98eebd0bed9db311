"""Belief-tree arena with Last-Value-Update statistics.

Nodes live in parallel lists indexed by integer id. Belief (history) nodes
carry ``N(h)``, ``V(h)``, the rollout value fixed at creation and the cached
belief-dependent reward ``rho`` of the edge that leads to them; action nodes
carry ``N(ha)`` and ``Q(ha)``.

Count bookkeeping: a non-root belief node is created by a rollout and starts at
``N = 1``; the root starts at ``N = 0``. Afterwards every pass through a node
increments its count, so for expanded nodes ``N(h) = rollout_count +
sum_a N(ha)`` and for every action node ``N(ha) = sum_o N(hao)``.
"""
from collections import Counter
import hashlib
import json


class BeliefTree:
    def __init__(self, gamma: float):
        self.gamma = gamma
        # belief nodes
        self.b_N = []
        self.b_V = []
        self.b_rollout = []
        self.b_rollout_count = []
        self.b_children = []
        self.b_parent = []
        self.b_obs = []
        self.b_belief = []
        self.b_rho = []
        self.b_entropy = []
        self.b_depth = []
        self.b_terminal = []
        # action nodes
        self.a_N = []
        self.a_Q = []
        self.a_parent = []
        self.a_action = []
        self.a_children = []

    @property
    def n_belief_nodes(self) -> int:
        return len(self.b_N)

    @property
    def n_action_nodes(self) -> int:
        return len(self.a_N)

    def add_belief_node(self, parent_action: int, obs, belief, depth: int,
                        terminal: bool = False, rollout_count: int = 1) -> int:
        h = len(self.b_N)
        self.b_N.append(0)
        self.b_V.append(0.0)
        self.b_rollout.append(0.0)
        self.b_rollout_count.append(rollout_count)
        self.b_children.append([])
        self.b_parent.append(parent_action)
        self.b_obs.append(obs)
        self.b_belief.append(belief)
        self.b_rho.append(0.0)
        self.b_entropy.append(0.0)
        self.b_depth.append(depth)
        self.b_terminal.append(terminal)
        if parent_action >= 0:
            self.a_children[parent_action].append(h)
        return h

    def add_action_node(self, h: int, action: int) -> int:
        ha = len(self.a_N)
        self.a_N.append(0)
        self.a_Q.append(0.0)
        self.a_parent.append(h)
        self.a_action.append(action)
        self.a_children.append([])
        self.b_children[h].append(ha)
        return ha

    def set_rollout(self, h: int, value: float):
        self.b_rollout[h] = value
        self.b_V[h] = value
        self.b_N[h] = 1

    # reporting -------------------------------------------------------------
    def stats(self) -> dict:
        depth_hist = Counter(self.b_depth)
        particles = {}
        for h, d in enumerate(self.b_depth):
            b = self.b_belief[h]
            particles.setdefault(d, []).append(0 if b is None else b.count)
        return {
            "belief_nodes": self.n_belief_nodes,
            "action_nodes": self.n_action_nodes,
            "max_depth": max(self.b_depth) if self.b_depth else 0,
            "depth_histogram": {str(d): depth_hist[d] for d in sorted(depth_hist)},
            "particles_per_depth": {
                str(d): {"total": sum(v), "max": max(v), "mean": sum(v) / len(v)}
                for d, v in sorted(particles.items())
            },
        }

    def stats_json(self) -> str:
        return json.dumps(self.stats(), sort_keys=True)

    def digest(self, chosen_action=None) -> str:
        """Hash of the tree shape and visit counts (values excluded)."""
        h = hashlib.sha256()
        h.update(repr((self.b_N, self.b_children, self.b_parent)).encode())
        h.update(repr((self.a_N, self.a_action, self.a_children)).encode())
        h.update(repr(chosen_action).encode())
        return h.hexdigest()


def lvu_update_v(tree: BeliefTree, h: int, ha: int, q_new: float, q_prev: float) -> float:
    """V(h) += [N(ha) Q_new - (N(ha) - 1) Q_prev - V(h)] / N(h); O(1)."""
    n_ha = tree.a_N[ha]
    v = tree.b_V[h]
    v += (n_ha * q_new - (n_ha - 1) * q_prev - v) / tree.b_N[h]
    tree.b_V[h] = v
    return v


def lvu_update_q(tree: BeliefTree, ha: int, hao: int, rho_new: float, rho_prev: float,
                 v_new: float, v_prev: float) -> float:
    n_hao = tree.b_N[hao]
    g = tree.gamma
    q = tree.a_Q[ha]
    q += (n_hao * (rho_new + g * v_new) - (n_hao - 1) * (rho_prev + g * v_prev) - q) / tree.a_N[ha]
    tree.a_Q[ha] = q
    return q


def full_recompute_v(tree: BeliefTree, h: int) -> float:
    kids = tree.b_children[h]
    total = tree.b_rollout_count[h] * tree.b_rollout[h]
    n = tree.b_rollout_count[h]
    for ha in kids:
        total += tree.a_N[ha] * tree.a_Q[ha]
        n += tree.a_N[ha]
    if n == tree.b_rollout_count[h]:
        return tree.b_rollout[h]
    return total / tree.b_N[h]


def full_recompute_q(tree: BeliefTree, ha: int) -> float:
    g = tree.gamma
    total = 0.0
    for hao in tree.a_children[ha]:
        total += tree.b_N[hao] * (tree.b_rho[hao] + g * tree.b_V[hao])
    return total / tree.a_N[ha] if tree.a_N[ha] else 0.0
