"""Action / observation selection strategies and the visitation lower bound.

Two families:

* DPW (progressive widening + UCB), the rule POMCPOW uses.
* The consistent strategies: actions expand when ``floor(n^alpha_a)``
  increments, otherwise maximise ``Q + sqrt(n^e(d) / N(ha))``; observations
  expand when ``floor(n^alpha_o)`` increments, otherwise the least visited
  child is revisited.

For the consistent pair the child-visit guarantees are

    f(i) = i^(1 / (alpha_a (1 - alpha_a)))     F(n) = n^(e (1 - alpha_a)) / 4
    g(i) = ceil((i + 1)^(1 / alpha_o))         G(n) = n / floor(n)^alpha_o - 1

and composing them along a path gives the deterministic bound ``K_tau(t)`` on
the visit count of a depth-``tau`` node after ``t`` root iterations.
"""
from dataclasses import dataclass, asdict
import math

# Selection calls at a node are counted including the call being made, so the
# first visit sees n = 1.


@dataclass
class DpwParams:
    c: float = 1.0
    k_a: float = 1.0
    alpha_a: float = 0.5
    k_o: float = 1.0
    alpha_o: float = 0.5
    widen_actions: bool = True

    def __post_init__(self):
        for name in ("alpha_a", "alpha_o"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")
        if self.k_a <= 0 or self.k_o <= 0:
            raise ValueError("widening constants must be positive")

    def to_dict(self):
        return {"kind": "dpw", **asdict(self)}


@dataclass
class AugerParams:
    alpha_a: float = 0.5
    alpha_o: float = 0.5
    e: float | tuple = 0.5

    def __post_init__(self):
        for name in ("alpha_a", "alpha_o"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must be in (0, 1), got {v}")
        exps = self.e if isinstance(self.e, (tuple, list)) else (self.e,)
        if any(x <= 0 for x in exps):
            raise ValueError("exploration exponents e(d) must be positive")
        if isinstance(self.e, list):
            self.e = tuple(self.e)

    def e_at(self, depth: int) -> float:
        """Exponent for action selection at tree depth ``depth`` (root = 0)."""
        if isinstance(self.e, tuple):
            return self.e[min(depth, len(self.e) - 1)]
        return self.e

    def to_dict(self):
        d = asdict(self)
        d["e"] = list(self.e) if isinstance(self.e, tuple) else self.e
        return {"kind": "auger", **d}


def params_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", "dpw")
    if kind == "dpw":
        return DpwParams(**d)
    if kind == "auger":
        return AugerParams(**d)
    raise ValueError(f"unknown selection kind {kind!r}")


def floor_pow(n: float, alpha: float) -> int:
    """floor(n ** alpha), robust to pow rounding just below an integer."""
    if n <= 0:
        return 0
    r = math.floor(n ** alpha)
    if (r + 1) ** (1.0 / alpha) <= n * (1.0 + 1e-12):
        r += 1
    return r


def expands(n: int, alpha: float) -> bool:
    """True when floor(n^alpha) > floor((n - 1)^alpha)."""
    return floor_pow(n, alpha) > floor_pow(n - 1, alpha)


# --------------------------------------------------------------------------
# scoring primitives
# --------------------------------------------------------------------------

def ucb_index(child_n, child_q, n_parent: int, c: float) -> int:
    """argmax Q + c sqrt(log n / N); unvisited children first, ties to lowest index."""
    log_n = math.log(n_parent) if n_parent > 1 else 0.0
    best = -1
    best_score = -math.inf
    for i in range(len(child_n)):
        n_i = child_n[i]
        if n_i == 0:
            return i
        score = child_q[i] + c * math.sqrt(log_n / n_i)
        if score > best_score:
            best_score = score
            best = i
    return best


def auger_index(child_n, child_q, n_parent: int, e: float) -> int:
    """argmax Q + sqrt(n^e / N); ties to lowest index."""
    scale = n_parent ** e
    best = -1
    best_score = -math.inf
    for i in range(len(child_n)):
        n_i = child_n[i]
        if n_i == 0:
            return i
        score = child_q[i] + math.sqrt(scale / n_i)
        if score > best_score:
            best_score = score
            best = i
    return best


def least_visited_index(child_n) -> int:
    best = 0
    for i in range(1, len(child_n)):
        if child_n[i] < child_n[best]:
            best = i
    return best


# --------------------------------------------------------------------------
# tree-level selection
# --------------------------------------------------------------------------

def _untried_action(tree, h, n_actions, rng):
    used = {tree.a_action[ha] for ha in tree.b_children[h]}
    free = [a for a in range(n_actions) if a not in used]
    if not free:
        return None
    return free[int(rng.integers(len(free)))] if len(free) > 1 else free[0]


def selection_count(tree, h) -> int:
    """Selection calls made at belief node ``h`` so far, plus the current one."""
    n = 1
    for ha in tree.b_children[h]:
        n += tree.a_N[ha]
    return n


def dpw_action_select(tree, h: int, params: DpwParams, rng, n_actions: int) -> int:
    """Progressive widening (or, with ``widen_actions`` off, every action in index
    order) followed by UCB; same choice as ``ucb_index`` on the child lists."""
    kids = tree.b_children[h]
    if not params.widen_actions:
        if len(kids) < n_actions:
            # unvisited children win UCB in index order, so create them lazily
            return tree.add_action_node(h, len(kids))
    else:
        n = selection_count(tree, h)
        if len(kids) <= params.k_a * n ** params.alpha_a:
            a = _untried_action(tree, h, n_actions, rng)
            if a is not None:
                return tree.add_action_node(h, a)
    if not kids:
        raise ValueError("no action available at this node")
    a_n = tree.a_N
    a_q = tree.a_Q
    n = 1
    for x in kids:
        n += a_n[x]
    log_n = math.log(n) if n > 1 else 0.0
    c = params.c
    best = -1
    best_score = -math.inf
    for x in kids:
        n_i = a_n[x]
        if n_i == 0:
            return x
        score = a_q[x] + c * math.sqrt(log_n / n_i)
        if score > best_score:
            best_score = score
            best = x
    return best


def auger_action_select(tree, h: int, params: AugerParams, rng, n_actions: int) -> int:
    kids = tree.b_children[h]
    n = selection_count(tree, h)
    if expands(n, params.alpha_a) or not kids:
        a = _untried_action(tree, h, n_actions, rng)
        if a is not None:
            return tree.add_action_node(h, a)
    e = params.e_at(tree.b_depth[h])
    a_n = tree.a_N
    a_q = tree.a_Q
    i = auger_index([a_n[x] for x in kids], [a_q[x] for x in kids], n, e)
    return kids[i]


def dpw_observation_select(tree, ha: int, params: DpwParams, model, s_next, rng):
    """Returns ``(child, obs)``; ``child == -1`` means a new branch for ``obs``."""
    kids = tree.a_children[ha]
    if len(kids) <= params.k_o * tree.a_N[ha] ** params.alpha_o:
        return -1, model.observation_sample(tree.a_action[ha], s_next, rng)
    return kids[int(rng.integers(len(kids)))], None


def auger_observation_select(tree, ha: int, params: AugerParams, model, s_next, rng):
    kids = tree.a_children[ha]
    n = tree.a_N[ha] + 1
    if expands(n, params.alpha_o) or not kids:
        return -1, model.observation_sample(tree.a_action[ha], s_next, rng)
    b_n = tree.b_N
    return kids[least_visited_index([b_n[x] for x in kids])], None


# --------------------------------------------------------------------------
# consistency functions and the visitation bound
# --------------------------------------------------------------------------

def f_action(i: float, alpha_a: float) -> float:
    return i ** (1.0 / (alpha_a * (1.0 - alpha_a)))


def g_observation(i: int, alpha_o: float) -> int:
    return math.ceil((i + 1) ** (1.0 / alpha_o) - 1e-9)


def F_action(n: float, alpha_a: float, e: float) -> float:
    if n <= 0:
        return 0.0
    return 0.25 * n ** (e * (1.0 - alpha_a))


def G_observation(n: float, alpha_o: float) -> float:
    if n < 1:
        return 0.0
    return n / math.floor(n) ** alpha_o - 1.0


def _int_floor(x: float) -> int:
    """Visit counts are integers, so N >= x implies N >= ceil(x)."""
    return max(0, math.ceil(x - 1e-9))


def consistency_bound(tau: int, t: float, params: AugerParams, action_prefix: bool = False,
                      visit_offset: int = 0) -> float:
    """K_tau(t), or K_tau^-(t) = F(K_{tau-1}(t)) when ``action_prefix`` is set.

    The composition starts at the root with K_0(t) = t and alternates
    ``F`` (into an action node) and ``G`` (into an observation node). Real
    intermediate bounds are rounded up to the next integer before the next
    step. ``visit_offset`` is subtracted from non-root belief-node bounds
    before ``F`` is applied, for trees whose belief nodes spend visits
    without making a selection (the creation rollout).
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if action_prefix and tau == 0:
        raise ValueError("an action prefix needs tau >= 1")
    x = float(t)
    for level in range(tau):
        n_belief = _int_floor(x) - (visit_offset if level > 0 else 0)
        x = F_action(n_belief, params.alpha_a, params.e_at(level))
        if action_prefix and level == tau - 1:
            return x
        x = G_observation(_int_floor(x), params.alpha_o)
    return x


def invert_bound(target: float, bound_fn, t_max: int = 10 ** 12):
    """Smallest integer t >= 1 with bound_fn(t) >= target, or None if beyond t_max."""
    if bound_fn(1) >= target:
        return 1
    if bound_fn(t_max) < target:
        return None
    lo, hi = 1, 2
    while bound_fn(hi) < target:
        lo, hi = hi, min(hi * 2, t_max)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bound_fn(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def eligibility_threshold(indices, params: AugerParams, visit_offset: int = 0,
                          t_max: int = 10 ** 12):
    """k(i_0, j_1, i_1, ...): the iteration count after which the bound applies.

    ``indices`` alternates 1-based action and observation child indices along
    the path from the root. Returns None when some inverse does not exist on
    ``[1, t_max]``.
    """
    k = 1
    for m, idx in enumerate(indices):
        level = m // 2
        if m % 2 == 0:
            target = f_action(idx, params.alpha_a) + (visit_offset if level > 0 else 0)
            fn = lambda t, lv=level: consistency_bound(lv, t, params, visit_offset=visit_offset)
        else:
            target = g_observation(idx, params.alpha_o)
            fn = lambda t, lv=level: consistency_bound(lv + 1, t, params, action_prefix=True,
                                                       visit_offset=visit_offset)
        t_need = invert_bound(target, fn, t_max)
        if t_need is None:
            return None
        k = max(k, t_need)
    return k


# --------------------------------------------------------------------------
# empirical checks on a grown tree
# --------------------------------------------------------------------------

def _paths(tree):
    """Yield (node_kind, node_id, indices, tau) for every node below the root."""
    stack = [(0, ())]
    while stack:
        h, idx = stack.pop()
        for i, ha in enumerate(tree.b_children[h], start=1):
            a_idx = idx + (i,)
            yield "action", ha, a_idx, len(a_idx) // 2 + 1
            for j, hao in enumerate(tree.a_children[ha], start=1):
                o_idx = a_idx + (j,)
                yield "belief", hao, o_idx, len(o_idx) // 2
                stack.append((hao, o_idx))


def path_label(indices) -> str:
    return "".join(("a" if m % 2 == 0 else "o") + str(v) for m, v in enumerate(indices))


def check_visitation_bounds(tree, params: AugerParams, t: int, visit_offset: int = 1):
    """Compare every realised node's count against floor(K) once past its threshold."""
    rows = []
    for kind, node, indices, tau in _paths(tree):
        if kind == "action":
            observed = tree.a_N[node]
            bound = consistency_bound(tau, t, params, action_prefix=True, visit_offset=visit_offset)
        else:
            observed = tree.b_N[node]
            bound = consistency_bound(tau, t, params, visit_offset=visit_offset)
        k = eligibility_threshold(indices, params, visit_offset=visit_offset)
        eligible = k is not None and t >= k
        floor_k = math.floor(bound + 1e-12)
        rows.append({
            "path": path_label(indices),
            "tau": tau,
            "t": t,
            "N_observed": observed,
            "K_bound": bound,
            "threshold_k": "" if k is None else k,
            "eligible": eligible,
            "vacuous": bound < 1.0,
            "pass": (not eligible) or observed >= floor_k,
        })
    return rows


def check_definition_one(tree, params: AugerParams):
    """Child-visit guarantees of both strategies at every node; returns violations."""
    bad = []
    for h in range(tree.n_belief_nodes):
        kids = tree.b_children[h]
        n = selection_count(tree, h) - 1
        e = params.e_at(tree.b_depth[h])
        for i, ha in enumerate(kids, start=1):
            if n >= f_action(i, params.alpha_a):
                need = F_action(n, params.alpha_a, e)
                if tree.a_N[ha] < need:
                    bad.append(("action", h, i, n, tree.a_N[ha], need))
    for ha in range(tree.n_action_nodes):
        n = tree.a_N[ha]
        for j, hao in enumerate(tree.a_children[ha], start=1):
            if n >= g_observation(j, params.alpha_o):
                need = G_observation(n, params.alpha_o)
                if tree.b_N[hao] < need:
                    bad.append(("observation", ha, j, n, tree.b_N[hao], need))
    return bad
