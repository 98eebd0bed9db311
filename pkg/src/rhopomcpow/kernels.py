"""Hot numeric kernels.

Every kernel exists twice: a loop implementation compiled with numba, and a
fallback used when ``RHOPOMCPOW_NO_JIT=1``. For the O(N) / O(N^2) entropy
kernels the fallback is vectorised numpy; for the short sequential loops
(Fenwick tree walks, rollouts) it is the same function run by the interpreter.
The public names at the bottom of the module are bound to whichever backend is
active; the ``*_jit`` / ``*_numpy`` / ``*_py`` variants stay importable so the
two paths can be checked against each other.
"""
import math

import numpy as np

from ._accel import JIT_ENABLED, jit

LOG_FLOOR = 1e-300
_CHUNK = 256


# --------------------------------------------------------------------------
# Boers estimator
# --------------------------------------------------------------------------

def _boers_batch_loops(post, w_post, prior_mean, w_prior, z, var):
    n = post.shape[0]
    d = post.shape[1]
    norm = (2.0 * math.pi * var) ** (-0.5 * d)
    half_inv = 0.5 / var
    w_sum = 0.0
    wp_sum = 0.0
    for i in range(n):
        w_sum += w_prior[i]
        wp_sum += w_post[i]
    floors = 0
    t1 = 0.0
    t2 = 0.0
    t3 = 0.0
    for i in range(n):
        t1 += z[i] * w_prior[i]
        zi = z[i]
        if zi < LOG_FLOOR:
            zi = LOG_FLOOR
            floors += 1
        t2 += w_post[i] * math.log(zi)
        acc = 0.0
        for j in range(n):
            r2 = 0.0
            for k in range(d):
                diff = post[i, k] - prior_mean[j, k]
                r2 += diff * diff
            acc += math.exp(-r2 * half_inv) * w_prior[j]
        ci = acc * norm / w_sum
        if ci < LOG_FLOOR:
            ci = LOG_FLOOR
            floors += 1
        t3 += w_post[i] * math.log(ci)
    t1 = t1 / w_sum
    if t1 < LOG_FLOOR:
        t1 = LOG_FLOOR
        floors += 1
    return math.log(t1) - t2 / wp_sum - t3 / wp_sum, floors


def _pairwise_c_numpy(post, prior_mean, w_prior, var):
    """Unnormalised mixture sums c_i * W for every row of ``post``."""
    n = post.shape[0]
    half_inv = 0.5 / var
    out = np.empty(n)
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        diff = post[start:stop, None, :] - prior_mean[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", diff, diff)
        out[start:stop] = np.exp(-r2 * half_inv) @ w_prior
    return out


def _boers_batch_numpy(post, w_post, prior_mean, w_prior, z, var):
    d = post.shape[1]
    norm = (2.0 * math.pi * var) ** (-0.5 * d)
    w_sum = float(w_prior.sum())
    wp_sum = float(w_post.sum())
    c = _pairwise_c_numpy(post, prior_mean, w_prior, var) * (norm / w_sum)
    floors = int(np.count_nonzero(c < LOG_FLOOR)) + int(np.count_nonzero(z < LOG_FLOOR))
    t1 = float(z @ w_prior) / w_sum
    if t1 < LOG_FLOOR:
        t1 = LOG_FLOOR
        floors += 1
    t2 = float(w_post @ np.log(np.maximum(z, LOG_FLOOR)))
    t3 = float(w_post @ np.log(np.maximum(c, LOG_FLOOR)))
    return math.log(t1) - t2 / wp_sum - t3 / wp_sum, floors


def _boers_update_c_loops(post, c, prior_mean, w_prior, w_post, n, k, is_new,
                          scale, add_w, inv_w_new, var):
    """Rescale cached c_i, add the new prior particle's contribution, build c_k.

    Returns ``(sum_i w'_i log c_i, floor_events)`` over the first ``n`` entries.
    """
    d = post.shape[1]
    norm = (2.0 * math.pi * var) ** (-0.5 * d)
    half_inv = 0.5 / var
    n_old = n - 1 if is_new else n
    coef = norm * add_w
    for i in range(n_old):
        r2 = 0.0
        for m in range(d):
            diff = post[i, m] - prior_mean[k, m]
            r2 += diff * diff
        c[i] = scale * c[i] + coef * math.exp(-r2 * half_inv)
    if is_new:
        acc = 0.0
        for j in range(n):
            r2 = 0.0
            for m in range(d):
                diff = post[k, m] - prior_mean[j, m]
                r2 += diff * diff
            acc += math.exp(-r2 * half_inv) * w_prior[j]
        c[k] = acc * norm * inv_w_new
    floors = 0
    t3 = 0.0
    for i in range(n):
        ci = c[i]
        if ci < LOG_FLOOR:
            ci = LOG_FLOOR
            floors += 1
        t3 += w_post[i] * math.log(ci)
    return t3, floors


def _boers_update_c_numpy(post, c, prior_mean, w_prior, w_post, n, k, is_new,
                          scale, add_w, inv_w_new, var):
    d = post.shape[1]
    norm = (2.0 * math.pi * var) ** (-0.5 * d)
    half_inv = 0.5 / var
    n_old = n - 1 if is_new else n
    if n_old:
        diff = post[:n_old] - prior_mean[k]
        r2 = np.einsum("ij,ij->i", diff, diff)
        c[:n_old] = scale * c[:n_old] + (norm * add_w) * np.exp(-r2 * half_inv)
    if is_new:
        diff = post[k] - prior_mean[:n]
        r2 = np.einsum("ij,ij->i", diff, diff)
        c[k] = float(np.exp(-r2 * half_inv) @ w_prior[:n]) * norm * inv_w_new
    cc = c[:n]
    floors = int(np.count_nonzero(cc < LOG_FLOOR))
    t3 = float(w_post[:n] @ np.log(np.maximum(cc, LOG_FLOOR)))
    return t3, floors


# --------------------------------------------------------------------------
# Fenwick tree over particle weights (O(log N) weighted sampling)
# --------------------------------------------------------------------------

def _fenwick_add(tree, i, delta):
    size = tree.shape[0] - 1
    j = i + 1
    while j <= size:
        tree[j] += delta
        j += j & (-j)


def _fenwick_search(tree, target):
    """Smallest 0-based index whose inclusive prefix sum exceeds ``target``."""
    size = tree.shape[0] - 1
    step = 1
    while step * 2 <= size:
        step *= 2
    pos = 0
    while step > 0:
        nxt = pos + step
        if nxt <= size and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        step //= 2
    return pos


def _fenwick_build(tree, weights, n):
    for j in range(tree.shape[0]):
        tree[j] = 0.0
    size = tree.shape[0] - 1
    for i in range(n):
        tree[i + 1] += weights[i]
    for j in range(1, size + 1):
        parent = j + (j & (-j))
        if parent <= size:
            tree[parent] += tree[j]


# --------------------------------------------------------------------------
# Rollout for the beacon-navigation benchmarks
# --------------------------------------------------------------------------

def _nav_rollout(x, y, depth, gamma, actions, stay_idx, sigma, u, z,
                 step_cost, has_goal, gx, gy, gr, goal_reward, fail_reward,
                 obstacles, collision_penalty):
    """Random-walk rollout; "stay" is only eligible in the final third."""
    n_act = actions.shape[0]
    allow_stay_from = depth - (depth + 2) // 3
    total = 0.0
    disc = 1.0
    for k in range(depth):
        if k >= allow_stay_from:
            idx = int(u[k] * n_act)
            if idx >= n_act:
                idx = n_act - 1
        else:
            idx = int(u[k] * (n_act - 1))
            if idx >= n_act - 1:
                idx = n_act - 2
            if idx >= stay_idx:
                idx += 1
        nx = x + actions[idx, 0] + sigma * z[k, 0]
        ny = y + actions[idx, 1] + sigma * z[k, 1]
        r = step_cost
        for m in range(obstacles.shape[0]):
            dx = nx - obstacles[m, 0]
            dy = ny - obstacles[m, 1]
            if dx * dx + dy * dy <= obstacles[m, 2] * obstacles[m, 2]:
                r += collision_penalty
                break
        if idx == stay_idx:
            if has_goal:
                dx = x - gx
                dy = y - gy
                if dx * dx + dy * dy <= gr * gr:
                    r += goal_reward
                else:
                    r += fail_reward
            total += disc * r
            break
        total += disc * r
        disc *= gamma
        x = nx
        y = ny
    return total


# --------------------------------------------------------------------------
# Shannon entropy
# --------------------------------------------------------------------------

def _shannon_batch_loops(w, n):
    total = 0.0
    for i in range(n):
        total += w[i]
    h = 0.0
    for i in range(n):
        if w[i] > 0.0:
            p = w[i] / total
            h -= p * math.log(p)
    return h


def _shannon_batch_numpy(w, n):
    p = w[:n] / w[:n].sum()
    p = p[p > 0.0]
    return float(-(p @ np.log(p)))


def _shannon_replay(old_sums, new_sums, w_old, w_new, out):
    """Run the O(1) update over a whole insertion sequence; out[t] = H after step t."""
    wlogw = 0.0
    h = 0.0
    for t in range(len(new_sums)):
        a = w_new[t] * math.log(w_new[t]) if w_new[t] > 0.0 else 0.0
        b = w_old[t] * math.log(w_old[t]) if w_old[t] > 0.0 else 0.0
        delta = a - b
        wlogw += delta
        W = old_sums[t]
        Wn = new_sums[t]
        if W <= 0.0:
            h = -wlogw / Wn + math.log(Wn)
        else:
            h = (W / Wn) * (h - math.log(W)) - delta / Wn + math.log(Wn)
        out[t] = h
    return h


boers_batch_jit = jit(_boers_batch_loops)
boers_update_c_jit = jit(_boers_update_c_loops)
fenwick_add_jit = jit(_fenwick_add)
fenwick_search_jit = jit(_fenwick_search)
fenwick_build_jit = jit(_fenwick_build)
nav_rollout_jit = jit(_nav_rollout)
shannon_batch_jit = jit(_shannon_batch_loops)
shannon_replay_jit = jit(_shannon_replay)

boers_batch_numpy = _boers_batch_numpy
boers_update_c_numpy = _boers_update_c_numpy
fenwick_add_py = _fenwick_add
fenwick_search_py = _fenwick_search
fenwick_build_py = _fenwick_build
nav_rollout_py = _nav_rollout
shannon_batch_numpy = _shannon_batch_numpy
shannon_replay_py = _shannon_replay

if JIT_ENABLED:
    boers_batch = boers_batch_jit
    boers_update_c = boers_update_c_jit
    fenwick_add = fenwick_add_jit
    fenwick_search = fenwick_search_jit
    fenwick_build = fenwick_build_jit
    nav_rollout = nav_rollout_jit
    shannon_batch = shannon_batch_jit
    shannon_replay = shannon_replay_jit
else:
    boers_batch = boers_batch_numpy
    boers_update_c = boers_update_c_numpy
    fenwick_add = fenwick_add_py
    fenwick_search = fenwick_search_py
    fenwick_build = fenwick_build_py
    nav_rollout = nav_rollout_py
    shannon_batch = shannon_batch_numpy
    shannon_replay = shannon_replay_py
