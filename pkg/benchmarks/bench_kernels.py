"""Time each hot kernel under numba and under its numpy/python fallback.

Kernel timings run both variants in one process. ``--planner`` adds an
end-to-end planning call in two subprocesses, one with RHOPOMCPOW_NO_JIT=1.
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from rhopomcpow import kernels
from rhopomcpow.envs import STAY, load_problem


def best_of(fn, repeat):
    fn()  # warm-up (and compilation)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(n, rng):
    post = rng.normal(size=(n, 2))
    prior = post + 0.3 * rng.normal(size=(n, 2))
    wq = rng.uniform(0.1, 2, n)
    wp = rng.uniform(0.5, 2, n)
    z = rng.uniform(1e-3, 1, n)
    c = rng.uniform(0.1, 1, n + 1)
    w = rng.uniform(0.01, 2, n)
    old = np.concatenate([[0.0], np.cumsum(w[:-1])])
    new = np.cumsum(w)
    out = np.zeros(n)
    tree = np.zeros(n + 1)
    m = load_problem("light_dark")
    u = rng.random(20)
    zz = rng.standard_normal((20, 2))
    roll = (0.0, 0.0, 20, m.discount, m.actions, STAY, 0.3, u, zz, -1.0, True, 0.0, 3.0, 1.0,
            100.0, -100.0, m.obstacles, -50.0)
    return {
        "boers_batch": (lambda k: lambda: k(post, wq, prior, wp, z, 0.1),
                        kernels.boers_batch_jit, kernels.boers_batch_numpy),
        "boers_update_c": (lambda k: lambda: k(post, c.copy(), prior, wp, wq, n, n - 1, True,
                                               0.9, 0.1, 0.05, 0.1),
                           kernels.boers_update_c_jit, kernels.boers_update_c_numpy),
        "shannon_batch": (lambda k: lambda: k(w, n),
                          kernels.shannon_batch_jit, kernels.shannon_batch_numpy),
        "shannon_replay": (lambda k: lambda: k(old, new, np.zeros(n), w, out),
                           kernels.shannon_replay_jit, kernels.shannon_replay_py),
        "fenwick_build": (lambda k: lambda: k(tree, w, n),
                          kernels.fenwick_build_jit, kernels.fenwick_build_py),
        "nav_rollout": (lambda k: lambda: k(*roll),
                        kernels.nav_rollout_jit, kernels.nav_rollout_py),
    }


PLAN_SNIPPET = """
import time, numpy as np
from rhopomcpow import _accel, load_problem, plan, tuned_config
m = load_problem("light_dark")
cfg = tuned_config("rho_pomcpow", max_depth=10, iterations={it})
b = m.initial_belief(np.random.default_rng(0), 200)
plan(b, tuned_config("rho_pomcpow", max_depth=10, iterations=20), m, np.random.default_rng(0))
t0 = time.perf_counter()
plan(b, cfg, m, np.random.default_rng(1))
print(_accel.backend_name(), time.perf_counter() - t0)
"""


def planner_times(iterations):
    res = {}
    for flag in ("0", "1"):
        env = dict(os.environ, RHOPOMCPOW_NO_JIT=flag)
        out = subprocess.run([sys.executable, "-c", PLAN_SNIPPET.format(it=iterations)],
                             env=env, capture_output=True, text=True, check=True).stdout.split()
        res[out[0]] = float(out[1])
    return res


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", type=int, default=1000, help="particles per kernel call")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--planner", action="store_true", help="also time a full planning call")
    ap.add_argument("--iterations", type=int, default=500)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    rows = []
    for name, (make, fast, slow) in kernel_cases(args.n, rng).items():
        t_jit = best_of(make(fast), args.repeat)
        t_np = best_of(make(slow), args.repeat)
        rows.append({"kernel": name, "numba_s": t_jit, "numpy_s": t_np,
                     "ratio": t_np / max(t_jit, 1e-12)})
    result = {"n": args.n, "kernels": rows}
    if args.planner:
        result["planner_seconds"] = planner_times(args.iterations)
    if args.json:
        print(json.dumps(result, indent=2))
        return
    print(f"{'kernel':16s} {'numba (s)':>12s} {'numpy (s)':>12s} {'ratio':>8s}")
    for r in rows:
        print(f"{r['kernel']:16s} {r['numba_s']:12.6f} {r['numpy_s']:12.6f} {r['ratio']:8.1f}")
    if args.planner:
        ps = result["planner_seconds"]
        print(f"plan({args.iterations} it): numba {ps['numba']:.3f}s, numpy {ps['numpy']:.3f}s")


if __name__ == "__main__":
    main()
