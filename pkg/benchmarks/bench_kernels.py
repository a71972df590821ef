"""Compare the compiled and pure-Python kernels on the bundled IPR model.

    python benchmarks/bench_kernels.py [--horizon 2000] [--traj 200] [--repeat 3]

Each backend runs the same backward induction (repair actions, "combined"
rewards) and the same seeded simulation; the script checks the outputs are
identical and reports the best wall time of ``--repeat`` runs.
"""
import argparse
import time

import numpy as np

from pbnkit import ipr, kernels
from pbnkit.mdp import ActionSpace, build_mdp, max_cumulative_reward
from pbnkit.pbn import reward_vector
from pbnkit.sim import simulate


def best_of(repeat, fn):
    times, result = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=int, default=2000)
    ap.add_argument("--traj", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    pbn = ipr.bundled_model()
    mdp = build_mdp(pbn, ActionSpace.repair(pbn))
    _, policy = max_cumulative_reward(mdp, "combined", args.horizon)
    P = mdp.dtmc.matrix
    vi_args = (P.indptr.astype(np.int64), P.indices.astype(np.int64), P.data, mdp.succ.astype(np.int64),
               reward_vector(pbn, pbn.rewards["combined"]), 1.0, args.horizon, np.zeros(16),
               np.zeros(16, dtype=np.uint8), False)

    backends = kernels.available_backends()
    rows, outputs = [], {}
    for name, impl in backends.items():
        t_vi, (values, _) = best_of(args.repeat, lambda: impl.backward_induction(*vi_args))
        t_sim, stats = best_of(args.repeat, lambda: simulate(pbn, (0, 0, 0, 0), args.horizon, args.traj, 1,
                                                              rewards="combined", policy=policy, backend=impl))
        outputs[name] = (np.asarray(values), stats.rewards)
        steps = args.horizon * args.traj
        rows.append((name, t_vi, t_sim, steps / t_sim))

    print(f"backend   induction[s]   simulation[s]   sim steps/s   (horizon {args.horizon}, {args.traj} trajectories)")
    for name, t_vi, t_sim, rate in rows:
        print(f"{name:<8}  {t_vi:12.4f}   {t_sim:13.4f}   {rate:11.3g}")
    if len(rows) == 2:
        (_, vi_c, sim_c, _), (_, vi_p, sim_p, _) = sorted(rows, key=lambda r: r[0])
        print(f"speedup   {vi_p / vi_c:12.1f}x  {sim_p / sim_c:13.1f}x")
        same = all(np.array_equal(a, b) for a, b in zip(outputs["cython"], outputs["python"]))
        print("outputs identical:", same)
    else:
        print("compiled kernels unavailable; only the Python backend ran")


if __name__ == "__main__":
    main()
