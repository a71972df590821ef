"""Pure-Python versions of the compiled kernels.

Same arithmetic, same operation order and the same random draws as
``_ckernels.pyx``; the test suite checks the two for bit equality.
"""
import numpy as np

from .rng import SplitMix64


def backward_induction(indptr, indices, data, succ, reward, gamma, horizon, v0, fixed, minimize):
    S = reward.shape[0]
    A = succ.shape[0]
    values = np.empty((horizon + 1, S))
    policy = np.zeros((horizon, S), dtype=np.int32)
    values[0] = v0
    fixed = fixed.astype(bool)
    for k in range(1, horizon + 1):
        prev = values[k - 1]
        w = [0.0] * S
        for s in range(S):
            acc = 0.0
            for jj in range(indptr[s], indptr[s + 1]):
                acc = acc + float(data[jj]) * float(prev[indices[jj]])
            w[s] = acc
        for s in range(S):
            if fixed[s]:
                values[k, s] = v0[s]
                continue
            best_a = 0
            best = float(reward[s]) + gamma * w[succ[0, s]]
            for a in range(1, A):
                cand = float(reward[s]) + gamma * w[succ[a, s]]
                if (cand < best) if minimize else (cand > best):
                    best = cand
                    best_a = a
            values[k, s] = best
            policy[k - 1, s] = best_a
    return values, policy


def _eval_table(t, x, tt_offset, sup_offset, sup_vars, tt_bits):
    idx = 0
    for m in range(sup_offset[t], sup_offset[t + 1]):
        idx = (idx << 1) | x[sup_vars[m]]
    return tt_bits[tt_offset[t] + idx]


def simulate_batch(n, horizon, init, pred_offset, pred_cum, pred_table, rate,
                   tt_offset, sup_offset, sup_vars, tt_bits,
                   reward_tables, reward_values, label_tables,
                   policy, act_node, act_value, seeds):
    # plain lists: numpy scalar indexing is slower than list indexing
    init = [int(b) for b in init]
    pred_offset = pred_offset.tolist()
    pred_cum = pred_cum.tolist()
    pred_table = pred_table.tolist()
    rate = rate.tolist()
    tables = (tt_offset.tolist(), sup_offset.tolist(), sup_vars.tolist(), tt_bits.tolist())
    reward_tables = reward_tables.tolist()
    reward_values = reward_values.tolist()
    label_tables = label_tables.tolist()
    use_policy = policy.shape[0] > 0
    act_node = act_node.tolist()
    act_value = act_value.tolist()
    L = len(label_tables)
    totals = np.zeros(len(seeds))
    counts = np.zeros((len(seeds), L), dtype=np.int64)
    for k, seed in enumerate(seeds):
        rng = SplitMix64(int(seed))
        x = list(init)
        total = 0.0
        row_counts = [0] * L
        for t in range(horizon):
            r = 0.0
            for tid, val in zip(reward_tables, reward_values):
                if _eval_table(tid, x, *tables):
                    r = r + val
            total = total + r
            for m, tid in enumerate(label_tables):
                if _eval_table(tid, x, *tables):
                    row_counts[m] += 1
            if use_policy:
                idx = 0
                for b in x:
                    idx = (idx << 1) | b
                a = int(policy[horizon - t - 1, idx])
                if act_node[a] >= 0:
                    x[act_node[a]] = act_value[a]
            y = [0] * n
            for j in range(n):
                lo, hi = pred_offset[j], pred_offset[j + 1]
                pick = lo
                if hi - lo > 1:
                    u = rng.random()
                    pick = hi - 1
                    for m in range(lo, hi):
                        if u < pred_cum[m]:
                            pick = m
                            break
                v = _eval_table(pred_table[pick], x, *tables)
                if rate[j] > 0.0 and rng.random() < rate[j]:
                    v ^= 1
                y[j] = v
            x = y
        totals[k] = total
        counts[k] = row_counts
    return totals, counts
