# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.  Must stay bit-identical to ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t, uint8_t, int32_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_M53 = 1.0 / 9007199254740992.0


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double next_double(uint64_t* state) noexcept nogil:
    state[0] += GOLDEN
    return <double>(mix64(state[0]) >> 11) * TWO_M53


cdef inline int eval_table(int64_t t, const uint8_t* x, const int64_t* tt_offset,
                           const int64_t* sup_offset, const int64_t* sup_vars,
                           const uint8_t* tt_bits) noexcept nogil:
    cdef int64_t idx = 0
    cdef int64_t m
    for m in range(sup_offset[t], sup_offset[t + 1]):
        idx = (idx << 1) | x[sup_vars[m]]
    return tt_bits[tt_offset[t] + idx]


def backward_induction(const int64_t[::1] indptr, const int64_t[::1] indices,
                       const double[::1] data, const int64_t[:, ::1] succ,
                       const double[::1] reward, double gamma, int64_t horizon,
                       const double[::1] v0, const uint8_t[::1] fixed, bint minimize):
    cdef int64_t S = reward.shape[0]
    cdef int64_t A = succ.shape[0]
    values_arr = np.empty((horizon + 1, S), dtype=np.float64)
    policy_arr = np.zeros((horizon, S), dtype=np.int32)
    w_arr = np.empty(S, dtype=np.float64)
    cdef double[:, ::1] values = values_arr
    cdef int32_t[:, ::1] policy = policy_arr
    cdef double[::1] w = w_arr
    cdef int64_t k, s, jj, a, best_a
    cdef double acc, best, cand
    for s in range(S):
        values[0, s] = v0[s]
    with nogil:
        for k in range(1, horizon + 1):
            for s in range(S):
                acc = 0.0
                for jj in range(indptr[s], indptr[s + 1]):
                    acc = acc + data[jj] * values[k - 1, indices[jj]]
                w[s] = acc
            for s in range(S):
                if fixed[s]:
                    values[k, s] = v0[s]
                    policy[k - 1, s] = 0
                    continue
                best_a = 0
                best = reward[s] + gamma * w[succ[0, s]]
                for a in range(1, A):
                    cand = reward[s] + gamma * w[succ[a, s]]
                    if (cand < best) if minimize else (cand > best):
                        best = cand
                        best_a = a
                values[k, s] = best
                policy[k - 1, s] = <int32_t>best_a
    return values_arr, policy_arr


def simulate_batch(int64_t n, int64_t horizon, const uint8_t[::1] init,
                   const int64_t[::1] pred_offset, const double[::1] pred_cum,
                   const int64_t[::1] pred_table, const double[::1] rate,
                   const int64_t[::1] tt_offset, const int64_t[::1] sup_offset,
                   const int64_t[::1] sup_vars, const uint8_t[::1] tt_bits,
                   const int64_t[::1] reward_tables, const double[::1] reward_values,
                   const int64_t[::1] label_tables,
                   const int32_t[:, ::1] policy, const int64_t[::1] act_node,
                   const uint8_t[::1] act_value, const uint64_t[::1] seeds):
    cdef int64_t n_traj = seeds.shape[0]
    cdef int64_t R = reward_tables.shape[0]
    cdef int64_t L = label_tables.shape[0]
    cdef bint use_policy = policy.shape[0] > 0
    totals_arr = np.zeros(n_traj, dtype=np.float64)
    counts_arr = np.zeros((n_traj, max(L, 1)), dtype=np.int64)
    cur_arr = np.empty(max(n, 1), dtype=np.uint8)
    nxt_arr = np.empty(max(n, 1), dtype=np.uint8)
    cdef double[::1] totals = totals_arr
    cdef int64_t[:, ::1] counts = counts_arr
    cdef uint8_t[::1] cur = cur_arr
    cdef uint8_t[::1] nxt = nxt_arr
    cdef uint8_t* x
    cdef uint8_t* y
    cdef uint8_t* tmp
    cdef uint64_t state
    cdef int64_t k, t, j, m, lo, hi, pick, idx, a
    cdef double total, r, u
    cdef int v
    with nogil:
        for k in range(n_traj):
            state = seeds[k]
            x = &cur[0]
            y = &nxt[0]
            for j in range(n):
                x[j] = init[j]
            total = 0.0
            for t in range(horizon):
                r = 0.0
                for m in range(R):
                    if eval_table(reward_tables[m], x, &tt_offset[0], &sup_offset[0], &sup_vars[0], &tt_bits[0]):
                        r = r + reward_values[m]
                total = total + r
                for m in range(L):
                    if eval_table(label_tables[m], x, &tt_offset[0], &sup_offset[0], &sup_vars[0], &tt_bits[0]):
                        counts[k, m] += 1
                if use_policy:
                    idx = 0
                    for j in range(n):
                        idx = (idx << 1) | x[j]
                    a = policy[horizon - t - 1, idx]
                    if act_node[a] >= 0:
                        x[act_node[a]] = act_value[a]
                for j in range(n):
                    lo = pred_offset[j]
                    hi = pred_offset[j + 1]
                    pick = lo
                    if hi - lo > 1:
                        u = next_double(&state)
                        pick = hi - 1
                        for m in range(lo, hi):
                            if u < pred_cum[m]:
                                pick = m
                                break
                    v = eval_table(pred_table[pick], x, &tt_offset[0], &sup_offset[0], &sup_vars[0], &tt_bits[0])
                    if rate[j] > 0.0:
                        if next_double(&state) < rate[j]:
                            v = v ^ 1
                    y[j] = <uint8_t>v
                tmp = x
                x = y
                y = tmp
            totals[k] = total
    return totals_arr, counts_arr[:, :L]
