"""Seeded Monte Carlo trajectories of a PBN.

Per step: the occupied state earns its reward and counts toward label
occupancy, the policy's intervention (if any) is applied, then the network
takes one stochastic step.  Steps ``0..horizon-1`` are accounted, matching
the cumulative-reward solver.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import csvio, kernels
from .expr import support, truth_table
from .markov import DEFAULT_NODE_CAP
from .mdp import ActionSpace, Policy
from .pbn import Pbn, RewardStructure, require_valid, selection_cumulative
from .rng import child_seeds

MAX_TABLE_INPUTS = 24


@dataclass(frozen=True)
class TrajectoryStats:
    horizon: int
    n_traj: int
    master_seed: int
    reward_mean: float
    reward_std: float
    reward_se: float
    occupancy: dict  # label -> mean fraction of occupied steps
    occupancy_se: dict
    rewards: np.ndarray  # per-trajectory cumulative reward
    label_steps: np.ndarray  # (n_traj, n_labels) occupied-step counts

    def rows(self) -> list[tuple]:
        out = [("horizon", self.horizon), ("n_traj", self.n_traj), ("master_seed", self.master_seed),
               ("reward_mean", self.reward_mean), ("reward_std", self.reward_std),
               ("reward_se", self.reward_se)]
        for label in self.occupancy:
            out.append((f"occupancy[{label}]", self.occupancy[label]))
            out.append((f"occupancy_se[{label}]", self.occupancy_se[label]))
        return out


class _Compiler:
    """Flattens expressions into truth tables over their support."""

    def __init__(self, pbn: Pbn):
        self.pbn = pbn
        self.tt_offset, self.sup_offset, self.sup_vars, self.bits = [], [0], [], []

    def add(self, expr) -> int:
        pbn = self.pbn
        inputs = sorted(support(expr), key=pbn.index)
        if len(inputs) > MAX_TABLE_INPUTS:
            raise ValueError(f"expression depends on {len(inputs)} nodes; at most {MAX_TABLE_INPUTS} supported")
        self.tt_offset.append(len(self.bits))
        self.bits.extend(1 if b else 0 for b in truth_table(expr, inputs))
        self.sup_vars.extend(pbn.index(name) for name in inputs)
        self.sup_offset.append(len(self.sup_vars))
        return len(self.tt_offset) - 1

    def arrays(self) -> dict:
        return {
            "tt_offset": np.array(self.tt_offset, dtype=np.int64),
            "sup_offset": np.array(self.sup_offset, dtype=np.int64),
            # padded so the compiled kernel never takes the address of an empty buffer
            "sup_vars": np.array(self.sup_vars + [0], dtype=np.int64),
            "tt_bits": np.array(self.bits, dtype=np.uint8),
        }


def compile_program(pbn: Pbn, rewards: RewardStructure | None, labels: list, perturb: bool) -> dict:
    comp = _Compiler(pbn)
    pred_offset, pred_cum, pred_table = [0], [], []
    for node in pbn.nodes:
        pred_cum.extend(selection_cumulative(node))
        pred_table.extend(comp.add(expr) for expr, _ in node.predictors)
        pred_offset.append(len(pred_table))
    reward_entries = rewards.entries if rewards is not None else ()
    reward_tables = [comp.add(g) for g, _ in reward_entries]
    label_tables = [comp.add(pbn.labels[name]) for name in labels]
    prog = {
        "n": pbn.n,
        "pred_offset": np.array(pred_offset, dtype=np.int64),
        "pred_cum": np.array(pred_cum, dtype=np.float64),
        "pred_table": np.array(pred_table, dtype=np.int64),
        "rate": np.array([pbn.rate(nm) if perturb else 0.0 for nm in pbn.names], dtype=np.float64),
        "reward_tables": np.array(reward_tables, dtype=np.int64),
        "reward_values": np.array([r for _, r in reward_entries], dtype=np.float64),
        "label_tables": np.array(label_tables, dtype=np.int64),
    }
    prog.update(comp.arrays())
    return prog


def _policy_arrays(pbn: Pbn, policy: Policy | None, horizon: int):
    if policy is None:
        return (np.zeros((0, 1), dtype=np.int32), np.full(1, -1, dtype=np.int64), np.zeros(1, dtype=np.uint8))
    if pbn.n > DEFAULT_NODE_CAP:
        raise ValueError("policies need an enumerable state space")
    table = np.ascontiguousarray(policy.table, dtype=np.int32)
    if table.shape[0] < horizon or table.shape[1] != 2 ** pbn.n:
        raise ValueError(f"policy covers {table.shape[0]} steps over {table.shape[1]} states; "
                         f"need {horizon} steps over {2 ** pbn.n}")
    acts = policy.actions
    if table.size and (table.min() < 0 or table.max() >= len(acts)):
        raise ValueError("policy refers to an action outside its action space")
    nodes = np.array([-1 if a.is_noop else pbn.index(a.node) for a in acts], dtype=np.int64)
    values = np.array([0 if a.is_noop else (1 if a.value else 0) for a in acts], dtype=np.uint8)
    # the kernel indexes rows by remaining steps, counted from this horizon
    return np.ascontiguousarray(table[:horizon]), nodes, values


def simulate(pbn: Pbn, init, horizon: int, n_traj: int, master_seed: int,
             rewards: RewardStructure | str | None = None, policy: Policy | None = None,
             perturb: bool = True, labels=None, workers: int = 1, backend=None) -> TrajectoryStats:
    """Simulate ``n_traj`` independent trajectories.

    Trajectory ``k`` draws from the stream seeded by
    :func:`pbnkit.rng.child_seed` ``(master_seed, k)``, so the result does not
    depend on ``workers``.  ``labels`` defaults to every label of the model.
    """
    require_valid(pbn)
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if isinstance(rewards, str):
        rewards = pbn.reward_structure(rewards)
    labels = list(pbn.labels) if labels is None else list(labels)
    init = np.array([1 if b else 0 for b in init], dtype=np.uint8)
    if init.shape[0] != pbn.n:
        raise ValueError("initial state length does not match the model")
    prog = compile_program(pbn, rewards, labels, perturb)
    pol, act_node, act_value = _policy_arrays(pbn, policy, horizon)
    seeds = child_seeds(master_seed, n_traj)
    impl = backend or kernels

    def run(chunk):
        return impl.simulate_batch(
            prog["n"], horizon, init, prog["pred_offset"], prog["pred_cum"], prog["pred_table"], prog["rate"],
            prog["tt_offset"], prog["sup_offset"], prog["sup_vars"], prog["tt_bits"],
            prog["reward_tables"], prog["reward_values"], prog["label_tables"],
            pol, act_node, act_value, np.ascontiguousarray(chunk))

    chunks = np.array_split(seeds, max(1, min(workers, n_traj)))
    if len(chunks) == 1:
        results = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(run, chunks))
    totals = np.concatenate([r[0] for r in results])
    counts = np.concatenate([r[1] for r in results]).reshape(n_traj, len(labels))
    return _summarize(horizon, n_traj, master_seed, labels, totals, counts)


def _summarize(horizon, n_traj, master_seed, labels, totals, counts) -> TrajectoryStats:
    mean = float(np.sum(totals) / n_traj)
    std = float(np.std(totals, ddof=1)) if n_traj > 1 else 0.0
    occ, occ_se = {}, {}
    for m, label in enumerate(labels):
        frac = counts[:, m] / horizon if horizon else np.zeros(n_traj)
        occ[label] = float(np.sum(frac) / n_traj)
        occ_se[label] = float(np.std(frac, ddof=1) / math.sqrt(n_traj)) if n_traj > 1 else 0.0
    return TrajectoryStats(horizon, n_traj, master_seed, mean, std, std / math.sqrt(n_traj),
                           occ, occ_se, totals, counts)


def export_csv(data, destination) -> None:
    """Write a ``(time, value)`` series or a :class:`TrajectoryStats` as CSV."""
    if isinstance(data, TrajectoryStats):
        text = csvio.format_stats(data.rows())
    else:
        text = csvio.format_series(data)
    try:
        csvio.write_text(text, destination)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {destination}: {exc}") from exc


def greedy_policy(pbn: Pbn, rewards: RewardStructure | str | None, horizon: int,
                  actions: ActionSpace | None = None, perturb: bool = True) -> Policy:
    from .mdp import build_mdp, max_cumulative_reward

    mdp = build_mdp(pbn, actions or ActionSpace.repair(pbn), perturb)
    _, policy = max_cumulative_reward(mdp, rewards, horizon)
    return policy
