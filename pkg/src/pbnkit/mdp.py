"""Interventions as MDP actions; finite-horizon value iteration.

An action is either ``noop`` or "force node j to value v".  Its successor
distribution from state ``s`` is the PBN step from the forced state, so
every action row is a row of the plain chain: ``P_a[s] = P[force_a(s)]``.
The solvers exploit this and do one sparse product per iteration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .expr import BoolExpr
from .markov import DEFAULT_NODE_CAP, Dtmc, build_dtmc
from .pbn import Pbn, RewardStructure, reward_vector, state_bits, evaluate_on_states


@dataclass(frozen=True)
class Action:
    node: str | None = None
    value: int = 0

    @property
    def is_noop(self) -> bool:
        return self.node is None

    def __str__(self):
        return "noop" if self.node is None else f"{self.node}:={self.value}"


NOOP = Action()


@dataclass(frozen=True)
class ActionSpace:
    actions: tuple

    def __post_init__(self):
        acts = tuple(self.actions)
        if NOOP not in acts:
            acts = (NOOP,) + acts
        object.__setattr__(self, "actions", acts)

    def __len__(self):
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __getitem__(self, i):
        return self.actions[i]

    @classmethod
    def noop_only(cls) -> "ActionSpace":
        return cls((NOOP,))

    @classmethod
    def repair(cls, pbn: Pbn, nodes=None) -> "ActionSpace":
        """noop plus "force node to 0 (operational)" for each node."""
        nodes = pbn.names if nodes is None else list(nodes)
        return cls((NOOP,) + tuple(Action(name, 0) for name in nodes))

    @classmethod
    def named(cls, pbn: Pbn, kind: str) -> "ActionSpace":
        if kind in ("none", "noop"):
            return cls.noop_only()
        if kind == "repair":
            return cls.repair(pbn)
        raise ValueError(f"unknown action set {kind!r}")


@dataclass(frozen=True)
class Mdp:
    pbn: Pbn
    actions: ActionSpace
    dtmc: Dtmc
    succ: np.ndarray  # (A, S): state the step starts from after the action

    @property
    def num_states(self) -> int:
        return self.dtmc.num_states

    def row(self, s: int, a: int) -> dict:
        return self.dtmc.row(int(self.succ[a, s]))


def build_mdp(pbn: Pbn, actions: ActionSpace | None = None, perturb: bool = True,
              cap: int = DEFAULT_NODE_CAP) -> Mdp:
    actions = ActionSpace.noop_only() if actions is None else actions
    dtmc = build_dtmc(pbn, perturb, cap)
    n = pbn.n
    idx = np.arange(2 ** n, dtype=np.int64)
    succ = np.empty((len(actions), 2 ** n), dtype=np.int64)
    for a, act in enumerate(actions):
        if act.is_noop:
            succ[a] = idx
            continue
        bit = np.int64(1) << (n - 1 - pbn.index(act.node))
        succ[a] = (idx | bit) if act.value else (idx & ~bit)
    return Mdp(pbn, actions, dtmc, succ)


@dataclass(frozen=True)
class ValueTable:
    """``values[k, s]``: optimal value with ``k`` steps to go."""

    values: np.ndarray
    gamma: float = 1.0

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    def at(self, k: int) -> np.ndarray:
        return self.values[k]


@dataclass(frozen=True)
class Policy:
    """``table[k - 1, s]``: action index to take in ``s`` with ``k`` steps to go."""

    table: np.ndarray
    actions: ActionSpace

    def action(self, s: int, remaining: int) -> Action:
        return self.actions[int(self.table[remaining - 1, s])]


@dataclass(frozen=True)
class QTable:
    """``q[k, a, s]``: value of taking ``a`` in ``s`` with ``k`` steps to go."""

    q: np.ndarray
    actions: ActionSpace


def _solve(mdp: Mdp, reward: np.ndarray, horizon: int, gamma: float, v0: np.ndarray,
           fixed: np.ndarray, minimize: bool):
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    m = mdp.dtmc.matrix
    values, table = kernels.backward_induction(
        m.indptr.astype(np.int64), m.indices.astype(np.int64), np.ascontiguousarray(m.data, dtype=np.float64),
        np.ascontiguousarray(mdp.succ, dtype=np.int64), np.ascontiguousarray(reward, dtype=np.float64),
        float(gamma), int(horizon), np.ascontiguousarray(v0, dtype=np.float64),
        np.ascontiguousarray(fixed, dtype=np.uint8), bool(minimize))
    return ValueTable(values, gamma), Policy(table, mdp.actions)


def _rewards(mdp: Mdp, rewards) -> np.ndarray:
    if isinstance(rewards, str) or rewards is None:
        rewards = mdp.pbn.reward_structure(rewards)
    for _, r in rewards.entries:
        if r < 0:
            raise ValueError(f"reward structure {rewards.name!r} has a negative reward")
    return reward_vector(mdp.pbn, rewards)


def _check_gamma(gamma):
    if not 0.0 < gamma <= 1.0:
        raise ValueError("discount must be in (0, 1]")


def max_cumulative_reward(mdp: Mdp, rewards: RewardStructure | str | None, horizon: int,
                          gamma: float = 1.0, minimize: bool = False):
    """Optimal expected reward accumulated over steps 0..horizon-1.

    ``V_0 = 0`` and ``V_{k+1}(s) = r(s) + gamma * max_a sum_s' P(s'|s,a) V_k(s')``.
    Ties go to the lowest action index.  Returns ``(ValueTable, Policy)``.
    """
    _check_gamma(gamma)
    r = _rewards(mdp, rewards)
    S = mdp.num_states
    return _solve(mdp, r, horizon, gamma, np.zeros(S), np.zeros(S, dtype=np.uint8), minimize)


def target_mask(mdp: Mdp, target: BoolExpr | str) -> np.ndarray:
    pbn = mdp.pbn
    if isinstance(target, str):
        if target not in pbn.labels:
            raise KeyError(f"unknown label {target!r}")
        target = pbn.labels[target]
    return evaluate_on_states(pbn, target, state_bits(pbn.n))


def reachability(mdp: Mdp, target: BoolExpr | str, horizon: int, minimize: bool = False):
    """Bounded reachability values for every horizon ``0..horizon`` plus the policy."""
    mask = target_mask(mdp, target)
    v0 = mask.astype(float)
    return _solve(mdp, np.zeros(mdp.num_states), horizon, 1.0, v0, mask, minimize)


def max_reachability(mdp: Mdp, target: BoolExpr | str, horizon: int) -> np.ndarray:
    """Per-state maximum probability of being in ``target`` within ``horizon`` steps."""
    table, _ = reachability(mdp, target, horizon)
    return table.values[horizon]


def q_values(mdp: Mdp, rewards: RewardStructure | str | None, horizon: int, gamma: float = 1.0,
             minimize: bool = False) -> QTable:
    """Action values ``Q_k(s, a) = r(s) + gamma * sum_s' P(s'|s,a) V_{k-1}(s')``, ``Q_0 = 0``."""
    _check_gamma(gamma)
    r = _rewards(mdp, rewards)
    table, _ = max_cumulative_reward(mdp, rewards, horizon, gamma, minimize)
    m = mdp.dtmc.matrix
    q = np.zeros((horizon + 1, len(mdp.actions), mdp.num_states))
    for k in range(1, horizon + 1):
        w = m @ table.values[k - 1]
        q[k] = r[None, :] + gamma * w[mdp.succ]
    return QTable(q, mdp.actions)
