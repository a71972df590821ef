"""PBN data model and one-step stochastic semantics.

States are tuples of 0/1 with position ``j`` holding node ``j``.  In the
device models 0 means operational and 1 means failed.  When a state has to
be an integer (matrix rows, CSV), node 0 is the most significant bit.

One step of the network:

1. every node independently picks one of its predictors with the
   predictor's selection probability,
2. all nodes update synchronously from the current state,
3. with perturbation on, each new value flips independently with the
   node's perturbation rate.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .expr import BoolExpr, evaluate, evaluate_array, support

PROB_TOL = 1e-9
MASS_TOL = 1e-12
DEFAULT_REALIZATION_CAP = 2 ** 20


class CapExceededError(RuntimeError):
    pass


class ValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class UnknownNodeError(KeyError):
    pass


@dataclass(frozen=True)
class NodeSpec:
    name: str
    predictors: tuple  # of (BoolExpr, selection probability)
    description: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "predictors", tuple((e, float(c)) for e, c in self.predictors))


@dataclass(frozen=True)
class RewardStructure:
    """Per-step state rewards.  Overlapping guards add up."""

    name: str
    entries: tuple  # of (guard BoolExpr, reward)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((g, float(r)) for g, r in self.entries))


@dataclass(frozen=True)
class Pbn:
    nodes: tuple
    perturbation: Mapping[str, float] = field(default_factory=dict)
    labels: Mapping[str, BoolExpr] = field(default_factory=dict)
    rewards: Mapping[str, RewardStructure] = field(default_factory=dict)
    name: str = "pbn"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "perturbation", dict(self.perturbation))
        object.__setattr__(self, "labels", dict(self.labels))
        object.__setattr__(self, "rewards", dict(self.rewards))

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def names(self) -> list[str]:
        return [node.name for node in self.nodes]

    def index(self, name: str) -> int:
        for j, node in enumerate(self.nodes):
            if node.name == name:
                return j
        raise UnknownNodeError(name)

    def rate(self, name: str) -> float:
        return float(self.perturbation.get(name, 0.0))

    @property
    def predictor_counts(self) -> tuple:
        return tuple(len(node.predictors) for node in self.nodes)

    def reward_structure(self, name: str | None = None) -> RewardStructure:
        if name is None:
            if not self.rewards:
                raise KeyError("model has no reward structures")
            return next(iter(self.rewards.values()))
        return self.rewards[name]


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class Realization:
    """One constituent Boolean network: a predictor index per node."""

    indices: tuple
    probability: float


def validate(pbn: Pbn) -> list[Violation]:
    """Return all violations found; an empty list means the model is valid."""
    out = []
    names = pbn.names
    declared = set(names)
    if not names:
        out.append(Violation("EmptyNetwork", "network has no nodes"))
    if len(declared) != len(names):
        out.append(Violation("DuplicateNode", "node names must be unique"))
    for node in pbn.nodes:
        if not node.predictors:
            out.append(Violation("EmptyPredictorList", f"node {node.name} has no predictors"))
            continue
        total = 0.0
        for expr, c in node.predictors:
            if not (0.0 < c <= 1.0):
                out.append(Violation("ProbabilityRange", f"node {node.name}: selection probability {c} not in (0, 1]"))
            total += c
            for var in sorted(support(expr) - declared):
                out.append(Violation("UnboundVariable", f"node {node.name}: predictor uses undeclared {var}"))
        if abs(total - 1.0) > PROB_TOL:
            out.append(Violation("NormalizationViolation", f"node {node.name}: probabilities sum to {total!r}"))
    for name, p in pbn.perturbation.items():
        if name not in declared:
            out.append(Violation("UnknownNode", f"perturbation for undeclared node {name}"))
        if not (0.0 <= p < 1.0):
            out.append(Violation("PerturbationRange", f"node {name}: rate {p} not in [0, 1)"))
    for label, expr in pbn.labels.items():
        for var in sorted(support(expr) - declared):
            out.append(Violation("UnboundVariable", f"label {label!r} uses undeclared {var}"))
    for rs in pbn.rewards.values():
        for guard, r in rs.entries:
            if r < 0 or math.isnan(r):
                out.append(Violation("NegativeReward", f"rewards {rs.name!r}: reward {r} must be nonnegative"))
            for var in sorted(support(guard) - declared):
                out.append(Violation("UnboundVariable", f"rewards {rs.name!r} uses undeclared {var}"))
    return out


def require_valid(pbn: Pbn) -> Pbn:
    violations = validate(pbn)
    if violations:
        raise ValidationError(violations)
    return pbn


# ------------------------------------------------------------ encodings

def state_to_index(state: Sequence[int]) -> int:
    idx = 0
    for bit in state:
        idx = (idx << 1) | (1 if bit else 0)
    return idx


def index_to_state(index: int, n: int) -> tuple:
    return tuple((index >> (n - 1 - j)) & 1 for j in range(n))


def state_bits(n: int, indices=None) -> np.ndarray:
    """Bit matrix (len(indices), n) for the given state indices (default all)."""
    if indices is None:
        indices = np.arange(2 ** n, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(np.uint8)


def columns_for(pbn: Pbn, bits: np.ndarray) -> dict:
    return {name: bits[:, j] for j, name in enumerate(pbn.names)}


def evaluate_on_states(pbn: Pbn, expr: BoolExpr, bits: np.ndarray) -> np.ndarray:
    return evaluate_array(expr, columns_for(pbn, bits), size=bits.shape[0])


def reward_vector(pbn: Pbn, rewards: RewardStructure, bits: np.ndarray | None = None) -> np.ndarray:
    """Per-state reward; guards that overlap contribute their sum."""
    if bits is None:
        bits = state_bits(pbn.n)
    out = np.zeros(bits.shape[0])
    for guard, r in rewards.entries:
        out += np.where(evaluate_on_states(pbn, guard, bits), r, 0.0)
    return out


# ----------------------------------------------------------- realizations

def realization_count(pbn: Pbn) -> int:
    return math.prod(pbn.predictor_counts)


def enumerate_realizations(pbn: Pbn, cap: int = DEFAULT_REALIZATION_CAP) -> list[Realization]:
    """All constituent networks in mixed-radix order (node 0 most significant)."""
    count = realization_count(pbn)
    if count > cap:
        raise CapExceededError(f"{count} realizations exceed cap {cap}")
    out = []
    choices = [range(len(node.predictors)) for node in pbn.nodes]
    for idx in itertools.product(*choices):
        p = 1.0
        for node, i in zip(pbn.nodes, idx):
            p *= node.predictors[i][1]
        out.append(Realization(tuple(idx), p))
    return out


def realization_from_index(pbn: Pbn, index: int) -> Realization:
    counts = pbn.predictor_counts
    if not 0 <= index < math.prod(counts):
        raise IndexError(f"realization index {index} out of range")
    idx = []
    for l in reversed(counts):
        idx.append(index % l)
        index //= l
    idx.reverse()
    p = math.prod(node.predictors[i][1] for node, i in zip(pbn.nodes, idx))
    return Realization(tuple(idx), p)


def realization_update(pbn: Pbn, realization: Realization, bits: np.ndarray) -> np.ndarray:
    """Apply a constituent network's synchronous update to a batch of states."""
    cols = columns_for(pbn, bits)
    out = np.empty_like(bits)
    for j, (node, i) in enumerate(zip(pbn.nodes, realization.indices)):
        out[:, j] = evaluate_array(node.predictors[i][0], cols, size=bits.shape[0])
    return out


# ------------------------------------------------------------ step semantics

def one_probabilities(pbn: Pbn, bits: np.ndarray, perturb: bool) -> np.ndarray:
    """P(node j is 1 after one step | current state), shape (batch, n).

    Nodes are conditionally independent given the current state, so these
    marginals determine the whole successor distribution.
    """
    cols = columns_for(pbn, bits)
    size = bits.shape[0]
    q = np.zeros((size, pbn.n))
    for j, node in enumerate(pbn.nodes):
        acc = np.zeros(size)
        for expr, c in node.predictors:
            acc = acc + np.where(evaluate_array(expr, cols, size=size), c, 0.0)
        q[:, j] = np.minimum(acc, 1.0)
        if perturb:
            p = pbn.rate(node.name)
            if p:
                q[:, j] = q[:, j] * (1.0 - p) + (1.0 - q[:, j]) * p
    return q


def next_state_distribution(pbn: Pbn, state: Sequence[int], perturb: bool = True) -> dict:
    """Exact successor distribution ``{state tuple: probability}`` (zero mass omitted)."""
    if len(state) != pbn.n:
        raise ValueError(f"state has {len(state)} entries, network has {pbn.n} nodes")
    q = one_probabilities(pbn, np.asarray([state], dtype=np.uint8), perturb)[0]
    dist = {(): 1.0}
    for j in range(pbn.n):
        q1 = q[j]
        q0 = 1.0 - q1
        nxt = {}
        for prefix, p in dist.items():
            if q0 > 0.0:
                nxt[prefix + (0,)] = p * q0
            if q1 > 0.0:
                nxt[prefix + (1,)] = p * q1
        dist = nxt
    return dist


def selection_cumulative(node: NodeSpec) -> list[float]:
    acc = 0.0
    out = []
    for _, c in node.predictors:
        acc += c
        out.append(acc)
    return out


def sample_step(pbn: Pbn, state: Sequence[int], rng, perturb: bool = True) -> tuple:
    """Draw one successor.

    ``rng`` is any object with a ``random()`` method returning a float in
    [0, 1) (``numpy.random.Generator``, ``random.Random``, or
    :class:`pbnkit.rng.SplitMix64`).  Per node, in order: one draw picks the
    predictor (skipped for single-predictor nodes) and one draw decides the
    flip (skipped when the rate is zero).  The compiled simulator consumes
    draws in the same order.
    """
    assignment = dict(zip(pbn.names, state))
    out = []
    for node in pbn.nodes:
        preds = node.predictors
        i = 0
        if len(preds) > 1:
            u = rng.random()
            cum = selection_cumulative(node)
            i = len(preds) - 1
            for k, edge in enumerate(cum):
                if u < edge:
                    i = k
                    break
        value = 1 if evaluate(preds[i][0], assignment) else 0
        if perturb:
            p = pbn.rate(node.name)
            if p > 0.0 and rng.random() < p:
                value ^= 1
        out.append(value)
    return tuple(out)


def intervene(pbn: Pbn, state: Sequence[int], node: str, value: int) -> tuple:
    """Force ``node`` to ``value``; other coordinates are left alone."""
    j = pbn.index(node)
    s = list(state)
    s[j] = 1 if value else 0
    return tuple(s)
