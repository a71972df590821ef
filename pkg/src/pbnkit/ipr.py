"""The Intelligent Power Router (IPR) model.

Four nodes, 0 = operational and 1 = failed:

    x1 software, x2 data router, x3 main breaker, x4 secondary breaker

Predictors: software keeps its state; each other component follows
``x1 & xk`` with probability 0.9611 and ``x1 | xk`` with probability 0.0389.
Component failures enter through per-step perturbation calibrated from the
annual reliabilities.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

from .expr import And, Or, Var, Xor, parse_expr, synthesize_from_truth_table
from .pbn import NodeSpec, Pbn, RewardStructure, index_to_state, state_to_index

NODE_NAMES = ("x1", "x2", "x3", "x4")
COMPONENTS = ("software", "router", "breaker_main", "breaker_secondary")
PRIMARY_PROB = 0.9611
ALTERNATE_PROB = 0.0389
HOURS_PER_YEAR = 8760


class FailureCategory(str, enum.Enum):
    CAT1_FAULT = "Cat1Fault"
    CAT2_NORMAL = "Cat2Normal"
    CAT3_FAILURE = "Cat3Failure"
    CAT4_FAULT = "Cat4Fault"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text: str) -> "FailureCategory":
        t = text.strip()
        for cat in cls:
            if t in (cat.value, cat.name, cat.value[3]):
                return cat
        raise ValueError(f"unknown failure category {text!r}")


LABEL_OF = {
    FailureCategory.CAT2_NORMAL: "normal",
    FailureCategory.CAT3_FAILURE: "failure",
    FailureCategory.CAT1_FAULT: "fault1",
    FailureCategory.CAT4_FAULT: "fault2",
}


@dataclass(frozen=True)
class ComponentReliability:
    """Annual reliabilities of the IPR subsystems."""

    breaker: float = 0.99330
    router: float = 0.9009
    software: float = 0.99

    def __post_init__(self):
        for name in ("breaker", "router", "software"):
            r = getattr(self, name)
            if not 0.0 < r <= 1.0:
                raise ValueError(f"{name} reliability {r} not in (0, 1]")

    def per_node(self) -> tuple:
        return (self.software, self.router, self.breaker, self.breaker)


def calibrate_perturbation(annual_reliability: float, steps_per_year: int = HOURS_PER_YEAR) -> float:
    """Per-step failure probability ``p`` with ``(1 - p) ** steps_per_year == R``."""
    if not 0.0 < annual_reliability <= 1.0:
        raise ValueError("reliability must be in (0, 1]")
    if steps_per_year < 1:
        raise ValueError("steps_per_year must be at least 1")
    # expm1 keeps precision for R close to 1
    return -math.expm1(math.log(annual_reliability) / steps_per_year)


# ---------------------------------------------------------- state spaces

@dataclass(frozen=True)
class IprState:
    software: int
    router: int
    breaker_main: int
    breaker_secondary: int

    @classmethod
    def from_vector(cls, v: Sequence[int]) -> "IprState":
        if len(v) != 4 or any(b not in (0, 1) for b in v):
            raise ValueError(f"IPR state needs four 0/1 values, got {tuple(v)}")
        return cls(*(int(b) for b in v))

    def vector(self) -> tuple:
        return (self.software, self.router, self.breaker_main, self.breaker_secondary)


def _vec(s) -> tuple:
    return s.vector() if isinstance(s, IprState) else IprState.from_vector(s).vector()


def canonical(s) -> tuple:
    """Representative of the merge class: the two breakers are interchangeable."""
    sw, rt, b1, b2 = _vec(s)
    return (sw, rt, min(b1, b2), max(b1, b2))


@dataclass(frozen=True)
class MergedState:
    index: int
    representative: tuple
    members: tuple


def merged_state_space() -> list[MergedState]:
    """The 12 merge classes, ordered by representative state index."""
    groups: dict = {}
    for idx in range(16):
        s = index_to_state(idx, 4)
        groups.setdefault(canonical(s), []).append(s)
    reps = sorted(groups, key=state_to_index)
    return [MergedState(i, rep, tuple(groups[rep])) for i, rep in enumerate(reps)]


def merged_index(s) -> int:
    rep = canonical(s)
    for m in merged_state_space():
        if m.representative == rep:
            return m.index
    raise AssertionError("unreachable")


def _default_category(v: tuple) -> FailureCategory:
    sw, rt, b1, b2 = v
    if v == (0, 0, 0, 0):
        return FailureCategory.CAT2_NORMAL
    if v == (1, 0, 0, 0):
        return FailureCategory.CAT1_FAULT
    if b1 and b2 and (sw or rt):
        return FailureCategory.CAT3_FAILURE
    return FailureCategory.CAT4_FAULT


def classify(s, mapping: Mapping[int, FailureCategory] | None = None) -> FailureCategory:
    """Failure category of a component state.

    ``mapping`` overrides the default rule with a merged-state-index to
    category table (see :func:`load_mapping`).
    """
    v = _vec(s)
    if mapping is None:
        return _default_category(v)
    return mapping[merged_index(v)]


def default_mapping() -> dict:
    return {m.index: _default_category(m.representative) for m in merged_state_space()}


def load_mapping(text: str) -> dict:
    """Parse 12 lines of ``merged-state-index category``; ``#`` comments allowed."""
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'index category'")
        idx = int(parts[0])
        if not 0 <= idx < 12 or idx in mapping:
            raise ValueError(f"line {lineno}: bad or repeated merged-state index {idx}")
        mapping[idx] = FailureCategory.parse(parts[1])
    if len(mapping) != 12:
        raise ValueError(f"mapping must cover all 12 merged states, got {len(mapping)}")
    return mapping


def isolate(s) -> frozenset:
    """Names of the failed components."""
    return frozenset(name for name, bit in zip(COMPONENTS, _vec(s)) if bit)


# ------------------------------------------------------------ the model

_DEFAULT_LABELS = {
    "normal": "!x1 & !x2 & !x3 & !x4",
    "failure": "x3 & x4 & (x1 | x2)",
    "fault1": "x1 & !x2 & !x3 & !x4",
    "fault2": "!(!x1 & !x2 & !x3 & !x4) & !(x1 & !x2 & !x3 & !x4) & !(x3 & x4 & (x1 | x2))",
}


def category_labels(mapping: Mapping[int, FailureCategory] | None = None) -> dict:
    """Label expressions for the four categories."""
    if mapping is None:
        return {name: parse_expr(text) for name, text in _DEFAULT_LABELS.items()}
    out = {}
    for cat, label in LABEL_OF.items():
        table = [classify(index_to_state(i, 4), mapping) == cat for i in range(16)]
        out[label] = synthesize_from_truth_table(NODE_NAMES, table)
    return {k: out[k] for k in ("normal", "failure", "fault1", "fault2")}


def builtin_reward_structures(mapping: Mapping[int, FailureCategory] | None = None) -> dict:
    labels = category_labels(mapping)
    structures = [
        RewardStructure("combined", [(labels["normal"], 5.0), (labels["fault1"], 1.0), (labels["fault2"], 1.0)]),
        RewardStructure("normop", [(labels["normal"], 1.0)]),
        RewardStructure("failure", [(labels["failure"], 1.0)]),
        RewardStructure("fault1", [(labels["fault1"], 1.0)]),
        RewardStructure("fault2", [(labels["fault2"], 1.0)]),
    ]
    return {rs.name: rs for rs in structures}


def builtin_model(calibration: ComponentReliability | None = None, steps_per_year: int = HOURS_PER_YEAR,
                  mapping: Mapping[int, FailureCategory] | None = None, alternate: str = "or") -> Pbn:
    """The IPR network.

    ``alternate`` picks the operator of each component's low-probability
    predictor (``"or"`` or ``"xor"``).
    """
    calibration = calibration or ComponentReliability()
    op = {"or": Or, "xor": Xor}[alternate]
    x1 = Var("x1")
    nodes = [NodeSpec("x1", [(x1, 1.0)], "software")]
    for name, comp in zip(NODE_NAMES[1:], ("router", "main breaker", "secondary breaker")):
        xk = Var(name)
        nodes.append(NodeSpec(name, [(And(x1, xk), PRIMARY_PROB), (op(x1, xk), ALTERNATE_PROB)], comp))
    perturb = {name: calibrate_perturbation(r, steps_per_year)
               for name, r in zip(NODE_NAMES, calibration.per_node())}
    return Pbn(nodes, perturb, category_labels(mapping), builtin_reward_structures(mapping), "ipr")


def bundled_model_text() -> str:
    return resources.files("pbnkit").joinpath("data/ipr.pbn").read_text()


def bundled_model() -> Pbn:
    from .modelfmt import parse_model
    return parse_model(bundled_model_text())


def occupancy_oracle(calibration: ComponentReliability | None = None) -> float:
    """Mean fraction of a year spent fully operational, first-order no-repair
    approximation: ``1 - sum_c [1 - (1 - exp(-l_c)) / l_c]`` with
    ``l_c = -ln R_c`` per year over the four components."""
    calibration = calibration or ComponentReliability()
    total = 0.0
    for r in calibration.per_node():
        lam = -math.log(r)
        total += 1.0 - (-math.expm1(-lam)) / lam if lam > 0 else 0.0
    return 1.0 - total
