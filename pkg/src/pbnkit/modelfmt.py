"""Model file and property languages, property checking and experiments.

Model files::

    model := "pbn" STRING "{" item* "}"
    item  := "node" IDENT STRING? ";"
           | "predictor" IDENT "{" (NUMBER ":" expr ";")+ "}"
           | "perturb" IDENT "rate" NUMBER ";"
           | "label" STRING "=" expr ";"
           | "rewards" STRING "{" (expr ":" NUMBER ";")+ "}"

``#`` starts a comment running to the end of the line.

Properties::

    prop := ("Pmax" | "Pmin") "=?" "[" "F" "<=" INT STRING "]"
          | "R" ("{" STRING "}")? ("max" | "min") "=?" "[" "C" "<=" INT "]"

Experiment templates may put an identifier where the bound INT goes.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import csvio
from .expr import ExprParser, pretty
from .mdp import ActionSpace, build_mdp, max_cumulative_reward, reachability
from .pbn import NodeSpec, Pbn, RewardStructure, state_to_index


class ModelSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DuplicateNodeError(ModelSyntaxError):
    pass


class PropertySyntaxError(ValueError):
    """``position`` is 1-based."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class BindError(KeyError):
    pass


# ------------------------------------------------------------ model lexer

_MODEL_TOKEN = re.compile(
    r"""(?P<ws>[ \t\r\n]+)
      | (?P<comment>\#[^\n]*)
      | (?P<num>(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<string>"[^"\n]*")
      | (?P<op>[{};:=&|^!()])""",
    re.VERBOSE,
)


def _line_col(text: str, offset: int) -> tuple:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def tokenize_model(text: str) -> list:
    tokens = []
    i = 0
    while i < len(text):
        m = _MODEL_TOKEN.match(text, i)
        if m is None:
            raise ModelSyntaxError(f"unexpected character {text[i]!r}", *_line_col(text, i))
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tok = m.group()
            tokens.append((tok if kind == "op" else kind, tok, i))
        i = m.end()
    return tokens


class _ModelParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize_model(text)
        self.pos = 0

    def error(self, msg, tok=None, cls=ModelSyntaxError):
        offset = tok[2] if tok is not None else len(self.text)
        return cls(msg, *_line_col(self.text, offset))

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self, kind=None, text=None, what=None):
        tok = self.peek()
        ok = tok is not None and (kind is None or tok[0] == kind) and (text is None or tok[1] == text)
        if not ok:
            want = what or (repr(text) if text else kind)
            got = "end of input" if tok is None else repr(tok[1])
            raise self.error(f"expected {want}, got {got}", tok)
        self.pos += 1
        return tok

    def expr(self):
        parser = ExprParser(self.tokens, lambda msg, tok: self.error(msg, tok))
        parser.pos = self.pos
        node = parser.parse_expr()
        self.pos = parser.pos
        return node

    def number(self) -> float:
        return float(self.next("num", what="number")[1])

    def string(self) -> str:
        return self.next("string", what="string")[1][1:-1]

    def parse(self) -> Pbn:
        self.next("ident", "pbn")
        name = self.string()
        self.next("{")
        nodes: dict = {}
        order: list = []
        predictors: dict = {}
        perturb: dict = {}
        labels: dict = {}
        rewards: dict = {}
        while True:
            tok = self.peek()
            if tok is not None and tok[0] == "}":
                self.pos += 1
                break
            kw = self.next("ident", what="'node', 'predictor', 'perturb', 'label', 'rewards' or '}'")
            word = kw[1]
            if word == "node":
                ident = self.next("ident", what="node name")
                desc = None
                if self.peek() is not None and self.peek()[0] == "string":
                    desc = self.string()
                self.next(";")
                if ident[1] in nodes:
                    raise self.error(f"DuplicateNode: node {ident[1]} declared twice", ident, DuplicateNodeError)
                nodes[ident[1]] = desc
                order.append(ident[1])
            elif word == "predictor":
                ident = self.next("ident", what="node name")
                if ident[1] not in nodes:
                    raise self.error(f"predictor for undeclared node {ident[1]}", ident)
                if ident[1] in predictors:
                    raise self.error(f"second predictor block for node {ident[1]}", ident)
                self.next("{")
                entries = []
                while True:
                    c = self.number()
                    self.next(":")
                    entries.append((self.expr(), c))
                    self.next(";")
                    if self.peek() is not None and self.peek()[0] == "}":
                        self.pos += 1
                        break
                predictors[ident[1]] = entries
            elif word == "perturb":
                ident = self.next("ident", what="node name")
                self.next("ident", "rate")
                rate = self.number()
                self.next(";")
                if ident[1] not in nodes:
                    raise self.error(f"perturbation for undeclared node {ident[1]}", ident)
                if ident[1] in perturb:
                    raise self.error(f"second perturbation for node {ident[1]}", ident)
                perturb[ident[1]] = rate
            elif word == "label":
                tok = self.peek()
                lname = self.string()
                self.next("=")
                if lname in labels:
                    raise self.error(f"label {lname!r} defined twice", tok)
                labels[lname] = self.expr()
                self.next(";")
            elif word == "rewards":
                tok = self.peek()
                rname = self.string()
                if rname in rewards:
                    raise self.error(f"reward structure {rname!r} defined twice", tok)
                self.next("{")
                entries = []
                while True:
                    guard = self.expr()
                    self.next(":")
                    entries.append((guard, self.number()))
                    self.next(";")
                    if self.peek() is not None and self.peek()[0] == "}":
                        self.pos += 1
                        break
                rewards[rname] = RewardStructure(rname, entries)
            else:
                raise self.error(f"unknown item {word!r}", kw)
        if self.peek() is not None:
            raise self.error(f"unexpected {self.peek()[1]!r} after model", self.peek())
        node_specs = [NodeSpec(nm, predictors.get(nm, ()), nodes[nm]) for nm in order]
        return Pbn(node_specs, perturb, labels, rewards, name)


def parse_model(text: str) -> Pbn:
    """Parse a model file.  Semantic checks are left to :func:`pbnkit.pbn.validate`."""
    return _ModelParser(text).parse()


def load_model(path) -> Pbn:
    with open(path) as fh:
        return parse_model(fh.read())


def _num(x: float) -> str:
    return repr(float(x))


def _check_name(s: str) -> str:
    if '"' in s or "\n" in s:
        raise ValueError(f"name {s!r} cannot be written to a model file")
    return s


def serialize_model(pbn: Pbn) -> str:
    lines = [f'pbn "{_check_name(pbn.name)}" {{']
    for node in pbn.nodes:
        desc = f' "{_check_name(node.description)}"' if node.description is not None else ""
        lines.append(f"  node {node.name}{desc};")
    for node in pbn.nodes:
        if not node.predictors:
            continue
        lines.append(f"  predictor {node.name} {{")
        for expr, c in node.predictors:
            lines.append(f"    {_num(c)} : {pretty(expr)};")
        lines.append("  }")
    for name, rate in pbn.perturbation.items():
        lines.append(f"  perturb {name} rate {_num(rate)};")
    for name, expr in pbn.labels.items():
        lines.append(f'  label "{_check_name(name)}" = {pretty(expr)};')
    for rs in pbn.rewards.values():
        lines.append(f'  rewards "{_check_name(rs.name)}" {{')
        for guard, r in rs.entries:
            lines.append(f"    {pretty(guard)} : {_num(r)};")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -------------------------------------------------------------- properties

@dataclass(frozen=True)
class Reachability:
    opt: str  # "max" | "min"
    bound: int | str
    target: str

    def __str__(self):
        return f'P{self.opt}=? [ F<={self.bound} "{self.target}" ]'


@dataclass(frozen=True)
class CumulativeReward:
    opt: str
    structure: str | None
    bound: int | str

    def __str__(self):
        name = f'{{"{self.structure}"}}' if self.structure is not None else ""
        return f"R{name}{self.opt}=? [ C<={self.bound} ]"


Property = Reachability | CumulativeReward


class _PropParser:
    def __init__(self, text: str, allow_params: bool):
        self.text = text
        self.i = 0
        self.allow_params = allow_params

    def error(self, msg):
        return PropertySyntaxError(msg, self.i + 1)

    def ws(self):
        while self.i < len(self.text) and self.text[self.i].isspace():
            self.i += 1

    def accept(self, lit: str) -> bool:
        self.ws()
        if self.text.startswith(lit, self.i):
            self.i += len(lit)
            return True
        return False

    def expect(self, lit: str):
        if not self.accept(lit):
            raise self.error(f"expected {lit!r}")

    def opt(self) -> str:
        for o in ("max", "min"):
            if self.accept(o):
                return o
        raise self.error("expected 'max' or 'min'")

    def string(self) -> str:
        self.ws()
        if not self.text.startswith('"', self.i):
            raise self.error("expected a quoted name")
        end = self.text.find('"', self.i + 1)
        if end < 0 or "\n" in self.text[self.i:end]:
            raise self.error("unterminated string")
        s = self.text[self.i + 1:end]
        self.i = end + 1
        return s

    def bound(self):
        self.ws()
        m = re.compile(r"[0-9]+").match(self.text, self.i)
        if m:
            self.i = m.end()
            return int(m.group())
        if self.allow_params:
            m = re.compile(r"[A-Za-z_][A-Za-z0-9_]*").match(self.text, self.i)
            if m:
                self.i = m.end()
                return m.group()
        raise self.error("expected an integer bound")

    def parse(self):
        self.ws()
        if self.accept("P"):
            opt = self.opt()
            self.expect("=?")
            self.expect("[")
            self.expect("F")
            self.expect("<=")
            bound = self.bound()
            target = self.string()
            self.expect("]")
            prop = Reachability(opt, bound, target)
        elif self.accept("R"):
            structure = None
            if self.accept("{"):
                structure = self.string()
                self.expect("}")
            opt = self.opt()
            self.expect("=?")
            self.expect("[")
            self.expect("C")
            self.expect("<=")
            bound = self.bound()
            self.expect("]")
            prop = CumulativeReward(opt, structure, bound)
        else:
            raise self.error("expected 'P' or 'R'")
        self.ws()
        if self.i != len(self.text):
            raise self.error("unexpected trailing text")
        return prop


def parse_property(text: str, allow_params: bool = False) -> Property:
    """Parse a property.  Names are resolved later, against a model."""
    return _PropParser(text, allow_params).parse()


def _bind(model: Pbn, prop: Property):
    if isinstance(prop, Reachability):
        if prop.target not in model.labels:
            raise BindError(f"unknown label {prop.target!r}")
    elif prop.structure is None:
        if not model.rewards:
            raise BindError("model has no reward structures")
    elif prop.structure not in model.rewards:
        raise BindError(f"unknown reward structure {prop.structure!r}")


def _init_index(model: Pbn, init) -> int:
    if init is None:
        return 0
    if isinstance(init, (int, np.integer)):
        return int(init)
    if len(init) != model.n:
        raise ValueError("initial state length does not match the model")
    return state_to_index(init)


def _value_table(model, prop, horizon, actions, perturb):
    _bind(model, prop)
    actions = ActionSpace.noop_only() if actions is None else actions
    mdp = build_mdp(model, actions, perturb)
    minimize = prop.opt == "min"
    if isinstance(prop, Reachability):
        table, _ = reachability(mdp, prop.target, horizon, minimize)
    else:
        table, _ = max_cumulative_reward(mdp, prop.structure, horizon, minimize=minimize)
    return table


def check(model: Pbn, prop: Property | str, actions: ActionSpace | None = None, perturb: bool = True,
          init=None) -> float:
    """Value of ``prop`` at the initial state (all nodes 0 unless ``init`` is given)."""
    if isinstance(prop, str):
        prop = parse_property(prop)
    if not isinstance(prop.bound, int):
        raise ValueError(f"property bound {prop.bound!r} is a parameter; use run_experiment")
    table = _value_table(model, prop, prop.bound, actions, perturb)
    return float(table.values[prop.bound, _init_index(model, init)])


def experiment_times(start: int, end: int, step: int) -> list[int]:
    if step <= 0:
        raise ValueError("step must be positive")
    if start > end or start < 0:
        raise ValueError("need 0 <= start <= end")
    return list(range(start, end + 1, step))


def run_experiment(model: Pbn, prop: Property | str, start: int, end: int, step: int,
                   actions: ActionSpace | None = None, perturb: bool = True, init=None,
                   csv_out=None) -> list[tuple]:
    """``(T, value)`` for T = start, start+step, ... <= end.

    The property's bound is replaced by each T.  One backward induction up to
    the largest T yields every point, since its k-th table row is the value
    for horizon k.
    """
    if isinstance(prop, str):
        prop = parse_property(prop, allow_params=True)
    times = experiment_times(start, end, step)
    table = _value_table(model, prop, times[-1], actions, perturb)
    s0 = _init_index(model, init)
    series = [(t, float(table.values[t, s0])) for t in times]
    if csv_out is not None:
        csvio.write_text(csvio.format_series(series), csv_out)
    return series
