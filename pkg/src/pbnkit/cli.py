"""Command-line front end.

Exit codes: 0 success, 1 runtime or verification failure, 2 usage or parse
error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import csvio, ipr
from .expr import ExprSyntaxError
from .markov import NonConvergenceError, build_dtmc, find_attractors, point_mass, steady_state
from .mdp import ActionSpace
from .modelfmt import (
    BindError,
    ModelSyntaxError,
    PropertySyntaxError,
    check,
    load_model,
    parse_model,
    parse_property,
    run_experiment,
)
from .pbn import ValidationError, enumerate_realizations, index_to_state, realization_from_index
from .sim import export_csv, greedy_policy, simulate

OUTPUT_DIR_ENV = "PBNKIT_OUTPUT_DIR"
SQUARING_MAX_STATES = 4096

PROPERTY_HELP = """property grammar:
  Pmax=? [ F<=INT "label" ]        (also Pmin)
  R{"name"}max=? [ C<=INT ]        (also min; omit {"name"} for the first structure)
experiment templates put a parameter name in place of INT, e.g. C<=T"""

MODEL_HELP = """model grammar:
  pbn "name" { item* }
  node IDENT "description"? ;
  predictor IDENT { NUMBER : expr ; ... }
  perturb IDENT rate NUMBER ;
  label "name" = expr ;
  rewards "name" { expr : NUMBER ; ... }
expr uses ! & | ^ ( ) 0 1 and node names"""


class UsageError(Exception):
    pass


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _load(model: str):
    path = Path(model)
    if path.exists():
        return load_model(path)
    if model in ("ipr", "ipr.pbn"):
        return parse_model(ipr.bundled_model_text())
    raise UsageError(f"model file not found: {model}")


def _fmt_state(state) -> str:
    return "".join(str(b) for b in state)


def _is_ipr(model) -> bool:
    return model.name == "ipr" and model.names == list(ipr.NODE_NAMES)


def _parse_range(spec: str):
    try:
        name, rng = spec.split("=", 1)
        start, end, step = (int(x) for x in rng.split(":"))
    except ValueError:
        raise UsageError(f"--param expects NAME=START:END:STEP, got {spec!r}") from None
    if step <= 0 or start > end or start < 0:
        raise UsageError("--param needs 0 <= START <= END and STEP > 0")
    return name, start, end, step


def cmd_check(args, out):
    model = _load(args.model)
    prop = parse_property(args.property)
    value = check(model, prop, ActionSpace.named(model, args.actions), args.perturb)
    print(repr(value), file=out)


def cmd_experiment(args, out):
    model = _load(args.model)
    _, start, end, step = _parse_range(args.param)
    prop = parse_property(args.template, allow_params=True)
    series = run_experiment(model, prop, start, end, step, ActionSpace.named(model, args.actions), args.perturb)
    export_csv(series, args.out)
    print(f"wrote {len(series)} rows to {args.out}", file=out)


def cmd_sim(args, out):
    model = _load(args.model)
    policy = None
    if args.policy == "greedy":
        policy = greedy_policy(model, args.rewards, args.horizon, ActionSpace.named(model, args.actions), args.perturb)
    stats = simulate(model, [0] * model.n, args.horizon, args.traj, args.seed, args.rewards,
                     policy=policy, perturb=args.perturb, workers=args.workers)
    out.write(csvio.format_stats(stats.rows()))
    if args.out:
        export_csv(stats, args.out)


def cmd_attractors(args, out):
    model = _load(args.model)
    if args.all:
        realizations = enumerate_realizations(model)
        indices = range(len(realizations))
    else:
        indices = [args.realization]
    for idx in indices:
        try:
            real = realization_from_index(model, idx)
        except IndexError as exc:
            raise UsageError(str(exc)) from None
        found = find_attractors(model, real)
        print(f"realization {idx} predictors {list(real.indices)} probability {real.probability!r}", file=out)
        for k, att in enumerate(found.attractors):
            cycle = " -> ".join(_fmt_state(s) for s in att.cycle)
            cats = ""
            if _is_ipr(model):
                cats = " [" + ", ".join(str(ipr.classify(s)) for s in att.cycle) + "]"
            print(f"  attractor {k}: period {att.period} basin {att.basin_size}: {cycle}{cats}", file=out)


def cmd_steady(args, out):
    model = _load(args.model)
    dtmc = build_dtmc(model, args.perturb)
    method = args.method
    if method == "auto":
        method = "squaring" if dtmc.num_states <= SQUARING_MAX_STATES else "power"
    pi = steady_state(dtmc, point_mass(dtmc.num_states, 0), args.tol, args.max_iter, args.damping, method)
    print("state,probability", file=out)
    for s, p in enumerate(pi):
        if p > 0:
            print(f"{_fmt_state(index_to_state(s, model.n))},{csvio.fmt(p)}", file=out)


def cmd_ipr_classify(args, out):
    bits = [args.x1, args.x2, args.x3, args.x4]
    if any(b not in ("0", "1") for b in bits):
        raise UsageError("component states must be 0 or 1")
    state = tuple(int(b) for b in bits)
    mapping = ipr.load_mapping(Path(args.mapping).read_text()) if args.mapping else None
    faults = sorted(ipr.isolate(state), key=ipr.COMPONENTS.index)
    print(ipr.classify(state, mapping), file=out)
    print("faults: " + (", ".join(faults) if faults else "none"), file=out)


DEMO_STRUCTURES = ("combined", "normop", "failure", "fault1", "fault2")


def cmd_ipr_demo(args, out):
    model = parse_model(ipr.bundled_model_text())
    outdir = Path(args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    actions = ActionSpace.named(model, args.actions)
    for name in DEMO_STRUCTURES:
        prop = parse_property(f'R{{"{name}"}}max=? [ C<=T ]', allow_params=True)
        path = outdir / f"{name}.csv"
        series = run_experiment(model, prop, 0, args.hours, args.step, actions, args.perturb, csv_out=path)
        print(f"{name},{csvio.fmt(series[-1][1])},{path}", file=out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pbnkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, actions_default="none"):
        sp.add_argument("--perturb", type=_on_off, default=True, metavar="on|off")
        sp.add_argument("--actions", choices=["none", "repair"], default=actions_default)

    sp = sub.add_parser("check", help="check one property at the initial state")
    sp.add_argument("model")
    sp.add_argument("property")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("experiment", help="sweep a property bound and write CSV")
    sp.add_argument("model")
    sp.add_argument("template")
    sp.add_argument("--param", required=True, metavar="NAME=START:END:STEP")
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("sim", help="Monte Carlo simulation")
    sp.add_argument("model")
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("--traj", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--rewards", required=True)
    sp.add_argument("--policy", choices=["greedy", "noop"], default="noop")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out")
    common(sp, actions_default="repair")
    sp.set_defaults(func=cmd_sim)

    sp = sub.add_parser("attractors", help="attractors of constituent networks")
    sp.add_argument("model")
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--realization", type=int, default=0, metavar="INDEX")
    group.add_argument("--all", action="store_true")
    sp.set_defaults(func=cmd_attractors)

    sp = sub.add_parser("steady", help="long-run distribution by power iteration")
    sp.add_argument("model")
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--damping", type=float, default=0.0)
    sp.add_argument("--max-iter", type=int, default=1_000_000)
    sp.add_argument("--method", choices=["auto", "power", "squaring"], default="auto",
                    help="auto squares the matrix for chains of at most 4096 states")
    sp.add_argument("--perturb", type=_on_off, default=True, metavar="on|off")
    sp.set_defaults(func=cmd_steady)

    sp = sub.add_parser("ipr", help="bundled Intelligent Power Router workflows")
    isub = sp.add_subparsers(dest="ipr_command", required=True)
    dp = isub.add_parser("demo", help="reward experiments over one year, one CSV per structure")
    dp.add_argument("--out-dir", help=f"default: ${OUTPUT_DIR_ENV} or the current directory")
    dp.add_argument("--hours", type=int, default=ipr.HOURS_PER_YEAR)
    dp.add_argument("--step", type=int, default=24)
    common(dp)
    dp.set_defaults(func=cmd_ipr_demo)
    cp = isub.add_parser("classify", help="failure category and isolated faults")
    for name in ("x1", "x2", "x3", "x4"):
        cp.add_argument(name)
    cp.add_argument("--mapping", help="file of 12 'merged-state-index category' lines")
    cp.set_defaults(func=cmd_ipr_classify)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, out)
    except PropertySyntaxError as exc:
        print(f"error: {exc}\n{PROPERTY_HELP}", file=err)
        return 2
    except (ModelSyntaxError, ExprSyntaxError) as exc:
        print(f"error: {exc}\n{MODEL_HELP}", file=err)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=err)
        return 2
    except (BindError, ValidationError, NonConvergenceError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=err)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
