"""Acceptance checks, one per criterion, each at its stated tolerance.

Every check prints a ``PASS``/``FAIL`` line.  Run directly for the report
alone (``python tests/test_acceptance.py``) or through pytest.
"""
import subprocess
import sys
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from pbnkit import ipr  # noqa: E402
from pbnkit.markov import expected_cumulative_reward, find_attractors, point_mass, successor_map  # noqa: E402
from pbnkit.mdp import ActionSpace, build_mdp, max_cumulative_reward  # noqa: E402
from pbnkit.modelfmt import (  # noqa: E402
    ModelSyntaxError,
    PropertySyntaxError,
    parse_model,
    parse_property,
    run_experiment,
    serialize_model,
)
from pbnkit.pbn import enumerate_realizations, reward_vector, state_to_index, validate  # noqa: E402
from pbnkit.sim import simulate  # noqa: E402

from randmodels import join_pieces, model_mutations, random_pbn, random_property_pieces  # noqa: E402

HOURS = ipr.HOURS_PER_YEAR
N_TRAJ = 10_000
RESULTS = {}


def criterion(key, title):
    def wrap(fn):
        fn.key, fn.title = key, title
        return fn
    return wrap


# ------------------------------------------------------------------ checks

@criterion("1", "realization count")
def c1():
    reals = enumerate_realizations(ipr.bundled_model())
    total = sum(r.probability for r in reals)
    return len(reals) == 8 and abs(total - 1.0) <= 1e-9, f"D={len(reals)}, sum={total!r}"


@criterion("2", "selection probabilities and validation")
def c2():
    pbn = ipr.bundled_model()
    probs = [tuple(c for _, c in node.predictors) for node in pbn.nodes]
    ok = probs == [(1.0,), (0.9611, 0.0389), (0.9611, 0.0389), (0.9611, 0.0389)] and validate(pbn) == []
    return ok, f"probabilities={probs}, violations={len(validate(pbn))}"


@criterion("3", "classification partition")
def c3():
    counts = Counter(ipr.classify(m.representative) for m in ipr.merged_state_space())
    card = tuple(counts[c] for c in (ipr.FailureCategory.CAT1_FAULT, ipr.FailureCategory.CAT2_NORMAL,
                                     ipr.FailureCategory.CAT3_FAILURE, ipr.FailureCategory.CAT4_FAULT))
    swap = all(ipr.classify((a, b, c, d)) == ipr.classify((a, b, d, c))
               for a in (0, 1) for b in (0, 1) for c in (0, 1) for d in (0, 1))
    return card == (1, 1, 3, 7) and swap, f"cardinalities={card}, swap-invariant={swap}"


@criterion("4", "row stochasticity fuzz")
def c4():
    rng = np.random.default_rng(1000)
    worst = 0.0
    for _ in range(1000):
        pbn = random_pbn(rng, max_n=8, max_preds=3)
        perturb = bool(rng.integers(2))
        m = build_mdp(pbn, ActionSpace.repair(pbn), perturb)
        sums = m.dtmc.row_sums()
        worst = max(worst, float(np.abs(sums - 1.0).max()))
        for a in range(len(m.actions)):
            worst = max(worst, float(np.abs(np.asarray(m.dtmc.matrix[m.succ[a]].sum(axis=1)).ravel() - 1.0).max()))
    return worst <= 1e-12, f"max |row sum - 1| = {worst:.3g}"


def attractor_oracle(succ):
    """Iterate every state |S| steps so all have entered their cycle."""
    size = len(succ)
    x = np.arange(size)
    for _ in range(size):
        x = succ[x]
    basins = {}
    for s, start in enumerate(x):
        cyc = [int(start)]
        y = int(succ[start])
        while y != cyc[0]:
            cyc.append(y)
            y = int(succ[y])
        k = cyc.index(min(cyc))
        key = tuple(cyc[k:] + cyc[:k])
        basins[key] = basins.get(key, 0) + 1
    return basins


@criterion("5", "attractor oracle")
def c5():
    rng = np.random.default_rng(2000)
    bad = 0
    for _ in range(200):
        pbn = random_pbn(rng, max_n=10, deterministic=True)
        real = enumerate_realizations(pbn)[0]
        found = find_attractors(pbn, real)
        got = {tuple(state_to_index(s) for s in a.cycle): a.basin_size for a in found.attractors}
        oracle = attractor_oracle(np.asarray(successor_map(pbn, real)))
        if got != oracle or sum(got.values()) != 2 ** pbn.n:
            bad += 1
    return bad == 0, f"{200 - bad}/200 networks match"


def _ipr_normop_exact(horizon):
    pbn = ipr.bundled_model()
    m = build_mdp(pbn, ActionSpace.noop_only())
    v, _ = max_cumulative_reward(m, "normop", horizon)
    transient = expected_cumulative_reward(m.dtmc, point_mass(16, 0), reward_vector(pbn, pbn.rewards["normop"]), horizon)
    return float(v.values[horizon, 0]), float(transient)


@criterion("6", "value iteration vs transient sum")
def c6():
    vi, tr = _ipr_normop_exact(2000)
    return abs(vi - tr) <= 1e-9, f"VI={vi!r}, transient={tr!r}, diff={abs(vi - tr):.3g}"


@criterion("7", "Monte Carlo vs exact")
def c7():
    exact, _ = _ipr_normop_exact(2000)
    pbn = ipr.bundled_model()
    notes = []
    for seed in (7, 77):  # statistical: one rerun with a fresh seed
        st = simulate(pbn, (0, 0, 0, 0), 2000, N_TRAJ, seed, rewards="normop")
        z = abs(st.reward_mean - exact) / st.reward_se
        notes.append(f"seed {seed}: mean={st.reward_mean:.4f} se={st.reward_se:.4f} z={z:.2f}")
        if z <= 3:
            return True, f"exact={exact:.4f}; " + "; ".join(notes)
    return False, f"exact={exact:.4f}; " + "; ".join(notes)


@criterion("8", "monotone experiment series")
def c8():
    pbn = ipr.bundled_model()
    details = []
    ok = True
    for actions in (ActionSpace.noop_only(), ActionSpace.repair(pbn)):
        for name in pbn.rewards:
            series = run_experiment(pbn, f'R{{"{name}"}}max=? [C<=T]', 0, HOURS, 24, actions)
            values = np.array([v for _, v in series])
            good = len(series) == 366 and values[0] == 0.0 and bool((np.diff(values) >= 0).all())
            ok &= good
            if not good:
                details.append(f"{name}/{len(actions)} actions")
    return ok, "all 10 series nondecreasing with V_0 = 0" if ok else "bad: " + ", ".join(details)


_YEAR = {}


def _year_noop():
    if "noop" not in _YEAR:
        _YEAR["noop"] = simulate(ipr.bundled_model(), (0, 0, 0, 0), HOURS, N_TRAJ, 9, rewards="normop")
    return _YEAR["noop"]


@criterion("9a", "noop normal occupancy vs analytic no-repair oracle")
def c9a():
    st = _year_noop()
    oracle = ipr.occupancy_oracle()
    occ, se = st.occupancy["normal"], st.occupancy_se["normal"]
    z = abs(occ - oracle) / se
    return z <= 3, f"occupancy={occ:.5f} se={se:.2g} oracle={oracle:.5f} z={z:.1f}"


@criterion("9b", "greedy repair occupancy")
def c9b():
    pbn = ipr.bundled_model()
    m = build_mdp(pbn, ActionSpace.repair(pbn))
    _, policy = max_cumulative_reward(m, "combined", HOURS)
    st = simulate(pbn, (0, 0, 0, 0), HOURS, N_TRAJ, 10, rewards="combined", policy=policy)
    noop = _year_noop().occupancy["normal"]
    occ = st.occupancy["normal"]
    return occ > noop and occ > 0.999, f"greedy={occ:.6f}, noop={noop:.6f}"


@criterion("9c", "normal hours dominate non-normal hours")
def c9c():
    pbn = ipr.bundled_model()
    m = build_mdp(pbn, ActionSpace.noop_only())
    hours = {name: float(max_cumulative_reward(m, name, HOURS)[0].values[HOURS, 0])
             for name in ("normop", "failure", "fault1", "fault2")}
    other = hours["failure"] + hours["fault1"] + hours["fault2"]
    ratio = hours["normop"] / other
    return ratio >= 10, f"Cat2 hours={hours['normop']:.2f}, others={other:.2f}, ratio={ratio:.1f}"


@criterion("10", "parser round trips and mutation rejection")
def c10():
    rng = np.random.default_rng(3000)
    text = ipr.bundled_model_text()
    ok = parse_model(serialize_model(parse_model(text))) == parse_model(text)
    rejected = total = 0
    for _ in range(1000):
        pbn = random_pbn(rng, max_n=8)
        s = serialize_model(pbn)
        ok &= parse_model(s) == pbn
        pieces = random_property_pieces(rng)
        prop = parse_property(join_pieces(rng, pieces))
        ok &= parse_property(str(prop)) == prop
        for bad in model_mutations(rng, s, 1):
            total += 1
            try:
                parse_model(bad)
            except ModelSyntaxError as exc:
                rejected += exc.line >= 1 and exc.column >= 1
        k = int(rng.integers(len(pieces)))
        total += 1
        try:
            parse_property(join_pieces(rng, pieces[:k] + [" "] + pieces[k + 1:]))
        except PropertySyntaxError as exc:
            rejected += exc.position >= 1
    ok &= rejected == total
    return ok, f"1000 models + 1000 properties round-trip; {rejected}/{total} mutations rejected with a position"


GOLDEN_CASES = [
    (["ipr", "classify", "0", "0", "0", "0"], "classify_0000.txt"),
    (["check", "ipr.pbn", 'Pmax=? [F<=10 "normal"]', "--perturb", "off"], "check_normal.txt"),
]


@criterion("11", "CLI golden files")
def c11():
    import tempfile

    golden = HERE / "golden"
    ok = True
    with tempfile.TemporaryDirectory() as d:
        for run in range(2):
            for argv, name in GOLDEN_CASES:
                out = subprocess.run([sys.executable, "-m", "pbnkit", *argv], capture_output=True, check=False)
                ok &= out.returncode == 0 and out.stdout == (golden / name).read_bytes()
            dest = Path(d) / f"normop{run}.csv"
            out = subprocess.run([sys.executable, "-m", "pbnkit", "experiment", "ipr.pbn", 'R{"normop"}max=? [C<=T]',
                                  "--param", "time=0:8760:24", "--out", str(dest)], capture_output=True, check=False)
            ok &= out.returncode == 0 and dest.read_bytes() == (golden / "normop.csv").read_bytes()
        ok &= (Path(d) / "normop0.csv").read_bytes().count(b"\n") == 367
    return ok, "classify, check and 366-row CSV byte-identical to golden over two runs"


CHECKS = [c1, c2, c3, c4, c5, c6, c7, c8, c9a, c9b, c9c, c10, c11]


def run_check(fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    line = f"{'PASS' if ok else 'FAIL'}  criterion {fn.key:<3} {fn.title}: {detail} ({time.perf_counter() - t0:.1f}s)"
    RESULTS[fn.key] = line
    return ok, line


@pytest.mark.parametrize("fn", CHECKS, ids=[f"criterion_{fn.key}" for fn in CHECKS])
def test_criterion(fn, capsys):
    ok, line = run_check(fn)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    failures = 0
    for fn in CHECKS:
        ok, line = run_check(fn)
        print(line, flush=True)
        failures += not ok
    sys.exit(1 if failures else 0)
