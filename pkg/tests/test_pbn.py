import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from pbnkit import ipr
from pbnkit.expr import Not, Var, parse_expr
from pbnkit.pbn import (
    NodeSpec,
    Pbn,
    RewardStructure,
    UnknownNodeError,
    enumerate_realizations,
    index_to_state,
    intervene,
    next_state_distribution,
    realization_count,
    realization_from_index,
    realization_update,
    sample_step,
    state_bits,
    state_to_index,
    validate,
)
from pbnkit.rng import SplitMix64

from randmodels import random_pbn


def single(rate=0.1, expr="x"):
    return Pbn([NodeSpec("x", [(parse_expr(expr), 1.0)])], {"x": rate})


def kinds(pbn):
    return {v.kind for v in validate(pbn)}


def realization_oracle(pbn, state, perturb):
    """Successor distribution by summing over every constituent network."""
    dist = {}
    for real in enumerate_realizations(pbn):
        nxt = tuple(int(b) for b in realization_update(pbn, real, np.array([state], dtype=np.uint8))[0])
        if perturb:
            # independent flips on top of the deterministic update
            for flips in range(2 ** pbn.n):
                p = real.probability
                out = list(nxt)
                for j, name in enumerate(pbn.names):
                    rate = pbn.rate(name)
                    if (flips >> j) & 1:
                        p *= rate
                        out[j] ^= 1
                    else:
                        p *= 1.0 - rate
                if p > 0:
                    dist[tuple(out)] = dist.get(tuple(out), 0.0) + p
        else:
            dist[nxt] = dist.get(nxt, 0.0) + real.probability
    return dist


# ----------------------------------------------------------------- validate

def test_validate_ipr_ok():
    assert validate(ipr.builtin_model()) == []


def test_validate_normalization():
    pbn = Pbn([NodeSpec("x", [(Var("x"), 0.5), (Not(Var("x")), 0.4)])])
    assert kinds(pbn) == {"NormalizationViolation"}


def test_validate_unbound():
    pbn = Pbn([NodeSpec("x", [(parse_expr("x & y"), 1.0)])])
    assert kinds(pbn) == {"UnboundVariable"}


def test_validate_other_violations():
    assert "EmptyPredictorList" in kinds(Pbn([NodeSpec("x", [])]))
    assert "PerturbationRange" in kinds(single(rate=1.0))
    assert "PerturbationRange" in kinds(single(rate=-0.1))
    bad = Pbn([NodeSpec("x", [(Var("x"), 1.0)])], rewards={"r": RewardStructure("r", [(Var("x"), -1.0)])})
    assert "NegativeReward" in kinds(bad)
    assert "EmptyNetwork" in kinds(Pbn([]))


# ------------------------------------------------------------ realizations

def test_ipr_realizations():
    pbn = ipr.builtin_model()
    reals = enumerate_realizations(pbn)
    assert len(reals) == 8 == realization_count(pbn)
    assert math.isclose(sum(r.probability for r in reals), 1.0, abs_tol=1e-9)
    best = max(r.probability for r in reals)
    assert best == pytest.approx(0.9611 ** 3, abs=1e-15)
    assert best == pytest.approx(0.887781, abs=5e-7)


def test_single_predictor_realization():
    reals = enumerate_realizations(single())
    assert len(reals) == 1 and reals[0].probability == 1.0


def test_realization_index_order():
    pbn = ipr.builtin_model()
    for k, real in enumerate(enumerate_realizations(pbn)):
        assert realization_from_index(pbn, k) == real


def test_realization_cap():
    from pbnkit.pbn import CapExceededError
    with pytest.raises(CapExceededError):
        enumerate_realizations(ipr.builtin_model(), cap=4)


def test_realization_count_fuzz():
    rng = np.random.default_rng(7)
    for _ in range(50):
        pbn = random_pbn(rng, max_n=6)
        reals = enumerate_realizations(pbn)
        assert len(reals) == math.prod(pbn.predictor_counts)
        assert abs(sum(r.probability for r in reals) - 1.0) < 1e-9


# ------------------------------------------------------------ step semantics

def test_ipr_normal_is_fixed_point():
    assert next_state_distribution(ipr.builtin_model(), (0, 0, 0, 0), perturb=False) == {(0, 0, 0, 0): 1.0}


def test_ipr_software_failed_step():
    dist = next_state_distribution(ipr.builtin_model(), (1, 0, 0, 0), perturb=False)
    assert all(s[0] == 1 for s in dist)
    assert dist[(1, 0, 0, 0)] == pytest.approx(0.9611 ** 3, abs=1e-15)
    assert dist[(1, 1, 1, 1)] == pytest.approx(0.0389 ** 3, abs=1e-15)
    assert len(dist) == 8
    # matches the enumeration of all 8 realizations
    oracle = realization_oracle(ipr.builtin_model(), (1, 0, 0, 0), False)
    assert dist.keys() == oracle.keys()
    for s in dist:
        assert dist[s] == pytest.approx(oracle[s], abs=1e-15)


def test_single_node_perturbation():
    dist = next_state_distribution(single(0.1), (0,), perturb=True)
    assert dist == {(0,): pytest.approx(0.9), (1,): pytest.approx(0.1)}


def test_distribution_fuzz_against_realizations():
    rng = np.random.default_rng(11)
    for _ in range(60):
        pbn = random_pbn(rng, max_n=5)
        perturb = bool(rng.integers(2))
        for idx in rng.integers(0, 2 ** pbn.n, size=3):
            state = index_to_state(int(idx), pbn.n)
            dist = next_state_distribution(pbn, state, perturb)
            assert abs(sum(dist.values()) - 1.0) < 1e-12
            oracle = realization_oracle(pbn, state, perturb)
            for s in set(dist) | set(oracle):
                assert abs(dist.get(s, 0.0) - oracle.get(s, 0.0)) < 1e-12


def test_mass_fuzz_up_to_8_nodes():
    rng = np.random.default_rng(3)
    for _ in range(40):
        pbn = random_pbn(rng, max_n=8)
        state = index_to_state(int(rng.integers(2 ** pbn.n)), pbn.n)
        assert abs(sum(next_state_distribution(pbn, state, True).values()) - 1.0) < 1e-12


# ---------------------------------------------------------------- sampling

def test_sample_deterministic_case():
    pbn = ipr.builtin_model()
    rng = np.random.default_rng(0)
    for _ in range(200):
        assert sample_step(pbn, (0, 0, 0, 0), rng, perturb=False) == (0, 0, 0, 0)


def test_sample_same_seed_same_successor():
    pbn = ipr.builtin_model()
    a = sample_step(pbn, (1, 0, 0, 0), SplitMix64(42))
    b = sample_step(pbn, (1, 0, 0, 0), SplitMix64(42))
    assert a == b


def test_sample_flip_frequency():
    pbn = single(0.1)
    rng = SplitMix64(2024)
    n = 100_000
    flips = sum(sample_step(pbn, (0,), rng)[0] for _ in range(n))
    se = math.sqrt(0.1 * 0.9 / n)
    assert abs(flips / n - 0.1) < 3 * se


@pytest.mark.parametrize("seed", [1, 2])
def test_sample_chi_square(seed):
    rng = np.random.default_rng(seed)
    pbn = random_pbn(rng, n=3)
    state = index_to_state(int(rng.integers(8)), 3)
    dist = next_state_distribution(pbn, state, True)
    n = 100_000
    draws = Counter(sample_step(pbn, state, rng) for _ in range(n))
    support_states = sorted(dist)
    assert set(draws) <= set(support_states)
    observed = [draws.get(s, 0) for s in support_states]
    expected = [dist[s] * n for s in support_states]
    if len(support_states) > 1:
        _, p = stats.chisquare(observed, expected)
        assert p > 0.001


# ---------------------------------------------------------------- intervene

def test_intervene():
    pbn = ipr.builtin_model()
    assert intervene(pbn, (1, 0, 0, 0), "x1", 0) == (0, 0, 0, 0)
    once = intervene(pbn, (1, 0, 1, 0), "x3", 0)
    assert intervene(pbn, once, "x3", 0) == once
    with pytest.raises(UnknownNodeError):
        intervene(pbn, (0, 0, 0, 0), "x9", 1)


def test_intervene_then_classify():
    pbn = ipr.builtin_model()
    s = (0, 1, 0, 0)
    assert ipr.classify(s) == ipr.FailureCategory.CAT4_FAULT
    fixed = intervene(pbn, s, "x2", 0)
    assert fixed == (0, 0, 0, 0)
    assert ipr.classify(fixed) == ipr.FailureCategory.CAT2_NORMAL


def test_intervene_changes_at_most_one_coordinate():
    pbn = ipr.builtin_model()
    for idx in range(16):
        s = index_to_state(idx, 4)
        for name in pbn.names:
            for v in (0, 1):
                t = intervene(pbn, s, name, v)
                assert sum(a != b for a, b in zip(s, t)) <= 1


def test_state_encoding():
    assert state_to_index((1, 0, 0, 0)) == 8
    assert index_to_state(8, 4) == (1, 0, 0, 0)
    bits = state_bits(3)
    assert [state_to_index(row) for row in bits] == list(range(8))
