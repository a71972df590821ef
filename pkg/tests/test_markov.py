import numpy as np
import pytest
from scipy import sparse

from pbnkit import ipr
from pbnkit.expr import Not, Var
from pbnkit.markov import (
    Dtmc,
    NonConvergenceError,
    build_dtmc,
    expected_cumulative_reward,
    find_attractors,
    point_mass,
    steady_state,
    successor_map,
    transient_distribution,
    transient_distributions,
)
from pbnkit.pbn import (
    CapExceededError,
    NodeSpec,
    Pbn,
    enumerate_realizations,
    index_to_state,
    next_state_distribution,
    realization_update,
    reward_vector,
    state_bits,
    state_to_index,
)

from randmodels import random_pbn


def identity_bn(n):
    return Pbn([NodeSpec(f"v{j}", [(Var(f"v{j}"), 1.0)]) for j in range(n)])


def chain(rows):
    m = sparse.csr_matrix(np.array(rows, dtype=float))
    return Dtmc(int(np.log2(m.shape[0])), m)


def test_ipr_normal_row():
    d = build_dtmc(ipr.builtin_model(), perturb=False)
    assert d.row(0) == {0: 1.0}


def test_identity_bn_matrix():
    d = build_dtmc(identity_bn(2), perturb=False)
    assert np.array_equal(d.matrix.toarray(), np.eye(4))


def test_rows_bit_identical_to_step_semantics():
    rng = np.random.default_rng(5)
    for _ in range(20):
        pbn = random_pbn(rng, max_n=5)
        for perturb in (False, True):
            d = build_dtmc(pbn, perturb)
            for s in range(2 ** pbn.n):
                dist = next_state_distribution(pbn, index_to_state(s, pbn.n), perturb)
                expected = {state_to_index(k): v for k, v in dist.items()}
                assert d.row(s) == expected


def test_rows_match_realization_weighting():
    # independent route: weight each constituent network's successor
    rng = np.random.default_rng(6)
    for _ in range(20):
        pbn = random_pbn(rng, max_n=6)
        d = build_dtmc(pbn, perturb=False)
        oracle = np.zeros((2 ** pbn.n, 2 ** pbn.n))
        for real in enumerate_realizations(pbn):
            nxt = realization_update(pbn, real, state_bits(pbn.n))
            for s, row in enumerate(nxt):
                oracle[s, state_to_index(row)] += real.probability
        assert np.abs(d.matrix.toarray() - oracle).max() < 1e-12


def test_rows_stochastic_fuzz():
    rng = np.random.default_rng(8)
    for _ in range(50):
        d = build_dtmc(random_pbn(rng), perturb=bool(rng.integers(2)))
        assert np.abs(d.row_sums() - 1.0).max() < 1e-12
        assert (d.matrix.data >= 0).all()


def test_cap():
    with pytest.raises(CapExceededError):
        build_dtmc(identity_bn(3), cap=2)


# --------------------------------------------------------------- attractors

def attractor_oracle(succ, n):
    """Iterate 2**n steps from every state, then read off the cycle reached."""
    size = 2 ** n
    cycles = {}
    basin = {}
    for s in range(size):
        x = s
        for _ in range(size):
            x = int(succ[x])
        cyc = [x]
        y = int(succ[x])
        while y != x:
            cyc.append(y)
            y = int(succ[y])
        k = cyc.index(min(cyc))
        key = tuple(cyc[k:] + cyc[:k])
        cycles[key] = True
        basin[key] = basin.get(key, 0) + 1
    return basin


def test_ipr_and_realization_attractors():
    pbn = ipr.builtin_model()
    real = enumerate_realizations(pbn)[0]
    found = find_attractors(pbn, real)
    fixed = {a.cycle[0] for a in found.attractors}
    assert all(a.period == 1 for a in found.attractors)
    assert fixed == {(0, 0, 0, 0)} | {index_to_state(8 + k, 4) for k in range(8)}
    assert sum(a.basin_size for a in found.attractors) == 16


def test_negation_cycle():
    pbn = Pbn([NodeSpec("x", [(Not(Var("x")), 1.0)])])
    found = find_attractors(pbn, enumerate_realizations(pbn)[0])
    assert found.cycles == [((0,), (1,))]
    assert found.attractors[0].basin_size == 2


def test_identity_attractors():
    pbn = identity_bn(2)
    found = find_attractors(pbn, enumerate_realizations(pbn)[0])
    assert len(found) == 4
    assert all(a.basin_size == 1 and a.period == 1 for a in found.attractors)


def test_attractors_against_oracle():
    rng = np.random.default_rng(12)
    for _ in range(30):
        pbn = random_pbn(rng, max_n=8, deterministic=True)
        real = enumerate_realizations(pbn)[0]
        found = find_attractors(pbn, real)
        oracle = attractor_oracle(successor_map(pbn, real), pbn.n)
        got = {tuple(state_to_index(s) for s in a.cycle): a.basin_size for a in found.attractors}
        assert got == oracle


# ------------------------------------------------------ transient / steady

def test_transient_zero_steps():
    d = build_dtmc(ipr.builtin_model())
    init = np.full(16, 1 / 16)
    assert np.array_equal(transient_distribution(d, init, 0), init)


def test_transient_single_node():
    pbn = Pbn([NodeSpec("x", [(Var("x"), 1.0)])], {"x": 0.1})
    d = build_dtmc(pbn)
    assert transient_distribution(d, [1.0, 0.0], 1) == pytest.approx([0.9, 0.1])


def test_transient_ipr_one_step():
    d = build_dtmc(ipr.builtin_model(), perturb=False)
    pi = transient_distribution(d, point_mass(16, 8), 1)
    assert pi[8] == pytest.approx(0.887781, abs=5e-7)
    assert pi.sum() == pytest.approx(1.0, abs=1e-9)


def test_transient_rows_match_loop():
    d = build_dtmc(ipr.builtin_model())
    table = transient_distributions(d, point_mass(16, 0), 50)
    assert np.allclose(table[50], transient_distribution(d, point_mass(16, 0), 50), atol=0, rtol=0)


def test_bad_init():
    d = build_dtmc(identity_bn(1))
    with pytest.raises(ValueError):
        transient_distribution(d, [0.5, 0.4], 1)


def test_steady_two_state():
    d = chain([[0.9, 0.1], [0.1, 0.9]])
    pi = steady_state(d, [1.0, 0.0], tol=1e-12)
    assert pi == pytest.approx([0.5, 0.5], abs=1e-10)


def test_steady_ipr_absorbing():
    d = build_dtmc(ipr.builtin_model(), perturb=False)
    pi = steady_state(d, point_mass(16, 0), tol=1e-12)
    assert np.array_equal(pi, point_mass(16, 0))


def test_steady_identity_uniform():
    d = build_dtmc(identity_bn(2))
    pi = steady_state(d, np.full(4, 0.25), tol=1e-12)
    assert np.array_equal(pi, np.full(4, 0.25))


def test_steady_periodic_needs_damping():
    d = chain([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(NonConvergenceError):
        steady_state(d, [1.0, 0.0], tol=1e-9, max_iter=1000)
    pi = steady_state(d, [1.0, 0.0], tol=1e-12, max_iter=10_000, damping=0.1)
    assert pi == pytest.approx([0.5, 0.5], abs=1e-9)


def test_transient_converges_to_steady():
    rng = np.random.default_rng(21)
    for _ in range(5):
        pbn = random_pbn(rng, max_n=4)
        # every rate positive makes the chain aperiodic and irreducible
        pbn = Pbn(pbn.nodes, {name: 0.2 for name in pbn.names}, pbn.labels, pbn.rewards)
        d = build_dtmc(pbn)
        init = point_mass(2 ** pbn.n, 0)
        tol = 1e-12
        pi = steady_state(d, init, tol=tol)
        far = transient_distribution(d, init, 5000)
        assert np.abs(far - pi).sum() < 10 * tol + 1e-11


def test_expected_cumulative_reward_simple():
    d = build_dtmc(ipr.builtin_model(), perturb=False)
    r = reward_vector(ipr.builtin_model(), ipr.builtin_model().rewards["normop"])
    assert expected_cumulative_reward(d, point_mass(16, 0), r, 10) == 10.0


def test_squaring_matches_power():
    rng = np.random.default_rng(22)
    for _ in range(5):
        pbn = random_pbn(rng, max_n=5)
        pbn = Pbn(pbn.nodes, {name: 0.1 for name in pbn.names}, pbn.labels, pbn.rewards)
        d = build_dtmc(pbn)
        init = point_mass(2 ** pbn.n, 0)
        a = steady_state(d, init, tol=1e-13)
        b = steady_state(d, init, tol=1e-13, method="squaring")
        assert np.abs(a - b).sum() < 1e-10


def test_squaring_handles_slow_mixing():
    d = build_dtmc(ipr.builtin_model())
    with pytest.raises(NonConvergenceError):
        steady_state(d, point_mass(16, 0), tol=1e-10, max_iter=10_000)
    pi = steady_state(d, point_mass(16, 0), tol=1e-12, method="squaring")
    assert abs(pi.sum() - 1.0) < 1e-12
    assert np.abs(pi @ d.matrix.toarray() - pi).sum() < 1e-10
