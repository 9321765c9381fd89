"""Core model arithmetic against independent recomputation."""
import math

import numpy as np
import pytest

from mpesearch import (
    ContractError,
    GraphicalModel,
    ModelError,
    Move,
    QuerySpec,
    hamming_distance,
    ll_gain,
    log_potential_sum,
    moved,
    random_assignment,
)
from mpesearch.model import randomize_query_vars, value_gains

from conftest import random_model, random_query


def _full_sum(model, x):
    # independent objective: iterate factor tables by explicit indexing
    total = 0.0
    for f in model.factors:
        idx = 0
        mul = 1
        for v in reversed(f.scope):
            idx += mul * int(x[v])
            mul *= int(model.cardinalities[v])
        total += float(f.log_table[idx])
    return total


def test_log_potential_sum_matches_independent_indexing():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        m = random_model(rng, max_vars=20)
        for _ in range(20):
            x = random_assignment(m, rng)
            assert log_potential_sum(m, x) == pytest.approx(_full_sum(m, x), rel=1e-12)


def test_ll_gain_equals_full_recompute():
    """Incremental gain against a from-scratch difference, 1000 pairs."""
    rng = np.random.default_rng(7)
    m = random_model(rng, max_vars=30)
    q = random_query(m, rng)
    for _ in range(1000):
        x = random_assignment(m, rng, q.evidence)
        v = int(rng.choice(q.query_vars))
        card = int(m.cardinalities[v])
        if card < 2:
            continue
        val = (int(x[v]) + 1 + int(rng.integers(card - 1))) % card
        mv = Move(v, val)
        gain = ll_gain(m, x, mv)
        full = log_potential_sum(m, moved(x, mv)) - log_potential_sum(m, x)
        assert gain == pytest.approx(full, rel=1e-9, abs=1e-9)


def test_ll_gain_rejects_noop_move():
    rng = np.random.default_rng(0)
    m = random_model(rng, num_vars=5)
    x = random_assignment(m, rng)
    with pytest.raises(ContractError):
        ll_gain(m, x, Move(0, int(x[0])))


def test_ll_gain_infinity_conventions():
    """Moving into a zero-probability state scores -inf; moving out of
    one into a possible state scores +inf; between two impossible states
    scores -inf."""
    table = np.array([0.0, -np.inf, -np.inf, 1.0])  # over (x0, x1), x1 fastest
    m = GraphicalModel.build([2, 2], [((0, 1), table)])

    x = np.array([0, 0])  # finite entry
    assert ll_gain(m, x, Move(1, 1)) == -math.inf  # lands on (0,1)

    x = np.array([0, 1])  # -inf entry
    assert ll_gain(m, x, Move(1, 0)) == math.inf  # escapes to (0,0)
    assert ll_gain(m, x, Move(0, 1)) == math.inf  # escapes to (1,1)

    x = np.array([1, 0])  # the other -inf entry
    assert ll_gain(m, x, Move(0, 0)) == math.inf  # (1,0) -> (0,0) possible
    assert ll_gain(m, x, Move(1, 1)) == math.inf  # (1,0) -> (1,1) possible


def test_ll_gain_between_impossible_states_is_minus_inf():
    # unary zero on x0=1 makes every x0=1 state impossible regardless of x1
    m = GraphicalModel.build(
        [2, 2],
        [((0,), np.array([0.0, -np.inf])), ((1,), np.array([0.3, -0.2]))],
    )
    x = np.array([1, 0])
    # flipping x1 keeps the impossible unary; both sums stay finite for the
    # touched factor though, so gain is finite here
    assert ll_gain(m, x, Move(1, 1)) == pytest.approx(-0.5)
    # flipping x0 to 0 leaves the zero entry: +inf
    assert ll_gain(m, x, Move(0, 0)) == math.inf
    # and a pairwise all-impossible factor pins both endpoint sums at -inf
    m2 = GraphicalModel.build([2, 2], [((0, 1), np.full(4, -np.inf))])
    assert ll_gain(m2, np.array([0, 0]), Move(0, 1)) == -math.inf


def test_value_gains_row_matches_ll_gain():
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        m = random_model(rng, max_vars=15)
        x = random_assignment(m, rng)
        for v in range(m.num_vars):
            gains = value_gains(m, x, v)
            assert gains[int(x[v])] == 0.0
            for val in range(int(m.cardinalities[v])):
                if val == int(x[v]):
                    continue
                assert gains[val] == pytest.approx(
                    ll_gain(m, x, Move(v, val)), rel=1e-9, abs=1e-12
                )


def test_var_to_factors_is_exact_incidence():
    rng = np.random.default_rng(3)
    m = random_model(rng, max_vars=25)
    for v in range(m.num_vars):
        expect = [fi for fi, f in enumerate(m.factors) if v in f.scope]
        assert m.var_to_factors[v] == expect
        for fi, k in zip(m.var_to_factors[v], m.var_positions[v]):
            assert m.factors[fi].scope[k] == v


def test_factor_strides_last_variable_fastest():
    rng = np.random.default_rng(4)
    m = random_model(rng, num_vars=6)
    for f in m.factors:
        assert f.strides[-1] == 1
        # walking the last scope variable by one moves the flat index by one
        x = random_assignment(m, rng)
        x[f.scope[-1]] = 0
        i0 = f.flat_index(x)
        if int(m.cardinalities[f.scope[-1]]) > 1:
            x[f.scope[-1]] = 1
            assert f.flat_index(x) == i0 + 1


def test_model_build_validations():
    with pytest.raises(ModelError):
        GraphicalModel.build([2, 2], [((0, 0), np.zeros(4))])  # repeated scope var
    with pytest.raises(ModelError):
        GraphicalModel.build([2, 2], [((0, 1), np.zeros(3))])  # wrong table size
    with pytest.raises(ModelError):
        GraphicalModel.build([2, 2], [((0,), np.array([0.0, np.inf]))])  # +inf entry
    with pytest.raises(ModelError):
        GraphicalModel.build([2, 2], [((0, 5), np.zeros(4))])  # unknown variable
    with pytest.raises(ModelError):
        GraphicalModel(num_vars=3, cardinalities=np.array([2, 2]), factors=[])


def test_model_hash_sensitivity():
    rng = np.random.default_rng(5)
    m = random_model(rng, num_vars=6)
    h = m.model_hash()
    assert h == m.model_hash()  # stable
    specs = [(f.scope, f.log_table.copy()) for f in m.factors]
    specs[0][1][0] += 1e-9
    m2 = GraphicalModel.build(m.cardinalities, specs)
    assert m2.model_hash() != h


def test_query_spec_partition_and_consistency():
    rng = np.random.default_rng(6)
    m = random_model(rng, num_vars=8)
    q = QuerySpec.build(m, {2: 0, 5: 1})
    assert sorted(list(q.query_vars) + [2, 5]) == list(range(8))
    x = random_assignment(m, rng, q.evidence)
    assert q.is_consistent(x)
    x[2] = (x[2] + 1) % int(m.cardinalities[2])
    assert not q.is_consistent(x)
    with pytest.raises(ContractError):
        q.require_consistent(x)
    with pytest.raises(ContractError):
        QuerySpec.build(m, {99: 0})
    with pytest.raises(ContractError):
        QuerySpec.build(m, {0: int(m.cardinalities[0])})


def test_hamming_distance_counts_query_vars_only():
    rng = np.random.default_rng(8)
    m = random_model(rng, num_vars=10)
    q = QuerySpec.build(m, {0: 1})
    a = random_assignment(m, rng, q.evidence)
    b = a.copy()
    assert hamming_distance(a, b, q) == 0
    flipped = [int(v) for v in rng.choice(q.query_vars, size=3, replace=False)]
    for v in flipped:
        b[v] = (b[v] + 1) % int(m.cardinalities[v])
    assert hamming_distance(a, b, q) == 3
    b[0] = 0  # break the evidence
    with pytest.raises(ContractError):
        hamming_distance(a, b, q)


def test_random_assignment_respects_evidence_and_domains():
    rng = np.random.default_rng(9)
    m = random_model(rng, num_vars=12)
    q = random_query(m, rng, evidence_frac=0.4)
    for _ in range(50):
        x = random_assignment(m, rng, q.evidence)
        assert q.is_consistent(x)
        assert (x >= 0).all() and (x < m.cardinalities).all()


def test_randomize_query_vars_leaves_evidence_alone():
    rng = np.random.default_rng(10)
    m = random_model(rng, num_vars=12)
    q = random_query(m, rng, evidence_frac=0.4)
    x = random_assignment(m, rng, q.evidence)
    before = x.copy()
    randomize_query_vars(x, m, q, rng)
    for v, val in q.evidence.items():
        assert int(x[v]) == val == int(before[v])


def test_randomization_is_uniform_per_variable():
    # chi-square style sanity: every value of a 3-valued variable appears
    # in roughly a third of many redraws
    m = GraphicalModel.build([3], [((0,), np.zeros(3))])
    q = QuerySpec.build(m, {})
    rng = np.random.default_rng(11)
    counts = np.zeros(3)
    x = np.zeros(1, dtype=np.int64)
    n = 30_000
    for _ in range(n):
        randomize_query_vars(x, m, q, rng)
        counts[int(x[0])] += 1
    assert np.all(np.abs(counts / n - 1 / 3) < 0.02)
