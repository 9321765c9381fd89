"""Shared builders for randomized test instances.

Every helper takes an explicit ``numpy`` generator or seed so each test
controls its own randomness; nothing here reads global state.
"""
import itertools

import numpy as np

from mpesearch import GraphicalModel, QuerySpec, log_potential_sum


def random_model(
    rng: np.random.Generator,
    num_vars: int | None = None,
    min_vars: int = 5,
    max_vars: int = 50,
    max_card: int = 4,
    scale: float = 1.0,
) -> GraphicalModel:
    """Random connected model with mixed unary/pairwise/ternary factors."""
    if num_vars is None:
        num_vars = int(rng.integers(min_vars, max_vars + 1))
    cards = rng.integers(2, max_card + 1, size=num_vars)
    specs = []
    # a pairwise chain keeps every variable attached to the objective
    for v in range(num_vars - 1):
        size = int(cards[v] * cards[v + 1])
        specs.append(((v, v + 1), rng.normal(scale=scale, size=size)))
    for v in range(num_vars):
        if rng.random() < 0.4:
            specs.append(((v,), rng.normal(scale=scale, size=int(cards[v]))))
    extra = int(rng.integers(0, max(2, num_vars // 3)))
    for _ in range(extra):
        k = int(rng.integers(2, 4))
        scope = tuple(int(v) for v in rng.choice(num_vars, size=k, replace=False))
        size = 1
        for v in scope:
            size *= int(cards[v])
        specs.append((scope, rng.normal(scale=scale, size=size)))
    return GraphicalModel.build(cards, specs)


def random_query(
    model: GraphicalModel, rng: np.random.Generator, evidence_frac: float = 0.2
) -> QuerySpec:
    """Query over a random subset of variables; at least one stays free."""
    n = model.num_vars
    n_evid = min(int(evidence_frac * n), n - 1)
    ev_vars = rng.choice(n, size=n_evid, replace=False) if n_evid else []
    evidence = {int(v): int(rng.integers(int(model.cardinalities[v]))) for v in ev_vars}
    return QuerySpec.build(model, evidence)


def query_space(model: GraphicalModel, q: QuerySpec):
    """All assignments consistent with the evidence, as int64 arrays."""
    base = np.zeros(model.num_vars, dtype=np.int64)
    for v, val in q.evidence.items():
        base[v] = val
    qv = [int(v) for v in q.query_vars]
    ranges = [range(int(model.cardinalities[v])) for v in qv]
    for combo in itertools.product(*ranges):
        x = base.copy()
        for v, val in zip(qv, combo):
            x[v] = val
        yield x


def brute_force_best(model: GraphicalModel, q: QuerySpec):
    """Exhaustive optimum over the query space; only for tiny instances."""
    best_x, best_f = None, -np.inf
    for x in query_space(model, q):
        f = log_potential_sum(model, x)
        if f > best_f:
            best_x, best_f = x.copy(), f
    return best_x, best_f
