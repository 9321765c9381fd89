"""Discrete graphical models with log-space factor tables.

A model is a set of variables with finite domains plus a list of factors.
Each factor stores a flat, row-major log-potential table over an ordered
scope; the last scope variable varies fastest.  Zero-probability entries
are stored as ``-inf`` and propagate through sums, so an assignment that
hits any zero entry has objective ``-inf``.

An assignment is a plain integer numpy array of length ``num_vars`` holding
one value index per variable.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ModelError

Assignment = np.ndarray


@dataclass(frozen=True, eq=False)
class Move:
    """A single-variable change: set ``var`` to ``value``."""

    var: int
    value: int

    def __repr__(self) -> str:
        return f"Move({self.var}, {self.value})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Move)
            and self.var == other.var
            and self.value == other.value
        )

    def __hash__(self) -> int:
        return hash((self.var, self.value))


@dataclass(frozen=True, eq=False)
class Factor:
    """Log-potential table over an ordered variable scope.

    ``strides[k]`` is the flat-index stride of scope position ``k``; the
    last scope variable has stride 1.
    """

    scope: tuple[int, ...]
    log_table: np.ndarray
    strides: tuple[int, ...]

    @classmethod
    def from_log_table(cls, scope, cardinalities, log_table) -> "Factor":
        scope = tuple(int(v) for v in scope)
        if len(set(scope)) != len(scope):
            raise ModelError(f"factor scope has repeated variables: {scope}")
        n = len(cardinalities)
        for v in scope:
            if not 0 <= v < n:
                raise ModelError(f"factor scope references variable {v} outside 0..{n - 1}")
        cards = [int(cardinalities[v]) for v in scope]
        size = 1
        for c in cards:
            size *= c
        table = np.asarray(log_table, dtype=np.float64).reshape(-1)
        if table.size != size:
            raise ModelError(
                f"factor over scope {scope} needs {size} entries, got {table.size}"
            )
        if np.isnan(table).any() or (table == np.inf).any():
            raise ModelError(f"factor over scope {scope} has non-finite log entries")
        strides = [1] * len(scope)
        for k in range(len(scope) - 2, -1, -1):
            strides[k] = strides[k + 1] * cards[k + 1]
        table.setflags(write=False)
        return cls(scope=scope, log_table=table, strides=tuple(strides))

    def flat_index(self, x: Assignment) -> int:
        idx = 0
        for k, v in enumerate(self.scope):
            idx += self.strides[k] * int(x[v])
        return idx

    def entry(self, x: Assignment) -> float:
        return float(self.log_table[self.flat_index(x)])

    def max_entry(self) -> float:
        return float(self.log_table.max())


@dataclass(eq=False)
class GraphicalModel:
    """A factorized distribution over discrete variables.

    ``var_to_factors[i]`` lists the indices of every factor whose scope
    contains variable ``i``; ``var_positions[i]`` gives the matching
    position of ``i`` inside each of those scopes.
    """

    num_vars: int
    cardinalities: np.ndarray
    factors: list[Factor]
    var_to_factors: list[list[int]] = field(init=False, repr=False)
    var_positions: list[list[int]] = field(init=False, repr=False)

    def __post_init__(self):
        cards = np.asarray(self.cardinalities, dtype=np.int64)
        if cards.shape != (self.num_vars,):
            raise ModelError("cardinalities length does not match num_vars")
        if (cards < 1).any():
            raise ModelError("every variable needs cardinality >= 1")
        cards.setflags(write=False)
        object.__setattr__(self, "cardinalities", cards)

        v2f: list[list[int]] = [[] for _ in range(self.num_vars)]
        pos: list[list[int]] = [[] for _ in range(self.num_vars)]
        for fi, f in enumerate(self.factors):
            for k, v in enumerate(f.scope):
                if not 0 <= v < self.num_vars:
                    raise ModelError(
                        f"factor {fi} references variable {v} outside 0..{self.num_vars - 1}"
                    )
                v2f[v].append(fi)
                pos[v].append(k)
        self.var_to_factors = v2f
        self.var_positions = pos

    @classmethod
    def build(cls, cardinalities, factor_specs) -> "GraphicalModel":
        """Construct from (scope, log_table) pairs, deriving strides."""
        cards = np.asarray(cardinalities, dtype=np.int64)
        factors = [Factor.from_log_table(s, cards, t) for s, t in factor_specs]
        return cls(num_vars=len(cards), cardinalities=cards, factors=factors)

    def model_hash(self) -> str:
        """Stable content hash over domains, scopes, and table bytes."""
        h = hashlib.sha256()
        h.update(np.asarray(self.cardinalities, dtype="<i8").tobytes())
        for f in self.factors:
            h.update(np.asarray(f.scope, dtype="<i8").tobytes())
            h.update(f.log_table.astype("<f8").tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class QuerySpec:
    """Partition of the variables into query set and fixed evidence."""

    query_vars: np.ndarray
    evidence: dict[int, int]

    @classmethod
    def build(cls, model: GraphicalModel, evidence: dict[int, int]) -> "QuerySpec":
        evidence = {int(k): int(v) for k, v in evidence.items()}
        for v, val in evidence.items():
            if not 0 <= v < model.num_vars:
                raise ContractError(f"evidence variable {v} out of range")
            if not 0 <= val < int(model.cardinalities[v]):
                raise ContractError(f"evidence value {val} out of range for variable {v}")
        qv = np.array(
            [v for v in range(model.num_vars) if v not in evidence], dtype=np.int64
        )
        qv.setflags(write=False)
        return cls(query_vars=qv, evidence=evidence)

    def validate(self, model: GraphicalModel) -> None:
        seen = set(int(v) for v in self.query_vars) | set(self.evidence)
        if len(seen) != model.num_vars or len(self.query_vars) + len(
            self.evidence
        ) != model.num_vars:
            raise ContractError("query variables and evidence must partition the model")

    def is_consistent(self, x: Assignment) -> bool:
        return all(int(x[v]) == val for v, val in self.evidence.items())

    def require_consistent(self, x: Assignment) -> None:
        for v, val in self.evidence.items():
            if int(x[v]) != val:
                raise ContractError(
                    f"assignment sets evidence variable {v} to {int(x[v])}, expected {val}"
                )


def log_potential_sum(model: GraphicalModel, x: Assignment) -> float:
    """Objective value: sum of factor log-potentials at ``x``.

    ``-inf`` entries propagate, marking zero-probability assignments.
    """
    total = 0.0
    for f in model.factors:
        idx = 0
        for k, v in enumerate(f.scope):
            idx += f.strides[k] * int(x[v])
        total += f.log_table[idx]
    return float(total)


def ll_gain(model: GraphicalModel, x: Assignment, move: Move) -> float:
    """Objective change from applying ``move`` to ``x``.

    Touches only the factors incident to ``move.var``; equals the full
    recompute difference up to float associativity.  When both the old and
    the new incident sums are ``-inf`` the gain is defined as ``-inf``
    (moving between impossible states is never attractive).
    """
    cur = int(x[move.var])
    if move.value == cur:
        raise ContractError(f"move sets variable {move.var} to its current value")
    old_sum = 0.0
    new_sum = 0.0
    fids = model.var_to_factors[move.var]
    poss = model.var_positions[move.var]
    for fi, k in zip(fids, poss):
        f = model.factors[fi]
        base = 0
        for j, v in enumerate(f.scope):
            base += f.strides[j] * int(x[v])
        old_sum += f.log_table[base]
        new_sum += f.log_table[base + f.strides[k] * (move.value - cur)]
    if new_sum == -math.inf:
        return -math.inf
    if old_sum == -math.inf:
        return math.inf
    return float(new_sum - old_sum)


def value_gains(model: GraphicalModel, x: Assignment, var: int) -> np.ndarray:
    """Gains of setting ``var`` to each value in its domain (current -> 0)."""
    card = int(model.cardinalities[var])
    cur = int(x[var])
    totals = np.zeros(card, dtype=np.float64)
    fids = model.var_to_factors[var]
    poss = model.var_positions[var]
    for fi, k in zip(fids, poss):
        f = model.factors[fi]
        base = 0
        for j, v in enumerate(f.scope):
            base += f.strides[j] * int(x[v])
        s = f.strides[k]
        base -= s * cur
        totals += f.log_table[base : base + s * card : s]
    gains = totals - totals[cur]
    # both sums -inf -> nan; resolve to -inf, matching ll_gain
    np.copyto(gains, -np.inf, where=np.isnan(gains))
    gains[cur] = 0.0
    return gains


def hamming_distance(a: Assignment, b: Assignment, q: QuerySpec) -> int:
    """Number of query variables on which ``a`` and ``b`` disagree.

    Both assignments must agree with the evidence in ``q``.
    """
    for v, val in q.evidence.items():
        if int(a[v]) != val or int(b[v]) != val:
            raise ContractError(
                f"assignments disagree with evidence on variable {v}"
            )
    qv = q.query_vars
    return int(np.count_nonzero(a[qv] != b[qv]))


def random_assignment(
    model: GraphicalModel, rng: np.random.Generator, evidence: dict[int, int] | None = None
) -> Assignment:
    """Uniform random assignment, with evidence pinned when given."""
    x = rng.integers(0, np.asarray(model.cardinalities), dtype=np.int64)
    if evidence:
        for v, val in evidence.items():
            x[v] = val
    return x


def randomize_query_vars(
    x: Assignment, model: GraphicalModel, q: QuerySpec, rng: np.random.Generator
) -> None:
    """Re-draw every query variable of ``x`` uniformly, in place."""
    qv = q.query_vars
    x[qv] = rng.integers(0, np.asarray(model.cardinalities)[qv], dtype=np.int64)


def moved(x: Assignment, move: Move) -> Assignment:
    """Copy of ``x`` with ``move`` applied."""
    y = x.copy()
    y[move.var] = move.value
    return y
