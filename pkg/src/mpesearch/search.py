"""Stochastic local search over the 1-flip neighborhood.

All searches share the same skeleton: enumerate the neighborhood of the
current assignment (query variables only), score it, apply the argmax
move with ties broken by neighborhood order (variable ascending, value
ascending), and record every visited state.  Restarts re-randomize the
query variables uniformly and consume one step like any move.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError
from .model import (
    Assignment,
    GraphicalModel,
    Move,
    QuerySpec,
    log_potential_sum,
    random_assignment,
    randomize_query_vars,
    value_gains,
)
from .scorers import NeighborScorer

ON_LOCAL_OPTIMUM = "on_local_optimum"
FIXED_INTERVAL = "fixed_interval"

# Recompute the incrementally-tracked objective this often to stop
# float drift from accumulating over long runs.
_RESYNC_EVERY = 512

# Penalty refreshes allowed inside a single step before the search takes
# the least-bad move anyway (guards w=0 and evidence-locked factors).
_MAX_PENALTY_ROUNDS = 10_000


@dataclass(frozen=True)
class SearchConfig:
    max_steps: int = 500
    restart_policy: str | None = ON_LOCAL_OPTIMUM
    restart_interval: int | None = None
    seed: int = 0
    deadline: float | None = None  # time.monotonic() horizon, wall-clock mode
    record_states: bool = True  # False keeps only objective values per step

    def validate(self) -> None:
        if self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.restart_policy not in (None, ON_LOCAL_OPTIMUM, FIXED_INTERVAL):
            raise ConfigError(f"unknown restart policy {self.restart_policy!r}")
        if self.restart_policy == FIXED_INTERVAL and (
            self.restart_interval is None or self.restart_interval < 1
        ):
            raise ConfigError("fixed_interval restarts need restart_interval >= 1")


@dataclass(frozen=True)
class GlsConfig:
    weight: float = 1.0

    def validate(self) -> None:
        if not self.weight >= 0.0:
            raise ConfigError(f"penalty weight must be >= 0, got {self.weight}")


@dataclass(eq=False)
class TrajectoryState:
    step: int
    values: Assignment | None  # None when snapshots were disabled
    F: float


@dataclass(eq=False)
class Trajectory:
    states: list[TrajectoryState] = field(default_factory=list)
    restarts: list[int] = field(default_factory=list)
    step_seconds: list[float] = field(default_factory=list)
    best_values: Assignment | None = None
    best_F: float = -np.inf
    meta: dict = field(default_factory=dict)

    @property
    def best_so_far(self) -> tuple[Assignment, float]:
        return self.best_values, self.best_F

    @property
    def num_steps(self) -> int:
        return len(self.states) - 1

    def f_curve(self) -> np.ndarray:
        return np.array([s.F for s in self.states], dtype=np.float64)

    def best_f_at(self, step: int) -> float:
        """Best objective seen up to and including ``step``."""
        if step < 0 or step > self.num_steps:
            raise ContractError(
                f"step {step} outside trajectory of {self.num_steps} steps"
            )
        return float(np.maximum.accumulate(self.f_curve())[step])

    def record(self, step: int, x: Assignment, F: float, keep_state: bool = True) -> None:
        self.states.append(TrajectoryState(step, x.copy() if keep_state else None, F))
        if F > self.best_F:
            self.best_F = F
            self.best_values = x.copy()


def enumerate_neighbors(model: GraphicalModel, x: Assignment, q: QuerySpec) -> list[Move]:
    """All single-variable changes of query variables, ordered by
    (variable ascending, value ascending), current values skipped."""
    moves: list[Move] = []
    cards = model.cardinalities
    for v in q.query_vars:
        v = int(v)
        cur = int(x[v])
        for val in range(int(cards[v])):
            if val != cur:
                moves.append(Move(v, val))
    return moves


def _neighborhood_with_gains(
    model: GraphicalModel, x: Assignment, q: QuerySpec
) -> tuple[list[Move], np.ndarray]:
    """Moves in neighborhood order plus their raw objective gains."""
    moves: list[Move] = []
    raw: list[float] = []
    cards = model.cardinalities
    for v in q.query_vars:
        v = int(v)
        card = int(cards[v])
        if card == 1:
            continue
        cur = int(x[v])
        gv = value_gains(model, x, v)
        for val in range(card):
            if val != cur:
                moves.append(Move(v, val))
                raw.append(gv[val])
    return moves, np.asarray(raw, dtype=np.float64)


def _prepare(
    model: GraphicalModel,
    q: QuerySpec,
    cfg: SearchConfig,
    x0: Assignment | None,
) -> tuple[Assignment, np.random.Generator, Trajectory]:
    cfg.validate()
    q.validate(model)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    if x0 is None:
        x = random_assignment(model, rng, q.evidence)
    else:
        x = np.asarray(x0, dtype=np.int64).copy()
        q.require_consistent(x)
    if not enumerate_neighbors(model, x, q):
        raise ConfigError("neighborhood is empty: no query variable can change value")
    traj = Trajectory()
    traj.record(0, x, log_potential_sum(model, x), keep_state=cfg.record_states)
    return x, rng, traj


def greedy_search(
    model: GraphicalModel,
    q: QuerySpec,
    scorer: NeighborScorer,
    cfg: SearchConfig,
    x0: Assignment | None = None,
) -> Trajectory:
    """Best-improvement local search under an arbitrary move scorer.

    One step is either an applied argmax move or a restart.  Under the
    ``on_local_optimum`` policy a restart fires whenever no move has a
    positive raw objective gain, whatever the scorer says; this keeps
    scorer variants comparable step for step.
    """
    x, rng, traj = _prepare(model, q, cfg, x0)
    F = traj.states[0].F
    since_restart = 0
    for step in range(1, cfg.max_steps + 1):
        if cfg.deadline is not None and time.monotonic() >= cfg.deadline:
            break
        t0 = time.perf_counter()
        moves, raw = _neighborhood_with_gains(model, x, q)
        restart = False
        if cfg.restart_policy == FIXED_INTERVAL:
            restart = since_restart + 1 >= cfg.restart_interval
        elif cfg.restart_policy == ON_LOCAL_OPTIMUM:
            restart = bool(raw.max() <= 0.0)
        if restart:
            randomize_query_vars(x, model, q, rng)
            F = log_potential_sum(model, x)
            traj.restarts.append(step)
            since_restart = 0
        else:
            scores = scorer.score_all(model, x, q, moves, ll_gains=raw)
            i = int(np.argmax(scores))
            m = moves[i]
            x[m.var] = m.value
            F = F + float(raw[i])
            since_restart += 1
            if step % _RESYNC_EVERY == 0:
                F = log_potential_sum(model, x)
        traj.record(step, x, F, keep_state=cfg.record_states)
        traj.step_seconds.append(time.perf_counter() - t0)
    return traj


class _PenaltyState:
    """Per-factor sparse penalty counts plus cached flat indices."""

    def __init__(self, model: GraphicalModel, x: Assignment):
        self.counts: list[dict[int, int]] = [{} for _ in model.factors]
        self.max_entries = [f.max_entry() for f in model.factors]
        self.cur_idx = np.array([f.flat_index(x) for f in model.factors], dtype=np.int64)

    def resync(self, model: GraphicalModel, x: Assignment) -> None:
        for fi, f in enumerate(model.factors):
            self.cur_idx[fi] = f.flat_index(x)

    def after_move(self, model: GraphicalModel, x_old_val: int, m: Move) -> None:
        for fi, k in zip(model.var_to_factors[m.var], model.var_positions[m.var]):
            f = model.factors[fi]
            self.cur_idx[fi] += f.strides[k] * (m.value - x_old_val)

    def delta(self, model: GraphicalModel, x: Assignment, moves: list[Move]) -> np.ndarray:
        out = np.zeros(len(moves), dtype=np.float64)
        for i, m in enumerate(moves):
            cur = int(x[m.var])
            d = 0
            for fi, k in zip(model.var_to_factors[m.var], model.var_positions[m.var]):
                pen = self.counts[fi]
                if not pen:
                    continue
                old = int(self.cur_idx[fi])
                new = old + model.factors[fi].strides[k] * (m.value - cur)
                d += pen.get(new, 0) - pen.get(old, 0)
            out[i] = d
        return out

    def bump(self, model: GraphicalModel) -> None:
        """Increment the current instantiation of every factor whose
        utility (deficit scaled down by prior penalties) is maximal."""
        best = -np.inf
        util = np.empty(len(model.factors))
        for fi, f in enumerate(model.factors):
            idx = int(self.cur_idx[fi])
            entry = float(f.log_table[idx])
            if entry == self.max_entries[fi]:
                u = 0.0
            else:
                deficit = self.max_entries[fi] - entry  # +inf for zero-prob entries
                u = deficit / (1.0 + self.counts[fi].get(idx, 0))
            util[fi] = u
            if u > best:
                best = u
        for fi in range(len(model.factors)):
            if util[fi] == best:
                idx = int(self.cur_idx[fi])
                self.counts[fi][idx] = self.counts[fi].get(idx, 0) + 1


def gls_plus_search(
    model: GraphicalModel,
    q: QuerySpec,
    scorer: NeighborScorer,
    cfg: SearchConfig,
    gls: GlsConfig | None = None,
    x0: Assignment | None = None,
) -> Trajectory:
    """Greedy search over a penalty-augmented score.

    Each move is scored as ``scorer(move) - weight * penalty_delta``.  When
    no move has a positive augmented score the search increments the
    penalty of the current instantiation of every maximal-utility factor
    (instead of restarting) and rescores; penalty refresh consumes no
    steps.  ``best_so_far`` always tracks the true objective.
    """
    gls = gls or GlsConfig()
    gls.validate()
    if cfg.restart_policy == ON_LOCAL_OPTIMUM:
        raise ConfigError(
            "gls+ escapes local optima via penalties; use fixed_interval or no restarts"
        )
    x, rng, traj = _prepare(model, q, cfg, x0)
    F = traj.states[0].F
    pen = _PenaltyState(model, x)
    since_restart = 0
    for step in range(1, cfg.max_steps + 1):
        if cfg.deadline is not None and time.monotonic() >= cfg.deadline:
            break
        t0 = time.perf_counter()
        if cfg.restart_policy == FIXED_INTERVAL and since_restart + 1 >= cfg.restart_interval:
            randomize_query_vars(x, model, q, rng)
            F = log_potential_sum(model, x)
            pen.resync(model, x)
            traj.restarts.append(step)
            since_restart = 0
        else:
            moves, raw = _neighborhood_with_gains(model, x, q)
            scores = scorer.score_all(model, x, q, moves, ll_gains=raw)
            aug = scores - gls.weight * pen.delta(model, x, moves)
            if aug.max() <= 0.0:
                rounds = 0
                while aug.max() <= 0.0 and rounds < _MAX_PENALTY_ROUNDS:
                    pen.bump(model)
                    rounds += 1
                    if gls.weight == 0.0:
                        break  # penalties cannot move the scores
                    aug = scores - gls.weight * pen.delta(model, x, moves)
            i = int(np.argmax(aug))
            m = moves[i]
            old = int(x[m.var])
            x[m.var] = m.value
            pen.after_move(model, old, m)
            F = F + float(raw[i])
            since_restart += 1
            if step % _RESYNC_EVERY == 0:
                F = log_potential_sum(model, x)
        traj.record(step, x, F, keep_state=cfg.record_states)
        traj.step_seconds.append(time.perf_counter() - t0)
    traj.meta["penalty_total"] = sum(sum(c.values()) for c in pen.counts)
    return traj


def collect_states(
    model: GraphicalModel,
    q: QuerySpec,
    reference: Assignment,
    stl: int,
    seed: int,
    x0: Assignment | None = None,
) -> Trajectory:
    """Data-collection walk mixing objective descent with guided moves.

    Each non-restart step flips a fair seeded coin: heads applies the
    greedy argmax of the raw objective gain, tails applies a uniformly
    random move among those that cut the Hamming distance to
    ``reference`` (falling back to a uniformly random move when none
    exists).  Every ``stl // 5`` steps the walk restarts.  Repeated states
    are kept.  The trajectory holds exactly ``stl + 1`` states.
    """
    if stl < 1:
        raise ConfigError(f"stl must be >= 1, got {stl}")
    cfg = SearchConfig(max_steps=stl, restart_policy=None, seed=seed)
    x, rng, traj = _prepare(model, q, cfg, x0)
    q.require_consistent(np.asarray(reference))
    F = traj.states[0].F
    interval = stl // 5
    since_restart = 0
    coin_greedy = 0
    coin_guided = 0
    fallback_random = 0
    for step in range(1, stl + 1):
        t0 = time.perf_counter()
        if interval >= 1 and since_restart + 1 >= interval:
            randomize_query_vars(x, model, q, rng)
            F = log_potential_sum(model, x)
            traj.restarts.append(step)
            since_restart = 0
        else:
            moves, raw = _neighborhood_with_gains(model, x, q)
            if rng.random() < 0.5:
                coin_greedy += 1
                i = int(np.argmax(raw))
            else:
                coin_guided += 1
                reducing = [
                    j
                    for j, mv in enumerate(moves)
                    if int(x[mv.var]) != int(reference[mv.var])
                    and mv.value == int(reference[mv.var])
                ]
                if reducing:
                    i = reducing[int(rng.integers(len(reducing)))]
                else:
                    fallback_random += 1
                    i = int(rng.integers(len(moves)))
            m = moves[i]
            F = F + float(raw[i])
            x[m.var] = m.value
            since_restart += 1
            if step % _RESYNC_EVERY == 0:
                F = log_potential_sum(model, x)
        traj.record(step, x, F, keep_state=cfg.record_states)
        traj.step_seconds.append(time.perf_counter() - t0)
    traj.meta.update(
        coin_greedy=coin_greedy, coin_guided=coin_guided, fallback_random=fallback_random
    )
    return traj


def write_trajectory(path, traj: Trajectory, include_assignments: bool = True) -> None:
    """Line-delimited export: one record per state."""
    restarts = set(traj.restarts)
    with open(path, "w") as fh:
        for s in traj.states:
            rec: dict = {"step": s.step, "F": s.F}
            if include_assignments and s.values is not None:
                rec["assignment"] = [int(v) for v in s.values]
            if s.step in restarts:
                rec["restart"] = True
            fh.write(json.dumps(rec) + "\n")


def read_trajectory(path) -> Trajectory:
    traj = Trajectory()
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        vals = rec.get("assignment")
        step = int(rec["step"])
        F = float(rec["F"])
        if vals is None:
            traj.states.append(TrajectoryState(step, None, F))
            traj.best_F = max(traj.best_F, F)
        else:
            traj.record(step, np.asarray(vals, dtype=np.int64), F)
        if rec.get("restart"):
            traj.restarts.append(step)
    if not traj.states:
        raise ContractError(f"{path}: empty trajectory file")
    return traj
