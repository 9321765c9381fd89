"""Training-data generation for the learned move scorer.

For each of ``num_queries`` synthetic queries: sample a full assignment
from the model, carve out a random query set, solve the induced task with
the anytime penalty search to get a reference, walk the search space with
the 50/50 collection policy, and label every visited state's neighborhood
by whether each move cuts the Hamming distance to the reference.

Records stream to a line-delimited sink: one JSON header line carrying
``{"format": 1, "model_hash", "num_vars", "cardinalities"}`` followed by
one record per line with fields ``evidence`` (variable -> value map),
``state`` (full assignment), and ``neighbors`` (list of
``[var, value, label]`` triples).
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ConfigError, ContractError, MpeSearchError, ParseError
from .gibbs import GibbsConfig, gibbs_sample
from .model import Assignment, GraphicalModel, Move, QuerySpec, hamming_distance
from .scorers import LLGainScorer
from .search import FIXED_INTERVAL, GlsConfig, SearchConfig, collect_states, gls_plus_search

log = logging.getLogger("mpesearch.datagen")

DATASET_FORMAT = 1
# Fraction of emitted records whose labels are re-derived from scratch as
# a generation-time self-check.
_DEBUG_RECHECK_RATE = 0.01


@dataclass(frozen=True)
class DatagenConfig:
    # stl has no default on purpose: published protocols disagree on its
    # value (500 vs 2500), so callers must choose explicitly.
    stl: int | None = None
    num_queries: int = 1000
    query_ratio_lo: float = 0.8
    query_ratio_hi: float = 0.95
    budget_seconds: float = 300.0
    seed: int = 0
    solver_steps: int | None = None  # test mode: step budget instead of wall clock
    solver_restart_interval: int = 100
    gibbs_burn_in: int = 100
    gibbs_thin: int = 10

    def validate(self) -> None:
        if self.num_queries < 1:
            raise ConfigError(f"num_queries must be >= 1, got {self.num_queries}")
        if not 0.0 < self.query_ratio_lo <= self.query_ratio_hi <= 1.0:
            raise ConfigError(
                f"query ratio range [{self.query_ratio_lo}, {self.query_ratio_hi}] invalid"
            )
        if self.stl is None:
            raise ConfigError("stl must be set explicitly (commonly 500 or 2500)")
        if self.stl < 1:
            raise ConfigError(f"stl must be >= 1, got {self.stl}")
        if self.budget_seconds <= 0 and self.solver_steps is None:
            raise ConfigError("budget_seconds must be positive in wall-clock mode")
        if self.solver_steps is not None and self.solver_steps < 1:
            raise ConfigError(f"solver_steps must be >= 1, got {self.solver_steps}")


@dataclass(eq=False)
class TrainingRecord:
    evidence: dict[int, int]
    state: list[int]
    neighbors: list[tuple[int, int, int]]  # (var, value, label)


def generate_query(
    model: GraphicalModel,
    query_ratio: float,
    seed: int,
    gibbs_burn_in: int = 100,
    gibbs_thin: int = 10,
) -> tuple[QuerySpec, Assignment]:
    """Draw one synthetic query: a model sample plus a random query set.

    The sample's projection onto the non-query variables becomes the
    evidence.  Deterministic for a fixed seed.
    """
    if not 0.0 < query_ratio <= 1.0:
        raise ConfigError(f"query_ratio must be in (0, 1], got {query_ratio}")
    ss = np.random.SeedSequence(seed)
    gibbs_seed, pick_seed = ss.spawn(2)
    cfg = GibbsConfig(
        burn_in=gibbs_burn_in, thin=gibbs_thin, seed=int(gibbs_seed.generate_state(1)[0])
    )
    x = gibbs_sample(model, cfg, 1)[0]
    k = int(query_ratio * model.num_vars)
    if k < 1:
        raise ConfigError(
            f"query_ratio {query_ratio} selects no variables on a {model.num_vars}-variable model"
        )
    rng = np.random.Generator(np.random.PCG64(pick_seed.generate_state(1)[0]))
    qvars = np.sort(rng.choice(model.num_vars, size=k, replace=False))
    evidence = {int(v): int(x[v]) for v in range(model.num_vars) if v not in set(qvars.tolist())}
    q = QuerySpec.build(model, evidence)
    return q, x


def solve_mpe_anytime(
    model: GraphicalModel,
    q: QuerySpec,
    budget_seconds: float,
    seed: int,
    step_budget: int | None = None,
    restart_interval: int = 100,
    gls_weight: float = 1.0,
) -> tuple[Assignment, float]:
    """Best assignment found by penalty search with periodic restarts.

    Wall-clock mode runs until ``budget_seconds`` elapses; passing
    ``step_budget`` switches to a deterministic step count instead.
    """
    if step_budget is not None:
        cfg = SearchConfig(
            max_steps=step_budget,
            restart_policy=FIXED_INTERVAL,
            restart_interval=restart_interval,
            seed=seed,
            record_states=False,
        )
    else:
        if budget_seconds <= 0:
            raise ConfigError(f"budget_seconds must be positive, got {budget_seconds}")
        cfg = SearchConfig(
            max_steps=2**62,
            restart_policy=FIXED_INTERVAL,
            restart_interval=restart_interval,
            seed=seed,
            deadline=time.monotonic() + budget_seconds,
            record_states=False,
        )
    traj = gls_plus_search(model, q, LLGainScorer(), cfg, GlsConfig(weight=gls_weight))
    best, best_f = traj.best_so_far
    return best.copy(), float(best_f)


def label_neighbors(
    x: Assignment, reference: Assignment, q: QuerySpec, model: GraphicalModel
) -> list[tuple[Move, int]]:
    """Label every neighborhood move: 1 if it cuts the Hamming distance
    to ``reference``, else 0."""
    labels: list[tuple[Move, int]] = []
    cards = model.cardinalities
    for v in q.query_vars:
        v = int(v)
        cur = int(x[v])
        ref = int(reference[v])
        for val in range(int(cards[v])):
            if val != cur:
                labels.append((Move(v, val), 1 if (cur != ref and val == ref) else 0))
    return labels


def _labels_bruteforce(
    x: Assignment, reference: Assignment, q: QuerySpec, model: GraphicalModel
) -> list[tuple[Move, int]]:
    """Independent recheck: apply each move and compare distances."""
    from .model import moved
    from .search import enumerate_neighbors

    d0 = hamming_distance(x, reference, q)
    out = []
    for m in enumerate_neighbors(model, x, q):
        d1 = hamming_distance(moved(x, m), reference, q)
        out.append((m, 1 if d1 < d0 else 0))
    return out


def _collect_query(
    model: GraphicalModel, cfg: DatagenConfig, qi: int
) -> tuple[int, list[TrainingRecord] | None, str | None]:
    """One query end to end; returns records or an error message."""
    seeds = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(qi,)).generate_state(5)
    try:
        qr = cfg.query_ratio_lo + (cfg.query_ratio_hi - cfg.query_ratio_lo) * (
            np.random.Generator(np.random.PCG64(seeds[0])).random()
        )
        q, _ = generate_query(model, qr, int(seeds[1]), cfg.gibbs_burn_in, cfg.gibbs_thin)
        reference, _ = solve_mpe_anytime(
            model,
            q,
            cfg.budget_seconds,
            int(seeds[2]),
            step_budget=cfg.solver_steps,
            restart_interval=cfg.solver_restart_interval,
        )
        traj = collect_states(model, q, reference, cfg.stl, int(seeds[3]))
    except MpeSearchError as e:
        return qi, None, str(e)
    check_rng = np.random.Generator(np.random.PCG64(seeds[4]))
    records: list[TrainingRecord] = []
    for st in traj.states:
        labels = label_neighbors(st.values, reference, q, model)
        if check_rng.random() < _DEBUG_RECHECK_RATE:
            expect = _labels_bruteforce(st.values, reference, q, model)
            if labels != expect:
                raise ContractError(f"label self-check failed on query {qi} step {st.step}")
        records.append(
            TrainingRecord(
                evidence=dict(q.evidence),
                state=[int(v) for v in st.values],
                neighbors=[(m.var, m.value, lb) for m, lb in labels],
            )
        )
    return qi, records, None


def _collect_query_task(args) -> tuple[int, list[TrainingRecord] | None, str | None]:
    return _collect_query(*args)


def collect_dataset(
    model: GraphicalModel, cfg: DatagenConfig, workers: int = 1
) -> Iterator[TrainingRecord]:
    """Stream labeled records for ``cfg.num_queries`` synthetic queries.

    Queries are seeded independently, so the stream is identical whether
    they run sequentially or across a worker pool.  A failing query is
    logged and skipped; only all queries failing is an error.
    """
    cfg.validate()
    produced_any = False
    failures: list[str] = []

    def emit(result):
        nonlocal produced_any
        qi, records, err = result
        if err is not None:
            log.warning("query %d failed: %s", qi, err)
            failures.append(f"query {qi}: {err}")
            return []
        produced_any = True
        return records

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        tasks = [(model, cfg, qi) for qi in range(cfg.num_queries)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for result in ex.map(_collect_query_task, tasks):
                yield from emit(result)
    else:
        for qi in range(cfg.num_queries):
            yield from emit(_collect_query(model, cfg, qi))
    if not produced_any:
        raise MpeSearchError(
            "all queries failed during dataset collection: " + "; ".join(failures[:5])
        )


def dataset_header(model: GraphicalModel) -> dict:
    return {
        "format": DATASET_FORMAT,
        "model_hash": model.model_hash(),
        "num_vars": model.num_vars,
        "cardinalities": [int(c) for c in model.cardinalities],
    }


def write_dataset(path, model: GraphicalModel, records: Iterator[TrainingRecord]) -> int:
    """Stream records to a line-delimited file; returns the record count."""
    n = 0
    with open(path, "w") as fh:
        fh.write(json.dumps(dataset_header(model)) + "\n")
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "evidence": {str(k): v for k, v in sorted(rec.evidence.items())},
                        "state": rec.state,
                        "neighbors": [list(t) for t in rec.neighbors],
                    }
                )
                + "\n"
            )
            n += 1
    return n


def read_dataset(path) -> tuple[dict, list[TrainingRecord]]:
    """Load a dataset file; validates the header shape."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ParseError(f"{path}: empty dataset file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: malformed header: {e}") from e
    for key in ("format", "model_hash", "num_vars", "cardinalities"):
        if key not in header:
            raise ParseError(f"{path}: dataset header missing {key!r}")
    if header["format"] != DATASET_FORMAT:
        raise ParseError(f"{path}: unsupported dataset format {header['format']}")
    records = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            records.append(
                TrainingRecord(
                    evidence={int(k): int(v) for k, v in obj["evidence"].items()},
                    state=[int(v) for v in obj["state"]],
                    neighbors=[(int(a), int(b), int(c)) for a, b, c in obj["neighbors"]],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ParseError(f"{path}: bad record: {e}", line=ln) from e
    return header, records
