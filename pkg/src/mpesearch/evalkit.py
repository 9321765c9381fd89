"""Benchmark harness: matched method runs, paired metrics, blend sweeps.

Every method sees the same starting assignment and seed for a given
query, so paired comparisons are like for like.  Objective values are
captured at fixed step checkpoints as the best value seen so far.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, EvalError, MpeSearchError
from .model import GraphicalModel, QuerySpec, random_assignment
from .scorers import CombinedScorer, NeighborScorer, NeuralScorer
from .search import GlsConfig, SearchConfig, gls_plus_search, greedy_search
from .weights import ScorerWeights

log = logging.getLogger("mpesearch.evalkit")


@dataclass(frozen=True)
class MethodSpec:
    """A named search variant: scorer plus search settings.

    ``gls`` switches the step rule to the penalty-augmented search.
    """

    name: str
    scorer: NeighborScorer
    cfg: SearchConfig
    gls: GlsConfig | None = None


@dataclass(frozen=True)
class RunResult:
    query_id: int
    method: str
    checkpoint_f: dict[int, float]
    sec_per_step_mean: float
    sec_per_step_sd: float


def _query_seeds(base_seed: int, query_id: int) -> tuple[int, int]:
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(query_id,))
    x0_child, search_child = ss.spawn(2)
    return int(x0_child.generate_state(1)[0]), int(search_child.generate_state(1)[0])


def _run_one(
    model: GraphicalModel,
    q: QuerySpec,
    query_id: int,
    method: MethodSpec,
    checkpoints: tuple[int, ...],
    base_seed: int,
    zero_timing: bool,
) -> RunResult:
    x0_seed, search_seed = _query_seeds(base_seed, query_id)
    x0 = random_assignment(
        model, np.random.Generator(np.random.PCG64(x0_seed)), q.evidence
    )
    cfg = replace(method.cfg, seed=search_seed)
    if method.gls is not None:
        traj = gls_plus_search(model, q, method.scorer, cfg, method.gls, x0=x0)
    else:
        traj = greedy_search(model, q, method.scorer, cfg, x0=x0)
    running = np.maximum.accumulate(traj.f_curve())
    cp: dict[int, float] = {}
    for step in checkpoints:
        if step > traj.num_steps:
            raise EvalError(
                f"checkpoint {step} beyond trajectory of {traj.num_steps} steps"
            )
        cp[step] = float(running[step])
    secs = np.asarray(traj.step_seconds)
    mean = 0.0 if zero_timing or secs.size == 0 else float(secs.mean())
    sd = 0.0 if zero_timing or secs.size < 2 else float(secs.std(ddof=1))
    return RunResult(
        query_id=query_id,
        method=method.name,
        checkpoint_f=cp,
        sec_per_step_mean=mean,
        sec_per_step_sd=sd,
    )


def _run_query_task(args) -> tuple[list[RunResult], list[str]]:
    model, q, query_id, methods, checkpoints, base_seed, zero_timing = args
    results: list[RunResult] = []
    errors: list[str] = []
    for method in methods:
        try:
            results.append(
                _run_one(model, q, query_id, method, checkpoints, base_seed, zero_timing)
            )
        except MpeSearchError as e:
            errors.append(f"query {query_id} method {method.name}: {e}")
    return results, errors


def run_matrix(
    model: GraphicalModel,
    queries: list[QuerySpec],
    methods: list[MethodSpec],
    checkpoints: list[int],
    seed: int = 0,
    zero_timing: bool = False,
    workers: int = 1,
) -> list[RunResult]:
    """Run every method on every query with shared per-query seeds.

    Failures are logged and their runs omitted; the rest of the matrix
    completes.  Results are ordered by (query, method).
    """
    if not queries or not methods:
        raise ConfigError("run_matrix needs at least one query and one method")
    if not checkpoints:
        raise ConfigError("run_matrix needs at least one checkpoint")
    checkpoints = sorted(set(int(c) for c in checkpoints))
    if checkpoints[0] < 0:
        raise ConfigError("checkpoints must be nonnegative")
    names = [m.name for m in methods]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate method names: {names}")
    for m in methods:
        if checkpoints[-1] > m.cfg.max_steps:
            raise ConfigError(
                f"checkpoint {checkpoints[-1]} exceeds max_steps {m.cfg.max_steps} "
                f"of method {m.name}"
            )
    tasks = [
        (model, q, qi, methods, tuple(checkpoints), seed, zero_timing)
        for qi, q in enumerate(queries)
    ]
    out: list[RunResult] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_run_query_task, tasks))
    else:
        chunks = [_run_query_task(t) for t in tasks]
    for results, errors in chunks:
        out.extend(results)
        for msg in errors:
            log.warning("run failed: %s", msg)
    return out


def _paired(
    results_a: list[RunResult], results_b: list[RunResult], step: int
) -> list[tuple[float, float]]:
    fa = {r.query_id: r for r in results_a}
    fb = {r.query_id: r for r in results_b}
    if set(fa) != set(fb):
        raise EvalError(
            f"result sets cover different queries: {sorted(set(fa) ^ set(fb))}"
        )
    if not fa:
        raise EvalError("no paired results")
    pairs = []
    for qid in sorted(fa):
        ra, rb = fa[qid], fb[qid]
        if step not in ra.checkpoint_f or step not in rb.checkpoint_f:
            raise EvalError(f"checkpoint {step} missing for query {qid}")
        pairs.append((ra.checkpoint_f[step], rb.checkpoint_f[step]))
    return pairs


def win_percentage(results_a: list[RunResult], results_b: list[RunResult], step: int) -> float:
    """Share of queries won by A at a checkpoint, ties half, times 100."""
    pairs = _paired(results_a, results_b, step)
    score = 0.0
    for fa, fb in pairs:
        if fa > fb:
            score += 1.0
        elif fa == fb:
            score += 0.5
    return 100.0 * score / len(pairs)


def pct_improvement(
    results_base: list[RunResult], results_treat: list[RunResult], step: int
) -> float:
    """Mean relative objective improvement of treatment over baseline
    at a checkpoint, times 100.  Queries whose baseline objective is
    exactly zero are excluded with a warning."""
    pairs = _paired(results_base, results_treat, step)
    vals = []
    skipped = 0
    for fb, ft in pairs:
        if fb == 0.0:
            skipped += 1
            continue
        vals.append((ft - fb) / abs(fb))
    if skipped:
        log.warning(
            "pct_improvement: excluded %d of %d queries with zero baseline objective",
            skipped,
            len(pairs),
        )
    if not vals:
        raise EvalError("pct_improvement: no queries with nonzero baseline")
    return 100.0 * float(np.mean(vals))


def by_method(results: list[RunResult]) -> dict[str, list[RunResult]]:
    out: dict[str, list[RunResult]] = {}
    for r in results:
        out.setdefault(r.method, []).append(r)
    return out


@dataclass(frozen=True)
class SweepRow:
    mix: float
    step: int
    mean_f: float
    sd_f: float


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    best_mix: float
    results: dict[float, list[RunResult]]


def lambda_sweep(
    model: GraphicalModel,
    queries: list[QuerySpec],
    weights: ScorerWeights,
    mixes: list[float],
    cfg: SearchConfig,
    checkpoints: list[int],
    seed: int = 0,
    gls: GlsConfig | None = None,
    workers: int = 1,
) -> SweepResult:
    """Run the blended scorer at each mix weight and pick the best.

    Selection: highest mean objective at the final checkpoint; the
    earliest-listed mix wins ties.
    """
    if not mixes:
        raise ConfigError("lambda_sweep needs at least one mix weight")
    neural = NeuralScorer(weights)
    methods = [
        MethodSpec(name=f"mix={m:g}", scorer=CombinedScorer(neural, m), cfg=cfg, gls=gls)
        for m in mixes
    ]
    results = run_matrix(
        model, queries, methods, checkpoints, seed=seed, zero_timing=True, workers=workers
    )
    grouped = by_method(results)
    rows: list[SweepRow] = []
    final = max(int(c) for c in checkpoints)
    means_at_final: list[float] = []
    for m in mixes:
        rs = grouped.get(f"mix={m:g}", [])
        if not rs:
            raise EvalError(f"all runs failed for mix {m}")
        for step in sorted(set(int(c) for c in checkpoints)):
            fs = np.array([r.checkpoint_f[step] for r in rs])
            rows.append(
                SweepRow(
                    mix=m,
                    step=step,
                    mean_f=float(fs.mean()),
                    sd_f=float(fs.std(ddof=1)) if fs.size > 1 else 0.0,
                )
            )
            if step == final:
                means_at_final.append(float(fs.mean()))
    best_mix = mixes[int(np.argmax(means_at_final))]
    return SweepResult(
        rows=rows,
        best_mix=best_mix,
        results={m: grouped[f"mix={m:g}"] for m in mixes},
    )


def write_results_csv(path, results: list[RunResult]) -> None:
    """Canonical long-form results table."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["query", "method", "step", "F", "sec_per_step"])
        for r in results:
            for step in sorted(r.checkpoint_f):
                w.writerow(
                    [
                        r.query_id,
                        r.method,
                        step,
                        format(r.checkpoint_f[step], ".10g"),
                        format(r.sec_per_step_mean, ".6g"),
                    ]
                )


def write_summary_csv(path, rows: list[dict]) -> None:
    """Paired-comparison table: one row per method pair and checkpoint."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method_a", "method_b", "step", "win_pct", "pct_improvement"])
        for row in rows:
            w.writerow(
                [
                    row["method_a"],
                    row["method_b"],
                    row["step"],
                    format(row["win_pct"], ".10g"),
                    format(row["pct_improvement"], ".10g"),
                ]
            )


def summarize_pairs(
    results: list[RunResult], pairs: list[tuple[str, str]], checkpoints: list[int]
) -> list[dict]:
    """Win rate and relative improvement of A over B for each pair."""
    grouped = by_method(results)
    rows = []
    for a, b in pairs:
        if a not in grouped or b not in grouped:
            raise EvalError(f"missing method results for pair ({a}, {b})")
        for step in sorted(set(int(c) for c in checkpoints)):
            rows.append(
                {
                    "method_a": a,
                    "method_b": b,
                    "step": step,
                    "win_pct": win_percentage(grouped[a], grouped[b], step),
                    "pct_improvement": pct_improvement(grouped[b], grouped[a], step),
                }
            )
    return rows


def write_sweep_csv(path, sweep: SweepResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mix", "step", "mean_F", "sd_F"])
        for row in sweep.rows:
            w.writerow(
                [
                    format(row.mix, "g"),
                    row.step,
                    format(row.mean_f, ".10g"),
                    format(row.sd_f, ".10g"),
                ]
            )


def plot_curves(path, results: list[RunResult]) -> None:
    """Mean best-objective-so-far per method across checkpoints."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        raise ConfigError(
            "plot output needs matplotlib; install the 'plots' extra"
        ) from e
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, rs in sorted(by_method(results).items()):
        steps = sorted({s for r in rs for s in r.checkpoint_f})
        means = [float(np.mean([r.checkpoint_f[s] for r in rs])) for s in steps]
        ax.plot(steps, means, marker="o", label=name)
    ax.set_xlabel("step")
    ax.set_ylabel("mean best objective")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
