"""Command-line front end.

One executable with subcommands::

    validate   check a model file, print its dimensions
    sample     draw assignments by Gibbs sampling
    solve      run local search on a query and print the best assignment
    datagen    build a labeled training dataset
    drift      simulate idealized biased walks or measure a trajectory's bias
    eval       benchmark methods on generated queries, emit CSV tables
    sweep      tune the scorer blend weight

Flags can come from a flat JSON config file (``--config``); explicit
flags win.  A manifest of resolved parameters is written to the output
directory before any work starts, and a manifest file itself is accepted
as a config.  Exit codes: 0 success, 1 usage error, 2 data or model
error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import DatagenConfig, collect_dataset, generate_query, solve_mpe_anytime, write_dataset
from .drift import DriftConfig, measure_alpha, simulate_drift
from .errors import ConfigError, MpeSearchError
from .evalkit import (
    MethodSpec,
    lambda_sweep,
    plot_curves,
    run_matrix,
    summarize_pairs,
    write_results_csv,
    write_summary_csv,
    write_sweep_csv,
)
from .gibbs import GibbsConfig, gibbs_sample
from .model import GraphicalModel, QuerySpec
from .scorers import CombinedScorer, LLGainScorer, NeuralScorer
from .search import (
    FIXED_INTERVAL,
    ON_LOCAL_OPTIMUM,
    GlsConfig,
    SearchConfig,
    gls_plus_search,
    greedy_search,
    read_trajectory,
    write_trajectory,
)
from .uai import parse_evidence_file, parse_uai_file
from .weights import load_weights

log = logging.getLogger("mpesearch.cli")

_USAGE_EXIT = 1
_DATA_EXIT = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(_USAGE_EXIT)


def _parse_ratio(text: str) -> tuple[float, float]:
    parts = text.split(":")
    try:
        if len(parts) == 1:
            lo = hi = float(parts[0])
        elif len(parts) == 2:
            lo, hi = float(parts[0]), float(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise ConfigError(f"bad query ratio {text!r}; use R or LO:HI") from None
    return lo, hi


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad {what} list {text!r}") from None


def _parse_float_list(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"bad {what} list {text!r}") from None


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path}: invalid JSON: {e}") from e
    if isinstance(obj, dict) and "params" in obj and "command" in obj:
        obj = obj["params"]  # manifests are valid configs
    if not isinstance(obj, dict):
        raise ConfigError(f"config file {path}: expected a flat JSON object")
    if "lambda" in obj and "mix" not in obj:
        obj["mix"] = obj.pop("lambda")
    return obj


def _resolve(args: argparse.Namespace, config: dict, defaults: dict) -> dict:
    """CLI flag > config file > built-in default, key by key."""
    unknown = set(config) - set(defaults)
    if unknown:
        raise ConfigError(f"config keys not understood by this command: {sorted(unknown)}")
    params = {}
    for key, default in defaults.items():
        val = getattr(args, key, None)
        if val is None:
            val = config.get(key, default)
        params[key] = val
    return params


def _write_manifest(out: str, command: str, params: dict, config_file: str | None) -> None:
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config_file": config_file,
        "params": {k: v for k, v in sorted(params.items())},
        "version": __version__,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _setup_logging(quiet: bool, debug: bool) -> None:
    level = logging.DEBUG if debug else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )


def _search_cfg(params: dict, method: str) -> SearchConfig:
    restart = params.get("restart")
    if restart is None:
        restart = "local" if method == "greedy" else "interval"
    policy: str | None
    if restart == "none":
        policy = None
    elif restart == "local":
        policy = ON_LOCAL_OPTIMUM
    elif restart == "interval":
        policy = FIXED_INTERVAL
    else:
        raise ConfigError(f"unknown restart mode {restart!r}")
    return SearchConfig(
        max_steps=int(params["steps"]),
        restart_policy=policy,
        restart_interval=int(params["restart_interval"]),
        seed=int(params["seed"]),
    )


def _gen_queries(
    model: GraphicalModel, n: int, ratio: tuple[float, float], seed: int
) -> list[QuerySpec]:
    queries = []
    for i in range(n):
        seeds = np.random.SeedSequence(entropy=seed, spawn_key=(7, i)).generate_state(2)
        rng = np.random.Generator(np.random.PCG64(seeds[0]))
        qr = ratio[0] + (ratio[1] - ratio[0]) * rng.random()
        q, _ = generate_query(model, qr, int(seeds[1]))
        queries.append(q)
    return queries


def _build_methods(names: list[str], params: dict, model: GraphicalModel) -> list[MethodSpec]:
    known = {"greedy", "gls+", "neural-greedy", "neural-gls+"}
    bad = [n for n in names if n not in known]
    if bad:
        raise ConfigError(f"unknown methods {bad}; choose from {sorted(known)}")
    neural = None
    if any(n.startswith("neural") for n in names):
        if not params.get("weights"):
            raise ConfigError("neural methods need --weights")
        neural = NeuralScorer(load_weights(params["weights"]))
    steps = int(params["steps"])
    interval = int(params["restart_interval"])
    seed = int(params["seed"])
    mix = float(params["mix"])
    greedy_cfg = SearchConfig(max_steps=steps, restart_policy=ON_LOCAL_OPTIMUM, seed=seed)
    gls_cfg = SearchConfig(
        max_steps=steps, restart_policy=FIXED_INTERVAL, restart_interval=interval, seed=seed
    )
    gls = GlsConfig(weight=float(params["gls_weight"]))
    out = []
    for name in names:
        if name == "greedy":
            out.append(MethodSpec(name, LLGainScorer(), greedy_cfg))
        elif name == "gls+":
            out.append(MethodSpec(name, LLGainScorer(), gls_cfg, gls))
        elif name == "neural-greedy":
            out.append(MethodSpec(name, CombinedScorer(neural, mix), greedy_cfg))
        else:
            out.append(MethodSpec(name, CombinedScorer(neural, mix), gls_cfg, gls))
    return out


# ---------------------------------------------------------------- commands


def _cmd_validate(args) -> int:
    model = parse_uai_file(args.model)
    msg = f"model ok: {model.num_vars} variables, {len(model.factors)} factors"
    if args.evid:
        ev = parse_evidence_file(args.evid)
        QuerySpec.build(model, ev)
        msg += f", {len(ev)} evidence assignments"
    print(msg)
    return 0


def _cmd_sample(args) -> int:
    config = _load_config(args.config)
    defaults = {"model": None, "n": 1, "burn_in": 100, "thin": 10, "seed": 0, "out": None}
    p = _resolve(args, config, defaults)
    if not p["model"]:
        raise ConfigError("sample needs --model")
    if p["out"]:
        _write_manifest(p["out"], "sample", p, args.config)
    model = parse_uai_file(p["model"])
    cfg = GibbsConfig(burn_in=int(p["burn_in"]), thin=int(p["thin"]), seed=int(p["seed"]))
    samples = gibbs_sample(model, cfg, int(p["n"]))
    lines = [json.dumps({"sample": [int(v) for v in s]}) for s in samples]
    if p["out"]:
        (Path(p["out"]) / "samples.jsonl").write_text("\n".join(lines) + "\n")
        log.info("wrote %d samples to %s", len(samples), p["out"])
    else:
        for line in lines:
            print(line)
    return 0


_SOLVE_DEFAULTS = {
    "model": None,
    "evid": None,
    "method": "greedy",
    "weights": None,
    "mix": 0.5,
    "steps": 500,
    "budget_seconds": None,
    "restart": None,
    "restart_interval": 100,
    "gls_weight": 1.0,
    "seed": 0,
    "trace": None,
    "out": None,
}


def _cmd_solve(args) -> int:
    config = _load_config(args.config)
    p = _resolve(args, config, _SOLVE_DEFAULTS)
    if not p["model"]:
        raise ConfigError("solve needs --model")
    if p["method"] not in ("greedy", "gls+"):
        raise ConfigError(f"unknown method {p['method']!r}")
    if p["out"]:
        _write_manifest(p["out"], "solve", p, args.config)
    model = parse_uai_file(p["model"])
    evidence = parse_evidence_file(p["evid"]) if p["evid"] else {}
    q = QuerySpec.build(model, evidence)
    cfg = _search_cfg(p, p["method"])
    if p["budget_seconds"] is not None:
        cfg = SearchConfig(
            max_steps=2**62,
            restart_policy=cfg.restart_policy,
            restart_interval=cfg.restart_interval,
            seed=cfg.seed,
            deadline=time.monotonic() + float(p["budget_seconds"]),
            record_states=False,
        )
    scorer: object = LLGainScorer()
    if p["weights"]:
        scorer = CombinedScorer(NeuralScorer(load_weights(p["weights"])), float(p["mix"]))
    if p["method"] == "gls+":
        traj = gls_plus_search(model, q, scorer, cfg, GlsConfig(weight=float(p["gls_weight"])))
    else:
        traj = greedy_search(model, q, scorer, cfg)
    best, best_f = traj.best_so_far
    result = {
        "F": best_f,
        "assignment": [int(v) for v in best],
        "steps": traj.num_steps,
        "restarts": len(traj.restarts),
    }
    print(json.dumps(result))
    if p["trace"]:
        write_trajectory(p["trace"], traj)
    if p["out"]:
        outdir = Path(p["out"])
        (outdir / "solution.json").write_text(json.dumps(result) + "\n")
        (outdir / "solution.txt").write_text(
            f"{model.num_vars} " + " ".join(str(int(v)) for v in best) + "\n"
        )
    return 0


_DATAGEN_DEFAULTS = {
    "model": None,
    "n": 1000,
    "query_ratio": "0.8:0.95",
    "budget_seconds": 300.0,
    "solver_steps": None,
    "solver_restart_interval": 100,
    "stl": None,
    "seed": 0,
    "workers": 1,
    "out": None,
}


def _cmd_datagen(args) -> int:
    config = _load_config(args.config)
    p = _resolve(args, config, _DATAGEN_DEFAULTS)
    if not p["model"]:
        raise ConfigError("datagen needs --model")
    if not p["out"]:
        raise ConfigError("datagen needs --out")
    if p["stl"] is None:
        raise ConfigError("datagen needs --stl (commonly 500 or 2500)")
    _write_manifest(p["out"], "datagen", p, args.config)
    model = parse_uai_file(p["model"])
    lo, hi = _parse_ratio(str(p["query_ratio"]))
    cfg = DatagenConfig(
        stl=int(p["stl"]),
        num_queries=int(p["n"]),
        query_ratio_lo=lo,
        query_ratio_hi=hi,
        budget_seconds=float(p["budget_seconds"]),
        seed=int(p["seed"]),
        solver_steps=int(p["solver_steps"]) if p["solver_steps"] is not None else None,
        solver_restart_interval=int(p["solver_restart_interval"]),
    )
    path = Path(p["out"]) / "dataset.jsonl"
    n = write_dataset(path, model, collect_dataset(model, cfg, workers=int(p["workers"])))
    log.info("wrote %d records to %s", n, path)
    print(json.dumps({"records": n, "path": str(path)}))
    return 0


_DRIFT_DEFAULTS = {
    "alpha": None,
    "h0": None,
    "trials": 100_000,
    "seed": 0,
    "csv": None,
    "measure_trace": None,
    "model": None,
    "evid": None,
    "reference": None,
    "out": None,
}


def _read_assignment(path: str) -> np.ndarray:
    toks = Path(path).read_text().split()
    if not toks:
        raise ConfigError(f"{path}: empty assignment file")
    n = int(toks[0])
    if len(toks) != n + 1:
        raise ConfigError(f"{path}: expected {n} values, got {len(toks) - 1}")
    return np.array([int(t) for t in toks[1:]], dtype=np.int64)


def _cmd_drift(args) -> int:
    config = _load_config(args.config)
    p = _resolve(args, config, _DRIFT_DEFAULTS)
    if p["out"]:
        _write_manifest(p["out"], "drift", p, args.config)
    if p["measure_trace"]:
        if not (p["model"] and p["reference"]):
            raise ConfigError("drift measurement needs --model and --reference")
        model = parse_uai_file(p["model"])
        evidence = parse_evidence_file(p["evid"]) if p["evid"] else {}
        q = QuerySpec.build(model, evidence)
        traj = read_trajectory(p["measure_trace"])
        ref = _read_assignment(p["reference"])
        est = measure_alpha(traj, ref, q, model)
        print(
            json.dumps(
                {
                    "alpha_hat": est.alpha_hat,
                    "reducing": est.reducing,
                    "nonreducing": est.nonreducing,
                }
            )
        )
        return 0
    if p["alpha"] is None or p["h0"] is None:
        raise ConfigError("drift simulation needs --alpha and --h0")
    report = simulate_drift(
        DriftConfig(
            alpha=float(p["alpha"]), h0=int(p["h0"]), trials=int(p["trials"]), seed=int(p["seed"])
        )
    )
    print(json.dumps(report.summary()))
    if p["csv"]:
        with open(p["csv"], "w") as fh:
            fh.write("trial,steps\n")
            for i, t in enumerate(report.taus):
                fh.write(f"{i},{int(t)}\n")
    return 0


_EVAL_DEFAULTS = {
    "model": None,
    "num_queries": 20,
    "query_ratio": "0.8:0.95",
    "methods": "greedy,gls+",
    "weights": None,
    "mix": 0.5,
    "steps": 500,
    "checkpoints": None,
    "restart_interval": 100,
    "gls_weight": 1.0,
    "seed": 0,
    "workers": 1,
    "zero_timing": False,
    "csv": True,
    "plots": False,
    "out": None,
}


def _cmd_eval(args) -> int:
    config = _load_config(args.config)
    p = _resolve(args, config, _EVAL_DEFAULTS)
    if not p["model"]:
        raise ConfigError("eval needs --model")
    if not p["out"]:
        raise ConfigError("eval needs --out")
    _write_manifest(p["out"], "eval", p, args.config)
    model = parse_uai_file(p["model"])
    steps = int(p["steps"])
    checkpoints = (
        _parse_int_list(p["checkpoints"], "checkpoints") if p["checkpoints"] else [steps]
    )
    names = [t.strip() for t in str(p["methods"]).split(",") if t.strip()]
    methods = _build_methods(names, p, model)
    queries = _gen_queries(
        model, int(p["num_queries"]), _parse_ratio(str(p["query_ratio"])), int(p["seed"])
    )
    results = run_matrix(
        model,
        queries,
        methods,
        checkpoints,
        seed=int(p["seed"]),
        zero_timing=bool(p["zero_timing"]),
        workers=int(p["workers"]),
    )
    outdir = Path(p["out"])
    if p["csv"]:
        write_results_csv(outdir / "results.csv", results)
        pairs = [(names[i], names[j]) for i in range(len(names)) for j in range(i + 1, len(names))]
        if pairs:
            write_summary_csv(
                outdir / "summary.csv", summarize_pairs(results, pairs, checkpoints)
            )
    if p["plots"]:
        plot_curves(outdir / "curves.png", results)
    print(json.dumps({"runs": len(results), "out": str(outdir)}))
    return 0


_SWEEP_DEFAULTS = {
    "model": None,
    "weights": None,
    "lambdas": "0.2,0.5,0.7,1.0",
    "num_queries": 20,
    "query_ratio": "0.8:0.95",
    "method": "greedy",
    "steps": 500,
    "checkpoints": None,
    "restart_interval": 100,
    "gls_weight": 1.0,
    "seed": 0,
    "workers": 1,
    "out": None,
}


def _cmd_sweep(args) -> int:
    config = _load_config(args.config)
    p = _resolve(args, config, _SWEEP_DEFAULTS)
    if not p["model"] or not p["weights"]:
        raise ConfigError("sweep needs --model and --weights")
    if not p["out"]:
        raise ConfigError("sweep needs --out")
    _write_manifest(p["out"], "sweep", p, args.config)
    model = parse_uai_file(p["model"])
    steps = int(p["steps"])
    checkpoints = (
        _parse_int_list(p["checkpoints"], "checkpoints") if p["checkpoints"] else [steps]
    )
    mixes = _parse_float_list(p["lambdas"], "lambdas")
    weights = load_weights(p["weights"])
    if p["method"] == "greedy":
        cfg = SearchConfig(max_steps=steps, restart_policy=ON_LOCAL_OPTIMUM, seed=int(p["seed"]))
        gls = None
    elif p["method"] == "gls+":
        cfg = SearchConfig(
            max_steps=steps,
            restart_policy=FIXED_INTERVAL,
            restart_interval=int(p["restart_interval"]),
            seed=int(p["seed"]),
        )
        gls = GlsConfig(weight=float(p["gls_weight"]))
    else:
        raise ConfigError(f"unknown method {p['method']!r}")
    queries = _gen_queries(
        model, int(p["num_queries"]), _parse_ratio(str(p["query_ratio"])), int(p["seed"])
    )
    sweep = lambda_sweep(
        model,
        queries,
        weights,
        mixes,
        cfg,
        checkpoints,
        seed=int(p["seed"]),
        gls=gls,
        workers=int(p["workers"]),
    )
    write_sweep_csv(Path(p["out"]) / "sweep.csv", sweep)
    print(json.dumps({"best_lambda": sweep.best_mix}))
    return 0


# ---------------------------------------------------------------- wiring


def _add_common(p: _Parser) -> None:
    p.add_argument("--config", help="flat JSON config file (or a manifest)")
    p.add_argument("--out", help="output directory; receives a run manifest")
    p.add_argument("--seed", type=int)
    p.add_argument("--quiet", action="store_true", help="warnings only")
    p.add_argument("--debug", action="store_true", help="debug logging")


def build_parser() -> _Parser:
    parser = _Parser(prog="mpesearch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="check a model file")
    p.add_argument("model", help="UAI model file")
    p.add_argument("--evid", help="evidence file to check against the model")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--debug", action="store_true")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sample", help="draw Gibbs samples")
    p.add_argument("--model")
    p.add_argument("--n", type=int, help="number of samples")
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thin", type=int)
    _add_common(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("solve", help="local search for the best assignment")
    p.add_argument("--model")
    p.add_argument("--evid")
    p.add_argument("--method", choices=["greedy", "gls+"])
    p.add_argument("--weights", help="scorer weight file enabling the blended scorer")
    p.add_argument("--lambda", dest="mix", type=float, help="blend weight in [0,1]")
    p.add_argument("--steps", type=int)
    p.add_argument("--budget-seconds", dest="budget_seconds", type=float)
    p.add_argument("--restart", choices=["none", "local", "interval"])
    p.add_argument("--restart-interval", dest="restart_interval", type=int)
    p.add_argument("--gls-weight", dest="gls_weight", type=float)
    p.add_argument("--trace", help="write the trajectory to this file")
    _add_common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("datagen", help="generate labeled training data")
    p.add_argument("--model")
    p.add_argument("--n", type=int, help="number of queries")
    p.add_argument("--query-ratio", dest="query_ratio", help="R or LO:HI")
    p.add_argument("--budget-seconds", dest="budget_seconds", type=float)
    p.add_argument("--solver-steps", dest="solver_steps", type=int, help="step budget (test mode)")
    p.add_argument("--solver-restart-interval", dest="solver_restart_interval", type=int)
    p.add_argument("--stl", type=int, help="collection walk length per query")
    p.add_argument("--workers", type=int)
    _add_common(p)
    p.set_defaults(func=_cmd_datagen)

    p = sub.add_parser("drift", help="biased-walk simulation / bias measurement")
    p.add_argument("--alpha", type=float)
    p.add_argument("--h0", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--csv", help="write per-trial absorption steps to this file")
    p.add_argument("--measure-trace", dest="measure_trace", help="trajectory file to measure")
    p.add_argument("--model")
    p.add_argument("--evid")
    p.add_argument("--reference", help="assignment file the trajectory aims for")
    _add_common(p)
    p.set_defaults(func=_cmd_drift)

    p = sub.add_parser("eval", help="benchmark methods, write CSV tables")
    p.add_argument("--model")
    p.add_argument("--num-queries", dest="num_queries", type=int)
    p.add_argument("--query-ratio", dest="query_ratio")
    p.add_argument("--methods", help="comma list: greedy,gls+,neural-greedy,neural-gls+")
    p.add_argument("--weights")
    p.add_argument("--lambda", dest="mix", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--checkpoints", help="comma list of step checkpoints")
    p.add_argument("--restart-interval", dest="restart_interval", type=int)
    p.add_argument("--gls-weight", dest="gls_weight", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--zero-timing", dest="zero_timing", action="store_const", const=True,
                   help="report 0.0 timing columns for byte-reproducible output")
    p.add_argument("--csv", dest="csv", action=argparse.BooleanOptionalAction)
    p.add_argument("--plots", dest="plots", action="store_const", const=True)
    _add_common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="tune the scorer blend weight")
    p.add_argument("--model")
    p.add_argument("--weights")
    p.add_argument("--lambdas", help="comma list of blend weights")
    p.add_argument("--num-queries", dest="num_queries", type=int)
    p.add_argument("--query-ratio", dest="query_ratio")
    p.add_argument("--method", choices=["greedy", "gls+"])
    p.add_argument("--steps", type=int)
    p.add_argument("--checkpoints")
    p.add_argument("--restart-interval", dest="restart_interval", type=int)
    p.add_argument("--gls-weight", dest="gls_weight", type=float)
    p.add_argument("--workers", type=int)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(getattr(args, "quiet", False), getattr(args, "debug", False))
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"mpesearch: error: {e}", file=sys.stderr)
        return _USAGE_EXIT
    except MpeSearchError as e:
        print(f"mpesearch: {type(e).__name__}: {e}", file=sys.stderr)
        return _DATA_EXIT
    except OSError as e:
        print(f"mpesearch: cannot access file: {e}", file=sys.stderr)
        return _DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
