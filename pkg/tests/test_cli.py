"""End-to-end checks of the command-line front end via main(argv)."""
import json

import numpy as np
import pytest

from mpesearch import (
    LLGainScorer,
    QuerySpec,
    ScorerWeights,
    SearchConfig,
    greedy_search,
    save_weights,
    serialize_uai,
    write_trajectory,
)
from mpesearch.cli import main

from conftest import random_model


def _model(seed=123, num_vars=8):
    return random_model(np.random.default_rng(seed), num_vars=num_vars)


@pytest.fixture(scope="module")
def model_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "model.uai"
    path.write_text(serialize_uai(_model()))
    return str(path)


# ------------------------------------------------------------- exit codes


def test_usage_errors_exit_one(model_file):
    with pytest.raises(SystemExit) as e:
        main(["solve", "--bogus-flag"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == 1


def test_version_flag_exits_zero():
    with pytest.raises(SystemExit) as e:
        main(["--version"])
    assert e.value.code == 0


def test_missing_model_file_exits_two(tmp_path):
    assert main(["validate", str(tmp_path / "nope.uai")]) == 2


def test_malformed_model_exits_two(tmp_path):
    path = tmp_path / "bad.uai"
    path.write_text("MARKOV\n2\n2 2\n")
    assert main(["validate", str(path)]) == 2


def test_missing_weights_file_exits_two(model_file, tmp_path):
    rc = main(["solve", "--model", model_file, "--steps", "5",
               "--weights", str(tmp_path / "none.npz")])
    assert rc == 2


# --------------------------------------------------------------- validate


def test_validate_reports_dimensions(model_file, capsys):
    assert main(["validate", model_file]) == 0
    out = capsys.readouterr().out
    assert "8 variables" in out


def test_validate_checks_evidence(model_file, tmp_path, capsys):
    evid = tmp_path / "q.evid"
    evid.write_text("2 0 0 3 1\n")
    assert main(["validate", model_file, "--evid", str(evid)]) == 0
    assert "2 evidence assignments" in capsys.readouterr().out
    evid.write_text("1 99 0\n")
    assert main(["validate", model_file, "--evid", str(evid)]) == 2


# ------------------------------------------------------------------ solve


def test_solve_prints_result_json(model_file, capsys):
    argv = ["solve", "--model", model_file, "--steps", "60", "--seed", "3"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    result = json.loads(first)
    assert set(result) == {"F", "assignment", "steps", "restarts"}
    assert len(result["assignment"]) == 8
    assert result["steps"] == 60
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_solve_gls_method(model_file, capsys):
    rc = main(["solve", "--model", model_file, "--method", "gls+",
               "--steps", "40", "--restart-interval", "15", "--seed", "1"])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["steps"] == 40


def test_solve_budget_mode(model_file, capsys):
    rc = main(["solve", "--model", model_file, "--budget-seconds", "0.05", "--seed", "0"])
    assert rc == 0
    result = json.loads(capsys.readouterr().out)
    assert result["steps"] >= 0 and np.isfinite(result["F"])


def test_solve_writes_trace_and_outputs(model_file, tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    out = tmp_path / "run"
    rc = main(["solve", "--model", model_file, "--steps", "30", "--seed", "2",
               "--trace", str(trace), "--out", str(out)])
    assert rc == 0
    stdout_result = json.loads(capsys.readouterr().out)

    from mpesearch import read_trajectory

    traj = read_trajectory(trace)
    assert traj.num_steps == 30
    saved = json.loads((out / "solution.json").read_text())
    assert saved == stdout_result
    toks = (out / "solution.txt").read_text().split()
    assert toks[0] == "8" and len(toks) == 9
    assert [int(t) for t in toks[1:]] == stdout_result["assignment"]

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "solve"
    assert manifest["config_file"] is None
    assert manifest["params"]["steps"] == 30
    assert list(manifest["params"]) == sorted(manifest["params"])
    assert "version" in manifest


def test_unknown_method_from_config_exits_one(model_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "annealing"}))
    assert main(["solve", "--model", model_file, "--config", str(cfg)]) == 1


# ----------------------------------------------------------------- config


def test_flag_beats_config_beats_default(model_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"steps": 25, "seed": 9}))
    out = tmp_path / "run"
    rc = main(["solve", "--model", model_file, "--config", str(cfg),
               "--steps", "50", "--out", str(out)])
    assert rc == 0
    params = json.loads((out / "manifest.json").read_text())["params"]
    assert params["steps"] == 50  # flag wins
    assert params["seed"] == 9  # config beats default
    assert params["restart_interval"] == 100  # default


def test_lambda_config_key_maps_to_mix(model_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda": 0.25}))
    out = tmp_path / "run"
    rc = main(["solve", "--model", model_file, "--steps", "10",
               "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    params = json.loads((out / "manifest.json").read_text())["params"]
    assert params["mix"] == 0.25


def test_unknown_config_key_exits_one(model_file, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"stepz": 10}))
    assert main(["solve", "--model", model_file, "--config", str(cfg)]) == 1


def test_manifest_round_trips_as_config(model_file, tmp_path, capsys):
    out1 = tmp_path / "a"
    assert main(["solve", "--model", model_file, "--steps", "40", "--seed", "4",
                 "--out", str(out1)]) == 0
    first = capsys.readouterr().out
    out2 = tmp_path / "b"
    assert main(["solve", "--config", str(out1 / "manifest.json"),
                 "--out", str(out2)]) == 0
    assert capsys.readouterr().out == first
    p1 = json.loads((out1 / "manifest.json").read_text())["params"]
    p2 = json.loads((out2 / "manifest.json").read_text())["params"]
    p1["out"] = p2["out"] = None
    assert p1 == p2


# ----------------------------------------------------------------- sample


def test_sample_prints_jsonl_deterministically(model_file, capsys):
    argv = ["sample", "--model", model_file, "--n", "3", "--seed", "5"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    lines = first.strip().split("\n")
    assert len(lines) == 3
    for line in lines:
        s = json.loads(line)["sample"]
        assert len(s) == 8
    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_sample_out_dir(model_file, tmp_path):
    out = tmp_path / "s"
    rc = main(["sample", "--model", model_file, "--n", "2", "--seed", "1",
               "--out", str(out)])
    assert rc == 0
    assert (out / "manifest.json").exists()
    lines = (out / "samples.jsonl").read_text().strip().split("\n")
    assert len(lines) == 2


def test_sample_needs_model():
    assert main(["sample", "--n", "1"]) == 1


# ---------------------------------------------------------------- datagen


def test_datagen_requires_out_and_stl(model_file, tmp_path):
    assert main(["datagen", "--model", model_file, "--stl", "10"]) == 1
    assert main(["datagen", "--model", model_file, "--out", str(tmp_path / "d")]) == 1


def test_datagen_writes_dataset(model_file, tmp_path, capsys):
    out = tmp_path / "d"
    rc = main(["datagen", "--model", model_file, "--n", "2", "--stl", "10",
               "--solver-steps", "60", "--seed", "7", "--out", str(out)])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert info["records"] == 2 * 11
    lines = (out / "dataset.jsonl").read_text().strip().split("\n")
    assert len(lines) == 1 + 22
    assert json.loads(lines[0])["num_vars"] == 8
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "datagen"
    assert manifest["params"]["stl"] == 10


# ------------------------------------------------------------------ drift


def test_drift_simulation_summary(tmp_path, capsys):
    csv_path = tmp_path / "taus.csv"
    rc = main(["drift", "--alpha", "0.75", "--h0", "20", "--trials", "2000",
               "--seed", "1", "--csv", str(csv_path)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["bound"] == 40.0
    assert {"alpha", "h0", "trials", "mean_steps", "p50", "p90", "p99"} <= set(summary)
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == "trial,steps"
    assert len(lines) == 1 + 2000


def test_drift_needs_alpha_and_h0():
    assert main(["drift", "--alpha", "0.8"]) == 1


def test_drift_measure_mode(model_file, tmp_path, capsys):
    model = _model()
    q = QuerySpec.build(model, {})
    traj = greedy_search(model, q, LLGainScorer(), SearchConfig(max_steps=80, seed=11))
    trace = tmp_path / "trace.jsonl"
    write_trajectory(trace, traj)
    best, _ = traj.best_so_far
    ref = tmp_path / "ref.txt"
    ref.write_text("8 " + " ".join(str(int(v)) for v in best) + "\n")
    rc = main(["drift", "--measure-trace", str(trace), "--model", model_file,
               "--reference", str(ref)])
    assert rc == 0
    est = json.loads(capsys.readouterr().out)
    assert est["reducing"] + est["nonreducing"] > 0
    assert 0.0 <= est["alpha_hat"] <= 1.0
    assert main(["drift", "--measure-trace", str(trace)]) == 1


# ------------------------------------------------------------------- eval


def test_eval_writes_csv_tables(model_file, tmp_path, capsys):
    out = tmp_path / "e"
    rc = main(["eval", "--model", model_file, "--num-queries", "3",
               "--methods", "greedy,gls+", "--steps", "30",
               "--checkpoints", "15,30", "--restart-interval", "10",
               "--seed", "2", "--zero-timing", "--out", str(out)])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert info["runs"] == 3 * 2
    results = (out / "results.csv").read_text().strip().split("\n")
    assert results[0] == "query,method,step,F,sec_per_step"
    assert len(results) == 1 + 6 * 2
    summary = (out / "summary.csv").read_text().strip().split("\n")
    assert summary[0] == "method_a,method_b,step,win_pct,pct_improvement"
    assert len(summary) == 1 + 2
    assert json.loads((out / "manifest.json").read_text())["command"] == "eval"


def test_eval_no_csv(model_file, tmp_path):
    out = tmp_path / "e"
    rc = main(["eval", "--model", model_file, "--num-queries", "2",
               "--methods", "greedy", "--steps", "10", "--seed", "0",
               "--no-csv", "--out", str(out)])
    assert rc == 0
    assert not (out / "results.csv").exists()


def test_eval_neural_method_needs_weights(model_file, tmp_path):
    rc = main(["eval", "--model", model_file, "--methods", "neural-greedy",
               "--steps", "10", "--out", str(tmp_path / "e")])
    assert rc == 1


# ------------------------------------------------------------------ sweep


def test_sweep_reports_best_lambda(model_file, tmp_path, capsys):
    weights = ScorerWeights.zeros(
        _model().cardinalities, d_model=4, n_heads=2, n_attn_layers=1,
        n_ffn_blocks=1, ffn_dim=4,
    )
    wpath = tmp_path / "w.bin"
    save_weights(wpath, weights)
    out = tmp_path / "sw"
    rc = main(["sweep", "--model", model_file, "--weights", str(wpath),
               "--lambdas", "0.0,0.5", "--num-queries", "2", "--steps", "20",
               "--seed", "3", "--out", str(out)])
    assert rc == 0
    # an all-zero net scores every move 0.5, so both blends follow the
    # likelihood ranking and tie; the earliest blend must win
    assert json.loads(capsys.readouterr().out) == {"best_lambda": 0.0}
    lines = (out / "sweep.csv").read_text().strip().split("\n")
    assert lines[0] == "mix,step,mean_F,sd_F"
    assert len(lines) == 1 + 2


def test_sweep_needs_weights(model_file, tmp_path):
    assert main(["sweep", "--model", model_file, "--out", str(tmp_path / "x")]) == 1
