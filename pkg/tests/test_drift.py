"""Absorption-time simulation and trajectory bias measurement."""
import numpy as np
import pytest

import mpesearch.drift as drift_mod
from mpesearch import (
    ConfigError,
    DriftConfig,
    DriftError,
    GraphicalModel,
    HammingOracleScorer,
    QuerySpec,
    SearchConfig,
    Trajectory,
    drift_bound,
    greedy_search,
    hamming_distance,
    measure_alpha,
    random_assignment,
    simulate_drift,
)

from conftest import random_model, random_query


def test_bound_arithmetic():
    assert drift_bound(0.75, 20) == 40.0
    assert drift_bound(0.9, 100) == pytest.approx(125.0)
    assert drift_bound(0.6, 5) == pytest.approx(25.0)
    assert drift_bound(0.5, 10) is None
    assert drift_bound(0.3, 10) is None


def test_simulated_mean_tracks_bound():
    # for the idealized walk the bound holds with equality, so the Monte
    # Carlo mean should sit within a few standard errors of it
    for alpha, h0 in [(0.75, 20), (0.9, 5), (0.6, 10)]:
        rep = simulate_drift(DriftConfig(alpha=alpha, h0=h0, trials=20_000, seed=1))
        bound = drift_bound(alpha, h0)
        assert abs(rep.mean_steps - bound) / bound < 0.05
        assert np.isfinite(rep.quantiles["99"])
        assert rep.taus.shape == (20_000,)
        assert (rep.taus >= h0).all()  # parity: cannot absorb sooner than h0


def test_simulation_deterministic_per_seed():
    a = simulate_drift(DriftConfig(alpha=0.7, h0=8, trials=500, seed=3))
    b = simulate_drift(DriftConfig(alpha=0.7, h0=8, trials=500, seed=3))
    c = simulate_drift(DriftConfig(alpha=0.7, h0=8, trials=500, seed=4))
    np.testing.assert_array_equal(a.taus, b.taus)
    assert (a.taus != c.taus).any()


def test_summary_fields():
    rep = simulate_drift(DriftConfig(alpha=0.8, h0=4, trials=200, seed=0))
    s = rep.summary()
    assert set(s) == {"alpha", "h0", "trials", "mean_steps", "bound", "p50", "p90", "p99"}
    assert s["bound"] == pytest.approx(4 / 0.6)


def test_unabsorbed_walks_abort_loudly(monkeypatch):
    monkeypatch.setattr(drift_mod, "_MAX_WALK_STEPS", 200)
    with pytest.raises(DriftError) as err:
        simulate_drift(DriftConfig(alpha=0.45, h0=150, trials=8, seed=0))
    assert "unabsorbed" in str(err.value)


def test_config_validation():
    with pytest.raises(ConfigError):
        simulate_drift(DriftConfig(alpha=0.0, h0=5))
    with pytest.raises(ConfigError):
        simulate_drift(DriftConfig(alpha=1.0, h0=5))
    with pytest.raises(ConfigError):
        simulate_drift(DriftConfig(alpha=0.7, h0=0))
    with pytest.raises(ConfigError):
        simulate_drift(DriftConfig(alpha=0.7, h0=5, trials=0))


def _hand_trajectory(states, restarts):
    traj = Trajectory()
    for i, s in enumerate(states):
        traj.record(i, np.asarray(s, dtype=np.int64), 0.0)
    traj.restarts = list(restarts)
    return traj


def test_measured_alpha_on_hand_trajectory():
    # transitions: reduce, reduce, backtrack, reduce -> 3 of 4
    m = GraphicalModel.build([2, 2, 2], [((0,), np.zeros(2))])
    q = QuerySpec.build(m, {})
    ref = np.zeros(3, dtype=np.int64)
    traj = _hand_trajectory(
        [(1, 1, 1), (1, 1, 0), (1, 0, 0), (1, 1, 0), (1, 0, 0)], restarts=[]
    )
    est = measure_alpha(traj, ref, q, m)
    assert (est.reducing, est.nonreducing) == (3, 1)
    assert est.alpha_hat == 0.75


def test_measured_alpha_exclusions():
    # restart transitions and pairs that start at distance zero are not
    # counted in either bucket
    m = GraphicalModel.build([2, 2], [((0,), np.zeros(2))])
    q = QuerySpec.build(m, {})
    ref = np.zeros(2, dtype=np.int64)
    traj = _hand_trajectory(
        [(1, 0), (0, 0), (0, 0), (1, 1), (1, 0)], restarts=[3]
    )
    # pairs: 0->1 reduce; 1->2 skipped (at reference); 2->3 restart,
    # excluded; 3->4 reduce
    est = measure_alpha(traj, ref, q, m)
    assert (est.reducing, est.nonreducing) == (2, 0)
    assert est.alpha_hat == 1.0


def test_measured_alpha_empty_is_none():
    m = GraphicalModel.build([2], [((0,), np.zeros(2))])
    q = QuerySpec.build(m, {})
    ref = np.zeros(1, dtype=np.int64)
    traj = _hand_trajectory([(0,), (0,)], restarts=[])
    est = measure_alpha(traj, ref, q, m)
    assert est.alpha_hat is None


def test_measured_alpha_needs_snapshots():
    m = GraphicalModel.build([2], [((0,), np.zeros(2))])
    q = QuerySpec.build(m, {})
    traj = Trajectory()
    traj.record(0, np.zeros(1, dtype=np.int64), 0.0, keep_state=False)
    traj.record(1, np.ones(1, dtype=np.int64), 0.0, keep_state=False)
    with pytest.raises(ConfigError):
        measure_alpha(traj, np.zeros(1, dtype=np.int64), q, m)


def test_oracle_walk_measures_alpha_one():
    rng = np.random.default_rng(9)
    m = random_model(rng, num_vars=12)
    q = random_query(m, rng)
    x0 = random_assignment(m, rng, q.evidence)
    ref = random_assignment(m, rng, q.evidence)
    d = hamming_distance(x0, ref, q)
    if d == 0:
        x0[int(q.query_vars[0])] ^= 1
        d = hamming_distance(x0, ref, q)
    cfg = SearchConfig(max_steps=d, restart_policy=None, seed=0)
    traj = greedy_search(m, q, HammingOracleScorer(ref), cfg, x0=x0)
    est = measure_alpha(traj, ref, q, m)
    assert est.alpha_hat == 1.0
    assert est.reducing == d
