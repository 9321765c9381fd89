"""Biased-walk absorption experiments and empirical step-bias measurement.

The idealized picture of a guided search: the Hamming distance to the
target is a walk on the nonnegative integers that steps down with
probability ``alpha`` and up otherwise, absorbing at zero.  For
``alpha > 1/2`` the expected absorption time from height ``h0`` is
bounded by ``h0 / (2 * alpha - 1)``; the simulator checks that bound
empirically, and ``measure_alpha`` recovers the per-step bias from a real
search trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DriftError
from .model import Assignment, GraphicalModel, QuerySpec, hamming_distance
from .search import Trajectory

# Hard cap on walk length; beyond this the simulation aborts loudly.
_MAX_WALK_STEPS = 10_000_000


@dataclass(frozen=True)
class DriftConfig:
    alpha: float
    h0: int
    trials: int = 100_000
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.h0 < 1:
            raise ConfigError(f"h0 must be >= 1, got {self.h0}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class DriftReport:
    alpha: float
    h0: int
    trials: int
    mean_steps: float
    bound: float | None  # h0 / (2 alpha - 1), None when alpha <= 1/2
    quantiles: dict[str, float]
    taus: np.ndarray

    def summary(self) -> dict:
        out = {
            "alpha": self.alpha,
            "h0": self.h0,
            "trials": self.trials,
            "mean_steps": self.mean_steps,
            "bound": self.bound,
        }
        out.update({f"p{k}": v for k, v in self.quantiles.items()})
        return out


def drift_bound(alpha: float, h0: int) -> float | None:
    """Expected-absorption-time bound for a downward bias ``alpha > 1/2``."""
    if alpha <= 0.5:
        return None
    return h0 / (2.0 * alpha - 1.0)


def simulate_drift(cfg: DriftConfig) -> DriftReport:
    """Monte Carlo absorption times of the idealized +/-1 walk."""
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    h = np.full(cfg.trials, cfg.h0, dtype=np.int64)
    tau = np.zeros(cfg.trials, dtype=np.int64)
    active = h > 0
    steps = 0
    while active.any():
        if steps >= _MAX_WALK_STEPS:
            raise DriftError(
                f"{int(active.sum())} of {cfg.trials} walks still unabsorbed "
                f"after {steps} steps (alpha={cfg.alpha}, h0={cfg.h0})"
            )
        idx = np.flatnonzero(active)
        down = rng.random(idx.size) < cfg.alpha
        h[idx] += np.where(down, -1, 1)
        tau[idx] += 1
        active[idx] = h[idx] > 0
        steps += 1
    qs = np.percentile(tau, [50, 90, 99])
    return DriftReport(
        alpha=cfg.alpha,
        h0=cfg.h0,
        trials=cfg.trials,
        mean_steps=float(tau.mean()),
        bound=drift_bound(cfg.alpha, cfg.h0),
        quantiles={"50": float(qs[0]), "90": float(qs[1]), "99": float(qs[2])},
        taus=tau,
    )


@dataclass(frozen=True)
class AlphaEstimate:
    reducing: int
    nonreducing: int

    @property
    def alpha_hat(self) -> float | None:
        total = self.reducing + self.nonreducing
        return self.reducing / total if total else None


def measure_alpha(
    traj: Trajectory, reference: Assignment, q: QuerySpec, model: GraphicalModel | None = None
) -> AlphaEstimate:
    """Empirical distance-reduction rate of a trajectory's steps.

    Counts consecutive state pairs whose first state still differs from
    the reference; restart transitions are excluded; steps that leave the
    distance unchanged or raise it count as non-reducing.
    """
    restarts = set(traj.restarts)
    reducing = 0
    nonreducing = 0
    for prev, cur in zip(traj.states, traj.states[1:]):
        if prev.values is None or cur.values is None:
            raise ConfigError("trajectory lacks state snapshots; rerun with snapshots on")
        if cur.step in restarts:
            continue
        d_prev = hamming_distance(prev.values, reference, q)
        if d_prev == 0:
            continue
        d_cur = hamming_distance(cur.values, reference, q)
        if d_cur < d_prev:
            reducing += 1
        else:
            nonreducing += 1
    return AlphaEstimate(reducing=reducing, nonreducing=nonreducing)
