"""Trajectory and ensemble simulation of X_t = f(X_{t-1}) + g(X_{t-1}) e_t.

Ensembles derive one independent seed per trajectory from a 64-bit finalizer
mix of the master seed, so results are a pure function of the configuration
and identical under any execution order or thread count.  Diverged
trajectories are censored at their first offending step and excluded from
later snapshot statistics while staying in the divergence counts.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import ks_2samp

from .models import ThresholdAffine2D, step
from .noise import sample

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

DEFAULT_DIVERGENCE_THRESHOLD = 1e9


def mix64(master_seed, index):
    """Per-trajectory seed: SplitMix64-style finalizer, bit-exact contract.

    z = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) mod 2^64
    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9  (mod 2^64)
    z ^= z >> 27;  z *= 0x94D049BB133111EB  (mod 2^64)
    z ^= z >> 31
    """
    z = (int(master_seed) + (int(index) + 1) * _GOLDEN) & _MASK64
    z ^= z >> 30
    z = (z * _MIX1) & _MASK64
    z ^= z >> 27
    z = (z * _MIX2) & _MASK64
    z ^= z >> 31
    return z


@dataclass(frozen=True)
class SimulationConfig:
    """Ensemble description: model, noise, start, horizon and seeding.

    `x0` is either a fixed starting point or a callable rng -> point drawn
    once per trajectory from that trajectory's own stream.
    """

    model: object
    noise: object
    x0: object
    horizon: int
    n_traj: int
    snapshot_times: tuple
    master_seed: int
    divergence_threshold: float = DEFAULT_DIVERGENCE_THRESHOLD

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        times = tuple(int(t) for t in self.snapshot_times)
        if not times:
            raise ValueError("snapshot_times must be nonempty")
        if list(times) != sorted(set(times)):
            raise ValueError("snapshot_times must be strictly increasing")
        if times[0] < 0 or times[-1] > self.horizon:
            raise ValueError("snapshot_times must lie in [0, horizon]")
        object.__setattr__(self, "snapshot_times", times)
        if not callable(self.x0):
            object.__setattr__(
                self, "x0", tuple(float(v) for v in self.x0)
            )
        if not self.divergence_threshold > 0:
            raise ValueError("divergence_threshold must be positive")


@dataclass(frozen=True, eq=False)
class PathResult:
    """One simulated path; `states` has a row per retained time step.

    A non-finite state truncates the path before the offending step; a
    finite state beyond the divergence threshold is kept as the last row.
    In both cases `divergence_step` is the first offending t.
    """

    states: np.ndarray
    diverged: bool
    divergence_step: Optional[int] = None


@dataclass(frozen=True)
class SnapshotStats:
    """Moment summary of the ensemble at one snapshot time."""

    time: int
    count: int
    mean: tuple
    second_moment: tuple
    norm_mean: float
    norm_q10: float
    norm_q50: float
    norm_q90: float


@dataclass(frozen=True, eq=False)
class EnsembleSummary:
    """Snapshot statistics plus divergence bookkeeping for one ensemble.

    `snapshot_samples[k]` holds the contributing states at snapshot k
    (trajectories censored before that time are excluded); counts satisfy
    diverged_count + (contributing at the last snapshot) = n_traj only when
    every divergence happens before that snapshot, so both are reported.
    """

    n_traj: int
    snapshots: tuple
    snapshot_samples: tuple
    diverged_count: int
    divergence_steps: tuple


@dataclass(frozen=True)
class StationaryMoments:
    """Across-snapshot average and min/max band of the per-coordinate
    stationary mean and second moment."""

    mean: tuple
    second_moment: tuple
    mean_band: tuple
    second_moment_band: tuple
    snapshots_used: int


def _simulate_threshold_path(model, draws, x0, horizon, threshold):
    """Scalar fast path for ThresholdAffine2D; mirrors step() arithmetic."""
    a1, a2 = model.a
    ((b11, b12), (b21, b22)) = model.b_mat
    ((d11, d12), (d21, d22)) = model.d_main
    d31, d32 = model.d_c
    d41, d42 = model.d_const
    x1, x2 = float(x0[0]), float(x0[1])
    out = np.empty((horizon + 1, 2))
    out[0, 0], out[0, 1] = x1, x2
    for t in range(1, horizon + 1):
        u1 = draws[t - 1, 0]
        u2 = draws[t - 1, 1]
        f1 = a1 + b11 * x1 + b12 * x2
        f2 = a2 + b21 * x1 + b22 * x2
        if x1 <= 0.0 and x2 <= 0.0:
            y1 = f1 + (d31 * x1 + d41) * u1
            y2 = f2 + (d32 * x2 + d42) * u1
        else:
            y1 = f1 + (d11 * x1 + d41) * u1 + d12 * x2 * u2
            y2 = f2 + (d21 * x1 + d42) * u1 + d22 * x2 * u2
        if not (math.isfinite(y1) and math.isfinite(y2)):
            return out[:t], t
        out[t, 0], out[t, 1] = y1, y2
        x1, x2 = y1, y2
        if threshold is not None and abs(x1) + abs(x2) > threshold:
            return out[:t + 1], t
    return out, None


def _simulate_generic_path(model, draws, x0, horizon, threshold):
    x = np.asarray(x0, dtype=float)
    out = np.empty((horizon + 1, x.shape[0]))
    out[0] = x
    # Overflow to inf is the designed divergence signal here, not an anomaly.
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(1, horizon + 1):
            x = step(model, x, draws[t - 1])
            if not np.all(np.isfinite(x)):
                return out[:t], t
            out[t] = x
            if threshold is not None and float(np.sum(np.abs(x))) > threshold:
                return out[:t + 1], t
    return out, None


def simulate_path(model, noise_spec, x0, horizon, seed,
                  divergence_threshold=None):
    """Simulate one path of length horizon+1 from the seeded noise stream.

    Without a threshold the path only stops early on a non-finite state;
    with one, the first state whose l1 norm exceeds it is recorded and kept
    as the final row.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = np.random.default_rng(seed)
    if callable(x0):
        x0 = x0(rng)
    draws = sample(noise_spec, rng, horizon)
    if isinstance(model, ThresholdAffine2D):
        states, bad_step = _simulate_threshold_path(
            model, draws, x0, horizon, divergence_threshold
        )
    else:
        states, bad_step = _simulate_generic_path(
            model, draws, x0, horizon, divergence_threshold
        )
    return PathResult(
        states=states, diverged=bad_step is not None, divergence_step=bad_step
    )


def run_trajectories(cfg, threads=1):
    """All ensemble paths in index order, regardless of execution order."""

    def one(i):
        return simulate_path(
            cfg.model, cfg.noise, cfg.x0, cfg.horizon, mix64(cfg.master_seed, i),
            divergence_threshold=cfg.divergence_threshold,
        )

    indices = range(cfg.n_traj)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return tuple(pool.map(one, indices))
    return tuple(one(i) for i in indices)


def _snapshot_rows(paths, time):
    rows = [
        p.states[time]
        for p in paths
        if p.divergence_step is None or time < p.divergence_step
    ]
    if rows:
        return np.array(rows)
    dim = paths[0].states.shape[1]
    return np.empty((0, dim))


def _snapshot_stats(time, rows):
    count = rows.shape[0]
    if count == 0:
        dim = rows.shape[1]
        nan = float("nan")
        return SnapshotStats(
            time=time, count=0, mean=(nan,) * dim, second_moment=(nan,) * dim,
            norm_mean=nan, norm_q10=nan, norm_q50=nan, norm_q90=nan,
        )
    norms = np.sum(np.abs(rows), axis=1)
    q10, q50, q90 = np.quantile(norms, (0.1, 0.5, 0.9))
    return SnapshotStats(
        time=time,
        count=count,
        mean=tuple(float(v) for v in np.mean(rows, axis=0)),
        second_moment=tuple(float(v) for v in np.mean(rows ** 2, axis=0)),
        norm_mean=float(np.mean(norms)),
        norm_q10=float(q10),
        norm_q50=float(q50),
        norm_q90=float(q90),
    )


def aggregate_ensemble(cfg, paths):
    """Gather-then-reduce in index order so aggregation is order-free."""
    samples = tuple(_snapshot_rows(paths, t) for t in cfg.snapshot_times)
    snapshots = tuple(
        _snapshot_stats(t, rows) for t, rows in zip(cfg.snapshot_times, samples)
    )
    steps = tuple(p.divergence_step for p in paths)
    return EnsembleSummary(
        n_traj=cfg.n_traj,
        snapshots=snapshots,
        snapshot_samples=samples,
        diverged_count=sum(1 for s in steps if s is not None),
        divergence_steps=steps,
    )


def simulate_ensemble(cfg, threads=1):
    """Ensemble summary as a pure function of the configuration."""
    return aggregate_ensemble(cfg, run_trajectories(cfg, threads=threads))


def snapshot_distance(sample_a, sample_b):
    """Max over coordinates of the two-sample Kolmogorov-Smirnov statistic."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("snapshot samples must be nonempty")
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("snapshot samples must be (n, dim) with equal dim")
    return max(
        float(ks_2samp(a[:, j], b[:, j]).statistic) for j in range(a.shape[1])
    )


def estimate_stationary_moments(summary, burn_in):
    """Average snapshot moments past the burn-in, with min/max bands."""
    used = [
        s for s in summary.snapshots if s.time > burn_in and s.count > 0
    ]
    if len(used) < 2:
        raise ValueError("need at least 2 populated snapshots after burn_in")
    means = np.array([s.mean for s in used])
    seconds = np.array([s.second_moment for s in used])
    return StationaryMoments(
        mean=tuple(float(v) for v in means.mean(axis=0)),
        second_moment=tuple(float(v) for v in seconds.mean(axis=0)),
        mean_band=tuple(
            (float(lo), float(hi))
            for lo, hi in zip(means.min(axis=0), means.max(axis=0))
        ),
        second_moment_band=tuple(
            (float(lo), float(hi))
            for lo, hi in zip(seconds.min(axis=0), seconds.max(axis=0))
        ),
        snapshots_used=len(used),
    )
