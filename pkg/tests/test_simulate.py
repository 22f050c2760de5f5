import math

import numpy as np
import pytest

from ergokit.models import GenericModel, ThresholdAffine2D, step
from ergokit.noise import Expol2, StdGaussian, sample
from ergokit.simulate import (
    SimulationConfig,
    aggregate_ensemble,
    estimate_stationary_moments,
    mix64,
    run_trajectories,
    simulate_ensemble,
    simulate_path,
    snapshot_distance,
)

# SplitMix64-style finalizer, frozen reference triples (master, index, seed).
MIX64_REFERENCE = (
    (0, 0, 16294208416658607535),
    (0, 1, 7960286522194355700),
    (20260814, 0, 11659246549464438061),
    (20260814, 199, 15910749215141267597),
    (2 ** 64 - 1, 7, 4638043754431676516),
)


def make_threshold(b_mat=((0.2, 0.1), (0.1, 0.3)),
                   d_main=((0.1, -0.15), (-0.15, 0.1)),
                   d_c=(0.2, -0.25)):
    return ThresholdAffine2D(a=(0.0, 0.0), b_mat=b_mat, d_main=d_main,
                             d_c=d_c, d_const=(1.0, 1.0))


def noise_only_model():
    return GenericModel(dim=2, f=lambda x: np.zeros(2), g=lambda x: np.eye(2))


def test_mix64_reference_values():
    for master, index, expected in MIX64_REFERENCE:
        assert mix64(master, index) == expected
    # Distinct indices under one master give distinct streams.
    seeds = {mix64(42, i) for i in range(1000)}
    assert len(seeds) == 1000


def test_simulate_path_matches_step_composition():
    m = make_threshold()
    res = simulate_path(m, Expol2(), (0.5, -0.25), 50, seed=123)
    assert res.states.shape == (51, 2)
    assert not res.diverged
    # Reconstruct with the generic step operator and the same draws.
    rng = np.random.default_rng(123)
    draws = sample(Expol2(), rng, 50)
    x = np.array([0.5, -0.25])
    for t in range(1, 51):
        x = step(m, x, draws[t - 1])
        assert res.states[t] == pytest.approx(x, rel=1e-15, abs=1e-15)
    again = simulate_path(m, Expol2(), (0.5, -0.25), 50, seed=123)
    assert np.array_equal(res.states, again.states)


def test_simulate_path_noise_only_is_iid():
    res = simulate_path(noise_only_model(), Expol2(), (3.0, 3.0), 20, seed=9)
    rng = np.random.default_rng(9)
    draws = sample(Expol2(), rng, 20)
    assert np.array_equal(res.states[1:], draws)


def test_simulate_path_affine_without_noise():
    silent = GenericModel(dim=2, f=lambda x: 0.5 * x + 1.0,
                          g=lambda x: np.zeros((2, 2)))
    res = simulate_path(silent, StdGaussian(2), (0.0, 0.0), 30, seed=0)
    x = np.zeros(2)
    for t in range(1, 31):
        x = 0.5 * x + 1.0
        assert res.states[t] == pytest.approx(x, rel=1e-15)
    # Converges to the fixed point 2.
    assert res.states[-1] == pytest.approx((2.0, 2.0), rel=1e-8)


def test_simulate_path_truncates_on_nonfinite():
    # f and g stay finite (so the model-level guards pass) but their
    # combination overflows double precision inside the step arithmetic.
    blower = GenericModel(dim=2, f=lambda x: np.full(2, 1.5e308),
                          g=lambda x: np.diag((1e308, 1e308)))
    res = simulate_path(blower, StdGaussian(2), (1.0, 1.0), 10, seed=1)
    assert res.diverged and res.divergence_step is not None
    # The non-finite state itself is not stored.
    assert res.states.shape[0] == res.divergence_step
    assert np.all(np.isfinite(res.states))


def test_simulate_path_threshold_censoring():
    m = make_threshold(b_mat=((2.0, 0.0), (0.0, 2.0)))
    res = simulate_path(m, Expol2(), (1.0, 1.0), 50, seed=4,
                        divergence_threshold=100.0)
    assert res.diverged
    norms = np.sum(np.abs(res.states), axis=1)
    # The offending state is kept as the last row; all earlier rows are in.
    assert norms[-1] > 100.0
    assert np.all(norms[:-1] <= 100.0)
    assert res.states.shape[0] == res.divergence_step + 1


def test_simulate_path_sampled_start():
    draw_start = lambda rng: rng.uniform(-1.0, 1.0, 2)
    res = simulate_path(noise_only_model(), StdGaussian(2), draw_start, 5, seed=8)
    again = simulate_path(noise_only_model(), StdGaussian(2), draw_start, 5, seed=8)
    assert np.array_equal(res.states, again.states)
    assert np.all(np.abs(res.states[0]) <= 1.0)


def test_config_validation():
    base = dict(model=make_threshold(), noise=Expol2(), x0=(0.0, 0.0),
                horizon=100, n_traj=4, snapshot_times=(50, 100),
                master_seed=1)
    SimulationConfig(**base)
    with pytest.raises(ValueError):
        SimulationConfig(**{**base, "horizon": 0})
    with pytest.raises(ValueError):
        SimulationConfig(**{**base, "n_traj": 0})
    with pytest.raises(ValueError):
        SimulationConfig(**{**base, "snapshot_times": ()})
    with pytest.raises(ValueError):
        SimulationConfig(**{**base, "snapshot_times": (100, 50)})
    with pytest.raises(ValueError):
        SimulationConfig(**{**base, "snapshot_times": (50, 200)})
    with pytest.raises(ValueError):
        SimulationConfig(**{**base, "divergence_threshold": 0.0})


def test_ensemble_thread_count_invariance():
    cfg = SimulationConfig(model=make_threshold(), noise=Expol2(),
                           x0=(0.0, 0.0), horizon=200, n_traj=16,
                           snapshot_times=(100, 200), master_seed=77)
    serial = simulate_ensemble(cfg, threads=1)
    for threads in (3, 7):
        parallel = simulate_ensemble(cfg, threads=threads)
        assert parallel.snapshots == serial.snapshots
        assert parallel.divergence_steps == serial.divergence_steps
        for a, b in zip(parallel.snapshot_samples, serial.snapshot_samples):
            assert np.array_equal(a, b)


def test_ensemble_single_trajectory_reduces_to_path():
    cfg = SimulationConfig(model=make_threshold(), noise=Expol2(),
                           x0=(0.0, 0.0), horizon=50, n_traj=1,
                           snapshot_times=(25, 50), master_seed=5)
    summary = simulate_ensemble(cfg)
    path = simulate_path(cfg.model, cfg.noise, cfg.x0, cfg.horizon,
                         mix64(5, 0), divergence_threshold=cfg.divergence_threshold)
    for stats, time in zip(summary.snapshots, cfg.snapshot_times):
        assert stats.count == 1
        assert stats.mean == pytest.approx(tuple(path.states[time]), rel=0)


def test_all_diverged_before_first_snapshot_is_reported():
    m = make_threshold(b_mat=((3.0, 0.0), (0.0, 3.0)))
    cfg = SimulationConfig(model=m, noise=Expol2(), x0=(1.0, 1.0),
                           horizon=50, n_traj=4, snapshot_times=(50,),
                           master_seed=3, divergence_threshold=10.0)
    summary = simulate_ensemble(cfg)
    assert summary.diverged_count == 4
    assert summary.snapshots[0].count == 0
    assert math.isnan(summary.snapshots[0].norm_mean)
    assert all(s is not None for s in summary.divergence_steps)


def test_divergence_monotone_in_threshold():
    m = make_threshold(b_mat=((1.5, 0.0), (0.0, 1.5)))
    counts = []
    for threshold in (1e6, 1e3, 1e1):
        cfg = SimulationConfig(model=m, noise=Expol2(), x0=(1.0, 1.0),
                               horizon=100, n_traj=30, snapshot_times=(100,),
                               master_seed=13, divergence_threshold=threshold)
        counts.append(simulate_ensemble(cfg).diverged_count)
    assert counts[0] <= counts[1] <= counts[2]
    assert counts[2] == 30


def test_snapshot_distance_edges():
    zeros = np.zeros((40, 2))
    ones = np.ones((40, 2))
    assert snapshot_distance(zeros, zeros) == 0.0
    assert snapshot_distance(zeros, ones) == 1.0
    with pytest.raises(ValueError):
        snapshot_distance(np.empty((0, 2)), ones)
    with pytest.raises(ValueError):
        snapshot_distance(np.zeros((3, 2)), np.zeros((3, 3)))


def test_ergodic_model_stays_bounded_and_mixes():
    # 200 trajectories keep the two-sample KS noise floor ~0.1, well under
    # the 0.15 heuristic stationarity band.
    cfg = SimulationConfig(model=make_threshold(), noise=Expol2(),
                           x0=(0.0, 0.0), horizon=2000, n_traj=200,
                           snapshot_times=(1000, 2000), master_seed=2026)
    summary = simulate_ensemble(cfg)
    assert summary.diverged_count == 0
    # Distribution has settled: snapshots far apart look alike.
    ks = snapshot_distance(summary.snapshot_samples[0],
                           summary.snapshot_samples[1])
    assert ks <= 0.15
    assert summary.snapshots[-1].norm_q50 < 10.0


def test_unit_root_medians_grow():
    # Unit-root mean matrix: the chain wanders off; median norm rises with t
    # and gains at least 2x between t=1e2 and t=1e4.
    m = make_threshold(b_mat=((1.0, 0.0), (0.0, 1.0)))
    cfg = SimulationConfig(model=m, noise=Expol2(), x0=(0.0, 0.0),
                           horizon=10 ** 4, n_traj=50,
                           snapshot_times=(10 ** 2, 10 ** 3, 10 ** 4),
                           master_seed=414243)
    summary = simulate_ensemble(cfg)
    med = [s.norm_q50 for s in summary.snapshots]
    assert med[0] < med[1] < med[2]
    assert med[2] > 2.0 * med[0]


def test_stationary_moments_noise_only():
    cfg = SimulationConfig(model=noise_only_model(), noise=StdGaussian(2),
                           x0=(0.0, 0.0), horizon=400, n_traj=300,
                           snapshot_times=(100, 200, 300, 400),
                           master_seed=55)
    est = estimate_stationary_moments(simulate_ensemble(cfg), burn_in=0)
    # The stationary law is the noise law: unit second moment per coordinate,
    # allow 3x the Monte Carlo error sqrt(Var(Z^2)/n) = sqrt(2/300).
    tol = 3.0 * math.sqrt(2.0 / 300.0)
    for j in range(2):
        assert abs(est.second_moment[j] - 1.0) < tol
        lo, hi = est.mean_band[j]
        assert lo <= est.mean[j] <= hi
    assert est.snapshots_used == 4


def test_stationary_moments_fixed_point_and_errors():
    frozen = GenericModel(dim=2, f=lambda x: 0.5 * x,
                          g=lambda x: np.zeros((2, 2)))
    cfg = SimulationConfig(model=frozen, noise=StdGaussian(2), x0=(0.0, 0.0),
                           horizon=100, n_traj=3, snapshot_times=(50, 100),
                           master_seed=1)
    est = estimate_stationary_moments(simulate_ensemble(cfg), burn_in=0)
    assert est.mean == (0.0, 0.0)
    assert est.second_moment == (0.0, 0.0)
    with pytest.raises(ValueError):
        estimate_stationary_moments(simulate_ensemble(cfg), burn_in=50)


def test_stationary_band_shrinks_with_ensemble_size():
    def band_width(n_traj):
        cfg = SimulationConfig(model=make_threshold(), noise=Expol2(),
                               x0=(0.0, 0.0), horizon=1500, n_traj=n_traj,
                               snapshot_times=(500, 1000, 1500),
                               master_seed=606)
        est = estimate_stationary_moments(simulate_ensemble(cfg), burn_in=0)
        return max(hi - lo for lo, hi in est.mean_band)

    assert band_width(240) < band_width(30)
