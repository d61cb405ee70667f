import math

import numpy as np
import pytest

import config
from comparison.radial import bessel_diffusion, constant_drift_diffusion, eta_comparison
from errors import PreconditionError
from geometry.model_spaces import DISK_PROFILE
from sde.engine import StepPlan, block_slices, euler_step, simulate_batch, simulate_path, strong_convergence_probe
from sde.entrance import simulate_absorption, simulate_entrance
from sde.noise import STREAM_BRIDGE, STREAM_X, STREAM_Y, NoiseBlock, NoiseStream, block_key
from sde.specs import chc2_spec, disk_spec, euclidean_spec, spec_for


def test_step_plan():
    plan = StepPlan(1e-2, 1.0)
    assert plan.n_steps == 100
    assert StepPlan(0.3, 1.0).n_steps == 4
    assert StepPlan(1e-3, 0.0).n_steps == 0
    assert plan.step_index(0.5) == 50
    np.testing.assert_array_equal(plan.grid_indices([0.0, 0.25, 1.0]), [0, 25, 100])
    with pytest.raises(PreconditionError):
        StepPlan(2.0, 1.0)
    with pytest.raises(PreconditionError):
        StepPlan(0.0, 1.0)
    with pytest.raises(PreconditionError):
        plan.step_index(1.5)


def test_block_key_layout():
    assert block_key(7, 0, STREAM_X) == 7
    assert block_key(7, 2, STREAM_Y) == ((2 * 16 + 1) << 64) | 7
    with pytest.raises(PreconditionError):
        block_key(2 ** 64, 0)
    with pytest.raises(PreconditionError):
        block_key(1, 0, 16)


def test_block_slices():
    assert block_slices(1) == [(0, 0, 1)]
    assert block_slices(config.BLOCK_PATHS + 3) == [(0, 0, config.BLOCK_PATHS),
                                                    (1, config.BLOCK_PATHS, 3)]


def test_noise_does_not_depend_on_chunking(seed):
    whole = NoiseBlock(seed, 0, 2).normals(10)
    pieces = NoiseBlock(seed, 0, 2)
    chunked = np.concatenate([pieces.normals(4), pieces.normals(6)])
    np.testing.assert_array_equal(whole, chunked)
    assert pieces.counter == 10


def test_noise_stream_is_a_block_lane(seed):
    path_index = config.BLOCK_PATHS + 3
    stream = NoiseStream(seed, path_index, 2)
    np.testing.assert_array_equal(stream.normals(5), NoiseBlock(seed, 1, 2).normals(5)[:, 3, :])
    assert stream.lane == 3


def test_streams_are_distinct(seed):
    x = NoiseBlock(seed, 0, 1, STREAM_X).uniforms(3)
    y = NoiseBlock(seed, 0, 1, STREAM_Y).uniforms(3)
    bridge = NoiseBlock(seed, 0, 1, STREAM_BRIDGE).uniforms(3)
    assert not np.array_equal(x, y)
    assert not np.array_equal(x, bridge)
    assert np.all((x > 0) & (x < 1))


def test_euler_step_single_and_batch():
    spec = euclidean_spec(2, sigma=2.0, drift=[1.0, 0.0])
    new, exited = euler_step(spec, np.zeros(2), 0.25, np.array([1.0, -1.0]))
    np.testing.assert_allclose(new, [1.25, -1.0])
    assert exited is False
    batch, flags = euler_step(spec, np.zeros((3, 2)), 0.25, np.ones((3, 2)))
    assert batch.shape == (3, 2) and flags.shape == (3,)


def test_disk_step_leaving_the_domain_is_flagged():
    spec = disk_spec()
    new, exited = euler_step(spec, np.array([0.9, 0.0]), 1.0, np.array([20.0, 0.0]))
    assert exited
    assert np.linalg.norm(new) >= 1.0


def test_start_points_checked():
    with pytest.raises(PreconditionError):
        simulate_batch(disk_spec(), [1.0, 0.0], StepPlan(1e-2, 0.1), 4, 1)
    with pytest.raises(PreconditionError):
        simulate_batch(chc2_spec(), [0.1, 0.0], StepPlan(1e-2, 0.1), 4, 1)
    with pytest.raises(PreconditionError):
        simulate_batch(disk_spec(), [0.1, 0.0], StepPlan(1e-2, 0.1), 0, 1)


def test_spec_lookup():
    assert spec_for("disk").chart == "disk"
    assert spec_for("h2c").dim == 4
    assert spec_for("euclidean3").dim == 3
    assert spec_for("euclidean").dim == 1
    with pytest.raises(PreconditionError):
        spec_for("sphere")


def test_batch_independent_of_threads(seed, coarse_plan):
    n_paths = 2 * config.BLOCK_PATHS + 100
    one = simulate_batch(disk_spec(), [0.3, 0.0], coarse_plan, n_paths, seed, t_grid=[0.0, 0.5, 1.0])
    many = simulate_batch(disk_spec(), [0.3, 0.0], coarse_plan, n_paths, seed, t_grid=[0.0, 0.5, 1.0], threads=3)
    np.testing.assert_array_equal(one.terminal, many.terminal)
    np.testing.assert_array_equal(one.snapshots, many.snapshots)
    np.testing.assert_array_equal(one.exited, many.exited)


def test_batch_prefix_independent_of_path_count(seed, coarse_plan):
    small = simulate_batch(disk_spec(), [0.0, 0.2], coarse_plan, 300, seed)
    large = simulate_batch(disk_spec(), [0.0, 0.2], coarse_plan, config.BLOCK_PATHS + 50, seed)
    np.testing.assert_allclose(small.terminal, large.terminal[:300], rtol=0, atol=1e-13)


def test_single_path_matches_batch(seed, coarse_plan):
    batch = simulate_batch(disk_spec(), [0.3, 0.0], coarse_plan, 20, seed)
    summary = simulate_path(disk_spec(), [0.3, 0.0], coarse_plan, NoiseStream(seed, 7, 2), record_stride=10)
    np.testing.assert_allclose(summary.terminal, batch.terminal[7], rtol=0, atol=1e-13)
    assert not summary.exited
    assert summary.trajectory.shape == (11, 2)


def test_snapshots_start_at_x0(seed, coarse_plan):
    batch = simulate_batch(chc2_spec(), [0.1, 0.0, 0.0, 0.2], coarse_plan, 10, seed, t_grid=[0.0, 1.0])
    np.testing.assert_array_equal(batch.snapshots[:, 0], np.tile([0.1, 0.0, 0.0, 0.2], (10, 1)))
    np.testing.assert_array_equal(batch.snapshots[:, 1], batch.terminal)


def test_euclidean_brownian_moments(seed):
    sigma, t = 1.5, 1.0
    batch = simulate_batch(euclidean_spec(1, sigma=sigma), [0.5], StepPlan(0.1, t), 20000, seed)
    values = batch.terminal[:, 0]
    se_mean = sigma * math.sqrt(t / values.size)
    assert abs(values.mean() - 0.5) < 5 * se_mean
    variance = sigma * sigma * t
    assert abs(values.var() - variance) < 5 * variance * math.sqrt(2.0 / values.size)


def test_disk_martingale(seed):
    # holomorphic functions of disk Brownian motion are martingales
    x0 = np.array([0.3, 0.2])
    batch = simulate_batch(disk_spec(), x0, StepPlan(1e-2, 1.0), 20000, seed)
    z = batch.terminal[:, 0] + 1j * batch.terminal[:, 1]
    for f in (lambda w: w, lambda w: w * w):
        values = f(z)
        target = f(complex(*x0))
        se = math.sqrt(np.var(values.real) / values.size)
        assert abs(values.mean().real - target.real) < 5 * se + 1e-3


def test_strong_convergence_probe(seed):
    table = strong_convergence_probe(disk_spec(), [0.3, 0.0], [0.04, 0.02, 0.01], 1.0, 2000, seed)
    assert table.reference_dt == pytest.approx(0.0025)
    errors = [row.strong_error for row in table.rows]
    assert errors[0] > errors[1] > errors[2] > 0
    assert 0.3 < table.fitted_order() < 1.5


def test_convergence_probe_rejects_bad_grids(seed):
    with pytest.raises(PreconditionError):
        strong_convergence_probe(disk_spec(), [0.3, 0.0], [0.03, 0.02], 1.2, 10, seed)
    with pytest.raises(PreconditionError):
        strong_convergence_probe(disk_spec(), [0.3, 0.0], [0.01, 0.02], 1.0, 10, seed)


def test_bessel_three_second_moment(seed):
    plan = StepPlan(2.5e-3, 1.0)
    batch = simulate_entrance(bessel_diffusion(3.0), plan, 20000, seed, t_grid=[0.5, 1.0])
    assert batch.snapshots.shape == (20000, 2)
    squares = batch.snapshots ** 2
    for column, t in enumerate((0.5, 1.0)):
        se = math.sqrt(6.0) * t / math.sqrt(squares.shape[0])
        assert abs(squares[:, column].mean() - 3.0 * t) < 5 * se + 0.02
    assert np.all(batch.terminal >= 0)


def test_entrance_needs_entrance_boundary(seed):
    with pytest.raises(PreconditionError):
        simulate_entrance(constant_drift_diffusion(1.0, 2.0, 0.5), StepPlan(1e-2, 1.0), 10, seed)
    # the one-point comparison process of a Kähler profile starts at 0
    batch = simulate_entrance(eta_comparison(DISK_PROFILE), StepPlan(1e-2, 0.5), 50, seed)
    assert np.all(np.isfinite(batch.terminal)) and np.all(batch.terminal >= 0)


def test_absorption_matches_scale_function(seed):
    process = constant_drift_diffusion(1.0, 2.0, 0.5)
    batch = simulate_absorption(process, StepPlan(1e-2, 20.0), 10000, seed)
    p = math.exp(-0.5)
    observed = batch.n_absorbed / 10000
    assert abs(observed - p) < 4 * math.sqrt(p * (1 - p) / 10000) + 0.005
    assert batch.bridge_corrected


def test_bridge_only_adds_absorptions(seed):
    process = constant_drift_diffusion(1.0, 2.0, 0.5)
    plan = StepPlan(5e-2, 5.0)
    with_bridge = simulate_absorption(process, plan, 2000, seed, bridge=True)
    without = simulate_absorption(process, plan, 2000, seed, bridge=False)
    assert without.n_absorbed <= with_bridge.n_absorbed
    absorbed = np.isfinite(without.absorption_time)
    assert np.all(with_bridge.absorption_time[absorbed] <= without.absorption_time[absorbed])


def test_absorption_from_zero(seed):
    batch = simulate_absorption(constant_drift_diffusion(1.0, 2.0, 0.0), StepPlan(1e-2, 1.0), 8, seed)
    np.testing.assert_array_equal(batch.absorption_time, 0.0)
    assert batch.n_absorbed == 8
