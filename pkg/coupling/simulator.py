"""
Coupled simulation with coupling-time detection.

Both marginals are stepped with Euler-Maruyama on the same grid. The pair
is declared coupled the first time spec.distance(X, Y) <= eps_couple, or,
under the mirror coupling, the first step in which the reflected separation
reached zero (sign change, or a Brownian-bridge draw on the bridge stream).
From then on Y is overwritten with X after every step, so the recorded paths are
bitwise identical. A pair whose marginal leaves the domain is frozen and
counted as not coupled.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

import config
from errors import PreconditionError
from sde.engine import DiffusionSpec, StepPlan, euler_step, map_blocks, step_chunks
from sde.noise import STREAM_BRIDGE, STREAM_X, STREAM_Y, NoiseBlock, block_of, lane_of

from .strategies import CouplingStrategy, correlation_matrix, couple_noise

logger = logging.getLogger("coupling_lab")


def default_eps(spec: DiffusionSpec) -> float:
    if spec.chart == "h2c":
        return config.EPS_COUPLE_H2C
    return config.EPS_COUPLE_DISK


@dataclass(frozen=True)
class CoupledOutcome:
    coupled: bool
    coupling_time: Optional[float]
    exited_x: bool
    exit_time_x: Optional[float]
    exited_y: bool
    exit_time_y: Optional[float]
    terminal_x: np.ndarray
    terminal_y: np.ndarray


@dataclass
class BallTracking:
    """Exit of either marginal from the intrinsic ball B(center, radius)."""
    center: np.ndarray
    radius: float


@dataclass
class CoupledBatch:
    """Per-path arrays in path-index order.

    coupling_time is +inf for pairs that did not couple within the horizon;
    exit times are NaN when the marginal stayed in the domain and ball exit
    times are +inf when the ball was not left before coupling.
    """
    coupling_time: np.ndarray
    exit_time_x: np.ndarray
    exit_time_y: np.ndarray
    terminal_x: np.ndarray
    terminal_y: np.ndarray
    t_grid: np.ndarray
    snapshots_x: np.ndarray  # (N, len(t_grid), dim)
    snapshots_y: np.ndarray
    ball_exit_time: Optional[np.ndarray] = None
    t_max: float = 0.0
    elapsed: float = 0.0

    @property
    def n_paths(self) -> int:
        return self.coupling_time.shape[0]

    @property
    def n_domain_exits(self) -> int:
        return int(np.sum(~np.isnan(self.exit_time_x) | ~np.isnan(self.exit_time_y)))

    def uncoupled_at(self, t: float) -> np.ndarray:
        """Indicator of tau > t per path."""
        return self.coupling_time > t

    def outcome(self, i: int) -> CoupledOutcome:
        tau = float(self.coupling_time[i])
        tx, ty = float(self.exit_time_x[i]), float(self.exit_time_y[i])
        return CoupledOutcome(
            coupled=math.isfinite(tau),
            coupling_time=tau if math.isfinite(tau) else None,
            exited_x=not math.isnan(tx), exit_time_x=None if math.isnan(tx) else tx,
            exited_y=not math.isnan(ty), exit_time_y=None if math.isnan(ty) else ty,
            terminal_x=self.terminal_x[i].copy(), terminal_y=self.terminal_y[i].copy(),
        )


def _check_pair(spec: DiffusionSpec, x0, y0, eps_couple: float):
    x0, y0 = spec.check_start(x0), spec.check_start(y0)
    if not eps_couple > 0:
        raise PreconditionError(f"eps_couple must be positive, got {eps_couple}")
    return x0, y0


def _mirror_meeting(spec: DiffusionSpec, strategy: CouplingStrategy, x: np.ndarray, y: np.ndarray,
                    new_x: np.ndarray, new_y: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Whether a mirror-coupled pair met inside one Euler step.

    Along e = (y - x) / |y - x| the separation moves like a Brownian motion with
    rate v = |(A(y) R - A(x))^T e|^2. It met if its e-component changed sign,
    or otherwise with the bridge probability exp(-2 d d' / (v dt)).
    """
    before = y - x
    d = np.linalg.norm(before, axis=-1)
    e = before / d[:, None]
    d_after = np.einsum("ni,ni->n", new_y - new_x, e)
    m = np.einsum("nij,njk->nik", spec.diffusion(y), correlation_matrix(strategy, x, y)) - spec.diffusion(x)
    rate = np.sum(np.einsum("nij,ni->nj", m, e) ** 2, axis=-1)
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        bridge = np.exp(-2.0 * d * np.maximum(d_after, 0.0) / (rate * dt))
    return (d_after <= 0.0) | (u < np.nan_to_num(bridge, nan=0.0))


def _coupled_block_runner(spec: DiffusionSpec, strategy: CouplingStrategy, x0: np.ndarray, y0: np.ndarray,
                          plan: StepPlan, eps_couple: float, seed: int, record: np.ndarray,
                          ball: Optional[BallTracking]):
    # only the geodesic mirror map degenerates as the pair closes
    sync_distance = config.MIRROR_SYNC_FACTOR * eps_couple if spec.chart == "disk" else 0.0
    dim = spec.dim

    def run_lanes(block_index: int, lanes: np.ndarray):
        count = lanes.size
        noise_x = NoiseBlock(seed, block_index, dim, STREAM_X)
        noise_y = NoiseBlock(seed, block_index, dim, STREAM_Y) if strategy.needs_fresh_noise else None
        noise_bridge = NoiseBlock(seed, block_index, 1, STREAM_BRIDGE) if strategy.is_mirror else None
        x = np.tile(x0, (count, 1))
        y = np.tile(y0, (count, 1))
        tau = np.full(count, np.inf)
        exit_x = np.full(count, np.nan)
        exit_y = np.full(count, np.nan)
        frozen = np.zeros(count, dtype=bool)
        ball_exit = np.full(count, np.inf) if ball is not None else None

        initial = spec.distance(x, y) <= eps_couple
        tau[initial] = 0.0
        y[initial] = x[initial]
        coupled = initial.copy()
        if ball is not None:
            centers = np.tile(ball.center, (count, 1))

        snaps_x = np.empty((count, record.size, dim))
        snaps_y = np.empty((count, record.size, dim))
        snaps_x[:, record == 0] = x[:, None, :]
        snaps_y[:, record == 0] = y[:, None, :]

        for start, size in step_chunks(plan.n_steps):
            xi_all = noise_x.normals(size)[:, lanes]
            fresh_all = noise_y.normals(size)[:, lanes] if noise_y is not None else None
            u_all = noise_bridge.uniforms(size)[:, lanes, 0] if noise_bridge is not None else None
            for j in range(size):
                step = start + j + 1
                now = step * plan.dt
                idx = np.flatnonzero(~frozen)
                if idx.size:
                    xi = xi_all[j, idx]
                    new_x, out_x = euler_step(spec, x[idx], plan.dt, xi)

                    free = idx[~coupled[idx]]
                    pos = np.flatnonzero(~coupled[idx])
                    new_y = new_x.copy()
                    out_y = out_x.copy()
                    crossed = np.zeros(idx.size, dtype=bool)
                    if free.size:
                        xi_free = xi[pos]
                        fresh = fresh_all[j, free] if fresh_all is not None else None
                        if strategy.is_mirror:
                            # synchronous below MIRROR_SYNC_FACTOR * eps
                            xi_y = xi_free.copy()
                            apart = spec.distance(x[free], y[free]) > sync_distance
                            if apart.any():
                                xi_y[apart] = couple_noise(strategy, x[free][apart], y[free][apart], xi_free[apart])
                        else:
                            xi_y = couple_noise(strategy, x[free], y[free], xi_free, fresh)
                        stepped_y, exited_y = euler_step(spec, y[free], plan.dt, xi_y)
                        if strategy.is_mirror and apart.any():
                            mirrored = pos[apart]
                            crossed[mirrored] = _mirror_meeting(
                                spec, strategy, x[free][apart], y[free][apart], new_x[mirrored],
                                stepped_y[apart], u_all[j, free[apart]], plan.dt)
                        new_y[pos] = stepped_y
                        out_y[pos] = exited_y

                    stop = out_x | out_y
                    exit_x[idx[out_x]] = now
                    exit_y[idx[out_y]] = now
                    frozen[idx[stop]] = True
                    keep = idx[~stop]
                    crossed_lane = np.zeros(count, dtype=bool)
                    crossed_lane[idx[crossed & ~stop]] = True
                    x[keep] = new_x[~stop]
                    y[keep] = new_y[~stop]

                    newly = keep[~coupled[keep]]
                    if newly.size:
                        if ball_exit is not None:
                            left = (spec.distance(x[newly], centers[newly]) >= ball.radius) | \
                                   (spec.distance(y[newly], centers[newly]) >= ball.radius)
                            first = newly[left & np.isinf(ball_exit[newly])]
                            ball_exit[first] = now
                        met = newly[(spec.distance(x[newly], y[newly]) <= eps_couple) | crossed_lane[newly]]
                        tau[met] = now
                        coupled[met] = True
                    # sticking: after coalescence Y is X
                    stuck = keep[coupled[keep]]
                    y[stuck] = x[stuck]

                hit = record == step
                if hit.any():
                    snaps_x[:, hit] = x[:, None, :]
                    snaps_y[:, hit] = y[:, None, :]

        out = {"coupling_time": tau, "exit_time_x": exit_x, "exit_time_y": exit_y,
               "terminal_x": x, "terminal_y": y, "snapshots_x": snaps_x, "snapshots_y": snaps_y}
        if ball_exit is not None:
            out["ball_exit_time"] = ball_exit
        return out

    return run_lanes


def simulate_coupled_batch(spec: DiffusionSpec, strategy: CouplingStrategy, x0, y0, plan: StepPlan,
                           eps_couple: float, n_paths: int, seed: int,
                           t_grid: Optional[Sequence[float]] = None, threads: int = 1,
                           ball: Optional[BallTracking] = None) -> CoupledBatch:
    x0, y0 = _check_pair(spec, x0, y0, eps_couple)
    if n_paths < 1:
        raise PreconditionError(f"n_paths must be positive, got {n_paths}")
    t_grid = np.asarray([] if t_grid is None else t_grid, dtype=float)
    record = plan.grid_indices(t_grid)
    run_lanes = _coupled_block_runner(spec, strategy, x0, y0, plan, eps_couple, seed, record, ball)
    started = time.perf_counter()
    logger.info(f"Coupled run on {spec.name}: {strategy.kind.value}, {n_paths} paths, "
                f"{plan.n_steps} steps, eps={eps_couple:g}")
    out = map_blocks(lambda b, first, lanes: run_lanes(b, np.arange(lanes)), n_paths, threads)
    batch = CoupledBatch(
        out["coupling_time"], out["exit_time_x"], out["exit_time_y"], out["terminal_x"], out["terminal_y"],
        t_grid, out["snapshots_x"], out["snapshots_y"], out.get("ball_exit_time"), plan.t_max,
        time.perf_counter() - started,
    )
    if batch.n_domain_exits:
        logger.warning(f"{spec.name}: {batch.n_domain_exits} of {n_paths} pairs left the domain under discretization")
    logger.info(f"Coupled run finished in {batch.elapsed:.2f}s, "
                f"{int(np.isfinite(batch.coupling_time).sum())} of {n_paths} pairs coupled")
    return batch


def simulate_coupled(spec: DiffusionSpec, strategy: CouplingStrategy, x0, y0, plan: StepPlan,
                     eps_couple: float, seed: int = config.DEFAULT_SEED, path_index: int = 0) -> CoupledOutcome:
    """One coupled pair, driven by the noise of path ``path_index``.

    The outcome matches entry ``path_index`` of simulate_coupled_batch with the
    same seed.
    """
    x0, y0 = _check_pair(spec, x0, y0, eps_couple)
    run_lanes = _coupled_block_runner(spec, strategy, x0, y0, plan, eps_couple, seed,
                                      np.zeros(0, dtype=int), None)
    out = run_lanes(block_of(path_index), np.array([lane_of(path_index)]))
    single = CoupledBatch(out["coupling_time"], out["exit_time_x"], out["exit_time_y"],
                          out["terminal_x"], out["terminal_y"], np.zeros(0),
                          out["snapshots_x"], out["snapshots_y"], t_max=plan.t_max)
    return single.outcome(0)
