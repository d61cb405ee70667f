"""
Simulation of radial comparison processes: an entrance boundary at 0 for the
one-point process, absorption at 0 for the constant-drift distance process.

Near 0 the drift behaves like (delta - 1) sigma2 / (2r) and Euler stepping
is unusable, so while r < r_switch the step is the exact Bessel-type update

    r' = sqrt((r + sigma sqrt(dt) xi)^2 + sigma2 dt chi2_{delta-1})

after which drift-included Euler takes over.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import chi2

import config
from comparison.radial import ComparisonDiffusion1D
from errors import PreconditionError

from .engine import StepPlan, step_chunks, map_blocks
from .noise import STREAM_BRIDGE, STREAM_RADIAL, STREAM_X, NoiseBlock

logger = logging.getLogger("sde_engine")


@dataclass
class EntranceBatch:
    terminal: np.ndarray
    snapshots: np.ndarray  # (N, len(t_grid))
    t_grid: np.ndarray
    r_switch: float
    elapsed: float = 0.0


def simulate_entrance(diffusion: ComparisonDiffusion1D, plan: StepPlan, n_paths: int, seed: int,
                      t_grid: Optional[Sequence[float]] = None, threads: int = 1) -> EntranceBatch:
    if diffusion.entrance_dimension is None:
        raise PreconditionError(f"{diffusion.name} has no entrance boundary at 0")
    if n_paths < 1:
        raise PreconditionError(f"n_paths must be positive, got {n_paths}")
    t_grid = np.asarray([plan.t_max] if t_grid is None else t_grid, dtype=float)
    record = plan.grid_indices(t_grid)
    extra_df = diffusion.entrance_dimension - 1.0
    sigma = diffusion.sigma
    root_dt = math.sqrt(plan.dt)
    r_switch = config.ENTRANCE_SWITCH_FACTOR * math.sqrt(diffusion.sigma2 * plan.dt)
    started = time.perf_counter()

    def run_block(block_index: int, first: int, lanes: int):
        normals = NoiseBlock(seed, block_index, 1, STREAM_X)
        uniforms = NoiseBlock(seed, block_index, 1, STREAM_RADIAL)
        r = np.full(lanes, float(diffusion.r0))
        snapshots = np.empty((lanes, record.size))
        snapshots[:, record == 0] = r[:, None]
        for start, size in step_chunks(plan.n_steps):
            xi = normals.normals(size)[:, :lanes, 0]
            u = uniforms.uniforms(size)[:, :lanes, 0]
            for j in range(size):
                near = r < r_switch
                moved = r + sigma * root_dt * xi[j]
                if near.any():
                    extra = chi2.ppf(u[j, near], extra_df) if extra_df > 0 else 0.0
                    moved[near] = np.sqrt(moved[near] ** 2 + diffusion.sigma2 * plan.dt * extra)
                far = ~near
                if far.any():
                    moved[far] += diffusion.drift(r[far]) * plan.dt
                    # an Euler overshoot below 0 from r >= r_switch is a 10-sigma event
                    moved[far] = np.abs(moved[far])
                r = moved
                hit = record == start + j + 1
                if hit.any():
                    snapshots[:, hit] = r[:, None]
        return {"terminal": r, "snapshots": snapshots}

    logger.info(f"Entrance simulation of {diffusion.name}: {n_paths} paths, dimension "
                f"{diffusion.entrance_dimension:g}, r_switch={r_switch:.4g}")
    out = map_blocks(run_block, n_paths, threads)
    return EntranceBatch(out["terminal"], out["snapshots"], t_grid, r_switch, time.perf_counter() - started)


@dataclass
class AbsorptionBatch:
    """Absorption times at 0 (+inf if not absorbed by t_max) and the last positions."""
    absorption_time: np.ndarray
    terminal: np.ndarray
    bridge_corrected: bool
    elapsed: float = 0.0

    @property
    def n_absorbed(self) -> int:
        return int(np.isfinite(self.absorption_time).sum())


def simulate_absorption(diffusion: ComparisonDiffusion1D, plan: StepPlan, n_paths: int, seed: int,
                        threads: int = 1, bridge: bool = True) -> AbsorptionBatch:
    """Constant-drift diffusion dr = sigma dW + b dt killed at 0.

    Euler is exact for constant coefficients, so a whole chunk of steps is a
    cumulative sum. With ``bridge`` a step between two positive endpoints is
    also killed with the Brownian-bridge crossing probability
    exp(-2 r r' / (sigma2 dt)), which removes the discrete-monitoring bias.
    """
    if diffusion.drift_constant is None:
        raise PreconditionError(f"{diffusion.name} does not have a constant drift")
    if n_paths < 1:
        raise PreconditionError(f"n_paths must be positive, got {n_paths}")
    b = diffusion.drift_constant
    increment_scale = diffusion.sigma * math.sqrt(plan.dt)
    bridge_scale = 2.0 / (diffusion.sigma2 * plan.dt)
    started = time.perf_counter()

    def run_block(block_index: int, first: int, lanes: int):
        normals = NoiseBlock(seed, block_index, 1, STREAM_X)
        kills = NoiseBlock(seed, block_index, 1, STREAM_BRIDGE) if bridge else None
        r = np.full(lanes, float(diffusion.r0))
        tau = np.full(lanes, np.inf)
        alive = np.full(lanes, diffusion.r0 > 0)
        tau[~alive] = 0.0
        for start, size in step_chunks(plan.n_steps):
            if not alive.any():
                break
            xi = normals.normals(size)[:, :lanes, 0]
            path = r[None, :] + np.cumsum(increment_scale * xi + b * plan.dt, axis=0)
            hit = path <= 0.0
            if kills is not None:
                u = kills.uniforms(size)[:, :lanes, 0]
                previous = np.vstack([r[None, :], path[:-1]])
                with np.errstate(over="ignore", under="ignore"):
                    crossing = np.exp(-bridge_scale * np.maximum(previous, 0.0) * np.maximum(path, 0.0))
                hit |= u < crossing
            absorbed = alive & hit.any(axis=0)
            tau[absorbed] = (start + np.argmax(hit[:, absorbed], axis=0) + 1) * plan.dt
            alive &= ~absorbed
            r = np.where(alive, path[-1], r)
        return {"absorption_time": tau, "terminal": r}

    logger.info(f"Absorption run of {diffusion.name}: {n_paths} paths, {plan.n_steps} steps, "
                f"bridge correction {'on' if bridge else 'off'}")
    out = map_blocks(run_block, n_paths, threads)
    return AbsorptionBatch(out["absorption_time"], out["terminal"], bridge, time.perf_counter() - started)
