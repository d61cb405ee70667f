"""
Euler-Maruyama stepping of dX = A(X) dB + Z(X) dt in chart coordinates.

States are handled in batches of shape (N, dim). Paths that leave the
domain are frozen at their last in-domain state and reported as DomainExit
records; they are never clamped back.
"""

import enum
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from errors import PreconditionError

from .noise import STREAM_X, NoiseBlock, NoiseStream

logger = logging.getLogger("sde_engine")


class Scheme(enum.Enum):
    EULER_MARUYAMA = "euler_maruyama"


@dataclass(frozen=True)
class DiffusionSpec:
    """One simulable process.

    diffusion: (N, dim) -> (N, dim, dim); drift: (N, dim) -> (N, dim);
    in_domain: (N, dim) -> (N,) bool; distance: (N, dim), (N, dim) -> (N,).
    ``chart`` names the geometry the mirror coupling looks up.
    """
    dim: int
    diffusion: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    drift: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    in_domain: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    distance: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(compare=False)
    name: str = "diffusion"
    chart: str = "euclidean"
    drift_bound: float = 0.0
    constant_diffusion: bool = False

    def check_start(self, x0) -> np.ndarray:
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.shape != (self.dim,):
            raise PreconditionError(f"{self.name} needs a start point of dimension {self.dim}, got {x0.shape}")
        if not bool(self.in_domain(x0[None, :])[0]):
            raise PreconditionError(f"start point {x0} lies outside the domain of {self.name}")
        return x0


@dataclass(frozen=True)
class StepPlan:
    """Uniform time grid 0, dt, 2 dt, ... covering [0, t_max].

    t_max = 0 means no steps. When t_max is not a multiple of dt the last
    grid time is the first one at or beyond t_max.
    """
    dt: float
    t_max: float
    scheme: Scheme = Scheme.EULER_MARUYAMA

    def __post_init__(self):
        if isinstance(self.scheme, str):
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise PreconditionError(f"dt must be positive, got {self.dt}")
        if not self.t_max >= 0:
            raise PreconditionError(f"t_max must be nonnegative, got {self.t_max}")
        if self.t_max > 0 and self.dt > self.t_max:
            raise PreconditionError(f"dt = {self.dt} exceeds t_max = {self.t_max}")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_max / self.dt - 1e-9)) if self.t_max > 0 else 0

    def step_index(self, t: float) -> int:
        """Grid index whose time is nearest to t; t must lie within the horizon."""
        if t < 0 or t > self.t_max * (1 + 1e-12):
            raise PreconditionError(f"time {t} lies outside [0, {self.t_max}]")
        return min(int(round(t / self.dt)), self.n_steps)

    def grid_indices(self, t_grid: Sequence[float]) -> np.ndarray:
        return np.array([self.step_index(float(t)) for t in t_grid], dtype=int)


@dataclass(frozen=True)
class DomainExit:
    """A discretized path left the domain; ``state`` is the last in-domain state."""
    path_index: int
    time: float
    state: Tuple[float, ...]


def euler_step(spec: DiffusionSpec, x: np.ndarray, dt: float, xi: np.ndarray):
    """x + A(x) sqrt(dt) xi + Z(x) dt, with the post-step domain flag.

    Works on a single state (dim,) or a batch (N, dim). Returns (new_state,
    exited); exited is a bool or an (N,) bool array.
    """
    single = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    step = np.einsum("nij,nj->ni", spec.diffusion(x), xi) * math.sqrt(dt) + spec.drift(x) * dt
    new = x + step
    exited = ~np.asarray(spec.in_domain(new), dtype=bool)
    if single:
        return new[0], bool(exited[0])
    return new, exited


@dataclass
class PathSummary:
    terminal: np.ndarray
    exited: bool
    exit: Optional[DomainExit]
    trajectory: Optional[np.ndarray] = None


@dataclass
class PathBatch:
    """Batch output in path-index order. exit_time is NaN for paths that stayed in."""
    terminal: np.ndarray
    exited: np.ndarray
    exit_time: np.ndarray
    snapshots: Optional[np.ndarray] = None  # (N, len(t_grid), dim)
    t_grid: Optional[np.ndarray] = None
    elapsed: float = 0.0

    @property
    def n_paths(self) -> int:
        return self.terminal.shape[0]

    @property
    def n_exits(self) -> int:
        return int(self.exited.sum())

    def domain_exits(self) -> List[DomainExit]:
        return [
            DomainExit(int(i), float(self.exit_time[i]), tuple(self.terminal[i]))
            for i in np.flatnonzero(self.exited)
        ]


def block_slices(n_paths: int) -> List[Tuple[int, int, int]]:
    """(block_index, first_path, lane_count) for every block touched by n_paths paths."""
    width = config.BLOCK_PATHS
    return [(b, b * width, min(width, n_paths - b * width)) for b in range((n_paths + width - 1) // width)]


def map_blocks(run_block: Callable[[int, int, int], Dict[str, np.ndarray]], n_paths: int,
               threads: int = 1) -> Dict[str, np.ndarray]:
    """Run ``run_block`` on every block and concatenate its arrays in block order.

    Results do not depend on ``threads``: blocks are independent and their
    outputs are joined by block index, not by completion order.
    """
    slices = block_slices(n_paths)
    if threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: run_block(*s), slices))
    else:
        parts = [run_block(*s) for s in slices]
    if not parts:
        return {}
    return {key: np.concatenate([part[key] for part in parts], axis=0) for key in parts[0]}


def step_chunks(n_steps: int):
    done = 0
    while done < n_steps:
        size = min(config.CHUNK_STEPS, n_steps - done)
        yield done, size
        done += size


def simulate_batch(spec: DiffusionSpec, x0, plan: StepPlan, n_paths: int, seed: int,
                   t_grid: Optional[Sequence[float]] = None, threads: int = 1,
                   stream: int = STREAM_X) -> PathBatch:
    """Simulate paths 0..n_paths-1 from a common start point."""
    x0 = spec.check_start(x0)
    if n_paths < 1:
        raise PreconditionError(f"n_paths must be positive, got {n_paths}")
    record = plan.grid_indices(t_grid) if t_grid is not None else np.zeros(0, dtype=int)
    started = time.perf_counter()

    def run_block(block_index: int, first: int, lanes: int):
        noise = NoiseBlock(seed, block_index, spec.dim, stream)
        state = np.tile(x0, (lanes, 1))
        alive = np.ones(lanes, dtype=bool)
        exit_time = np.full(lanes, np.nan)
        snapshots = np.empty((lanes, record.size, spec.dim))
        snapshots[:, record == 0] = state[:, None, :]
        for start, size in step_chunks(plan.n_steps):
            xi = noise.normals(size)[:, :lanes]
            for j in range(size):
                step = start + j + 1
                idx = np.flatnonzero(alive)
                if idx.size:
                    new, exited = euler_step(spec, state[idx], plan.dt, xi[j, idx])
                    state[idx[~exited]] = new[~exited]
                    exit_time[idx[exited]] = step * plan.dt
                    alive[idx[exited]] = False
                hit = record == step
                if hit.any():
                    snapshots[:, hit] = state[:, None, :]
        logger.debug(f"{spec.name}: block {block_index} done, {int((~alive).sum())} exits")
        return {"terminal": state, "exited": ~alive, "exit_time": exit_time, "snapshots": snapshots}

    logger.info(f"Simulating {n_paths} paths of {spec.name} for {plan.n_steps} steps (dt={plan.dt})")
    out = map_blocks(run_block, n_paths, threads)
    batch = PathBatch(out["terminal"], out["exited"], out["exit_time"],
                      out["snapshots"] if t_grid is not None else None,
                      np.asarray(t_grid, dtype=float) if t_grid is not None else None,
                      time.perf_counter() - started)
    if batch.n_exits:
        logger.warning(f"{spec.name}: {batch.n_exits} of {n_paths} paths left the domain under discretization")
    return batch


def simulate_path(spec: DiffusionSpec, x0, plan: StepPlan, noise: NoiseStream,
                  record_stride: Optional[int] = None) -> PathSummary:
    """Single-path stepping; the trajectory is kept every ``record_stride`` steps when asked."""
    state = spec.check_start(x0).copy()
    trajectory = [state.copy()] if record_stride else None
    for start, size in step_chunks(plan.n_steps):
        xi = noise.normals(size)
        for j in range(size):
            step = start + j + 1
            new, exited = euler_step(spec, state, plan.dt, xi[j])
            if exited:
                exit_record = DomainExit(noise.path_index, step * plan.dt, tuple(state))
                logger.warning(f"{spec.name}: path {noise.path_index} left the domain at t={step * plan.dt:.6g}")
                return PathSummary(state, True, exit_record, np.array(trajectory) if trajectory else None)
            state = new
            if record_stride and step % record_stride == 0:
                trajectory.append(state.copy())
    return PathSummary(state, False, None, np.array(trajectory) if trajectory else None)


@dataclass
class ConvergenceRow:
    dt: float
    strong_error: float


@dataclass
class ConvergenceTable:
    reference_dt: float
    rows: List[ConvergenceRow]

    def fitted_order(self) -> float:
        """Least-squares slope of log(error) against log(dt); NaN if any error is zero."""
        dts = np.array([row.dt for row in self.rows])
        errors = np.array([row.strong_error for row in self.rows])
        if np.any(errors <= 0) or len(self.rows) < 2:
            return float("nan")
        slope, _ = np.polyfit(np.log(dts), np.log(errors), 1)
        return float(slope)


def _dyadic_factor(dt: float, reference_dt: float) -> int:
    ratio = dt / reference_dt
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9 * ratio or factor & (factor - 1):
        raise PreconditionError(f"dt = {dt} is not a dyadic multiple of the reference step {reference_dt}")
    return factor


def strong_convergence_probe(spec: DiffusionSpec, x0, dt_list: Sequence[float], t_max: float,
                             n_paths: int, seed: int, threads: int = 1) -> ConvergenceTable:
    """Strong error E|X_T(dt) - X_T(dt_ref)| for each dt against a reference at min(dt) / 4.

    All resolutions are driven by the same Brownian path: the coarse increments
    are sums of reference increments. Paths that leave the domain at any
    resolution are dropped from the error average.
    """
    dt_list = [float(dt) for dt in dt_list]
    if any(b >= a for a, b in zip(dt_list, dt_list[1:])):
        raise PreconditionError("dt_list must be strictly descending")
    x0 = spec.check_start(x0)
    reference_dt = dt_list[-1] / 4.0
    factors = [_dyadic_factor(dt, reference_dt) for dt in dt_list] + [1]
    coarsest = factors[0]
    n_fine = int(round(t_max / reference_dt))
    if n_fine % coarsest:
        raise PreconditionError(f"t_max = {t_max} is not a multiple of the coarsest dt {dt_list[0]}")

    def run_block(block_index: int, first: int, lanes: int):
        noise = NoiseBlock(seed, block_index, spec.dim, STREAM_X)
        states = [np.tile(x0, (lanes, 1)) for _ in factors]
        alive = np.ones(lanes, dtype=bool)
        pending = [np.zeros((lanes, spec.dim)) for _ in factors]
        for start, size in step_chunks(n_fine):
            xi = noise.normals(size)[:, :lanes]
            for j in range(size):
                fine_step = start + j + 1
                for level, factor in enumerate(factors):
                    pending[level] += xi[j]
                    if fine_step % factor:
                        continue
                    dt = reference_dt * factor
                    idx = np.flatnonzero(alive)
                    if idx.size:
                        new, exited = euler_step(spec, states[level][idx], dt, pending[level][idx] / math.sqrt(factor))
                        states[level][idx] = new
                        alive[idx[exited]] = False
                    pending[level][:] = 0.0
        return {"states": np.stack(states, axis=1), "alive": alive}

    logger.info(f"Strong convergence probe on {spec.name}: dt in {dt_list}, reference {reference_dt:g}")
    out = map_blocks(run_block, n_paths, threads)
    alive = out["alive"]
    if not alive.all():
        logger.warning(f"{spec.name}: {int((~alive).sum())} paths left the domain during the convergence probe")
    finals = out["states"][alive]
    reference = finals[:, -1]
    rows = [
        ConvergenceRow(dt, float(np.mean(np.linalg.norm(finals[:, level] - reference, axis=-1))))
        for level, dt in enumerate(dt_list)
    ]
    return ConvergenceTable(reference_dt, rows)
