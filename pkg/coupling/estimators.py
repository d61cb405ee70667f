"""
Monte Carlo estimators on top of the coupled simulator.

Count data (survival, exit events, absorption) carry Wilson score intervals;
sample means carry normal intervals from the standard error.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import energy_distance

import config
from comparison.radial import ComparisonDiffusion1D
from errors import PreconditionError
from sde.engine import DiffusionSpec, StepPlan, simulate_batch
from sde.entrance import simulate_absorption
from sde.specs import radial_spec

from .simulator import BallTracking, CoupledBatch, simulate_coupled_batch
from .strategies import CouplingKind, CouplingStrategy, cross_covariance

logger = logging.getLogger("coupling_lab")

StateFunctional = Callable[[np.ndarray], np.ndarray]

EXACT_ENERGY_LIMIT = 4000  # pooled size above which the sliced statistic is used
SLICE_DIRECTIONS = 16


def wilson_interval(k: int, n: int, z: float = config.WILSON_Z) -> Tuple[float, float]:
    """Wilson score interval for k successes out of n."""
    if n <= 0:
        raise PreconditionError(f"n must be positive, got {n}")
    if not 0 <= k <= n:
        raise PreconditionError(f"k must lie in [0, n], got k={k}, n={n}")
    if not z > 0:
        raise PreconditionError(f"z must be positive, got {z}")
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    lo = max(0.0, min(center - half, p))
    hi = min(1.0, max(center + half, p))
    return lo, hi


@dataclass(frozen=True)
class BatchEstimate:
    n: int
    point: float
    se: float
    lo: float
    hi: float
    k: Optional[int] = None

    @property
    def interval(self) -> Tuple[float, float]:
        return self.lo, self.hi


def count_estimate(k: int, n: int, z: float = config.WILSON_Z) -> BatchEstimate:
    p = k / n if n else float("nan")
    lo, hi = wilson_interval(k, n, z)
    return BatchEstimate(n, p, math.sqrt(p * (1.0 - p) / n), lo, hi, int(k))


def mean_estimate(values: np.ndarray, z: float = config.WILSON_Z) -> BatchEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        raise PreconditionError("mean of an empty sample")
    point = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return BatchEstimate(n, point, se, point - z * se, point + z * se)


@dataclass(frozen=True)
class ExpectationEstimate:
    """Mean of a possibly complex functional, split into real and imaginary parts."""
    real: BatchEstimate
    imag: BatchEstimate

    @property
    def value(self) -> complex:
        return complex(self.real.point, self.imag.point)

    @property
    def modulus(self) -> float:
        return abs(self.value)

    @property
    def modulus_se(self) -> float:
        """Delta-method standard error of |mean|; the larger part se at mean 0."""
        m = self.modulus
        if m == 0:
            return max(self.real.se, self.imag.se)
        return math.hypot(self.real.point * self.real.se, self.imag.point * self.imag.se) / m

    @classmethod
    def of(cls, values: np.ndarray) -> "ExpectationEstimate":
        values = np.asarray(values)
        return cls(mean_estimate(np.real(values)), mean_estimate(np.imag(values)))


@dataclass
class SurvivalCurve:
    t_grid: np.ndarray
    estimates: List[BatchEstimate]
    batch: Optional[CoupledBatch] = field(default=None, repr=False)

    @property
    def points(self) -> np.ndarray:
        return np.array([e.point for e in self.estimates])


def survival_from_times(times: np.ndarray, t_grid: Sequence[float]) -> List[BatchEstimate]:
    """P(tau > t) per grid time from per-path hitting times (+inf for never)."""
    n = times.shape[0]
    return [count_estimate(int(np.sum(times > t)), n) for t in t_grid]


def estimate_survival(spec: DiffusionSpec, strategy: CouplingStrategy, x0, y0, plan: StepPlan,
                      eps_couple: float, t_grid: Sequence[float], n_paths: int, seed: int,
                      threads: int = 1) -> SurvivalCurve:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size and t_grid.max() > plan.t_max * (1 + 1e-12):
        raise PreconditionError(f"t_grid reaches beyond t_max = {plan.t_max}")
    batch = simulate_coupled_batch(spec, strategy, x0, y0, plan, eps_couple, n_paths, seed, threads=threads)
    return SurvivalCurve(t_grid, survival_from_times(batch.coupling_time, t_grid), batch)


def absorption_times(process: ComparisonDiffusion1D, plan: StepPlan, n_paths: int, seed: int,
                     threads: int = 1, bridge: bool = True) -> np.ndarray:
    """Per-path absorption times at 0 of a 1-D comparison diffusion, +inf if not absorbed.

    Constant-drift processes use the bridge-corrected simulator unless
    ``bridge`` is off; anything else is plain Euler on the radial spec,
    monitored at grid times only.
    """
    if bridge and process.drift_constant is not None:
        return simulate_absorption(process, plan, n_paths, seed, threads).absorption_time
    batch = simulate_batch(radial_spec(process), [process.r0], plan, n_paths, seed, threads=threads)
    return np.where(batch.exited, batch.exit_time, np.inf)


def estimate_absorption_survival(process: ComparisonDiffusion1D, plan: StepPlan, t_grid: Sequence[float],
                                 n_paths: int, seed: int, threads: int = 1, bridge: bool = True) -> SurvivalCurve:
    times = absorption_times(process, plan, n_paths, seed, threads, bridge)
    return SurvivalCurve(np.asarray(t_grid, dtype=float), survival_from_times(times, t_grid))


def estimate_exit_event(spec: DiffusionSpec, strategy: CouplingStrategy, x0, y0, center, delta: float,
                        plan: StepPlan, eps_couple: float, n_paths: int, seed: int,
                        threads: int = 1) -> BatchEstimate:
    """P(tau > first exit of either marginal from B(center, 2 delta)), capped at t_max."""
    center = spec.check_start(center)
    if not delta > 0:
        raise PreconditionError(f"delta must be positive, got {delta}")
    starts = np.vstack([spec.check_start(x0), spec.check_start(y0)])
    if np.any(spec.distance(starts, np.tile(center, (2, 1))) >= delta):
        raise PreconditionError(f"start points must lie in the ball of radius {delta} about {center}")
    ball = BallTracking(center, 2.0 * delta)
    batch = simulate_coupled_batch(spec, strategy, x0, y0, plan, eps_couple, n_paths, seed,
                                   threads=threads, ball=ball)
    event = batch.coupling_time > np.minimum(batch.ball_exit_time, plan.t_max)
    return count_estimate(int(event.sum()), n_paths)


@dataclass(frozen=True)
class ExpectationReport:
    """E[(f(X_t) - f(Y_t)) 1(tau > t)] and E[f(X_t) - f(Y_t)] at one time."""
    t: float
    weighted: ExpectationEstimate
    unweighted: ExpectationEstimate


def expectations_from_batch(batch: CoupledBatch, f: StateFunctional) -> List[ExpectationReport]:
    """Both expectations at every recorded grid time of ``batch``."""
    reports = []
    for i, t in enumerate(batch.t_grid):
        diff = np.asarray(f(batch.snapshots_x[:, i])) - np.asarray(f(batch.snapshots_y[:, i]))
        weighted = diff * batch.uncoupled_at(t)
        gap = np.max(np.abs(weighted - diff)) if diff.size else 0.0
        if gap > 1e-15:
            logger.error(f"indicator-weighted and plain differences disagree by {gap:.3e} at t={t}")
        reports.append(ExpectationReport(float(t), ExpectationEstimate.of(weighted), ExpectationEstimate.of(diff)))
    return reports


def estimate_expectation(spec: DiffusionSpec, strategy: CouplingStrategy, x0, y0, plan: StepPlan,
                         eps_couple: float, t, f: StateFunctional, n_paths: int, seed: int,
                         threads: int = 1):
    """Expectation report at a single time t, or a list of reports for a sequence of times."""
    single = np.ndim(t) == 0
    t_grid = np.atleast_1d(np.asarray(t, dtype=float))
    batch = simulate_coupled_batch(spec, strategy, x0, y0, plan, eps_couple, n_paths, seed,
                                   t_grid=t_grid, threads=threads)
    reports = expectations_from_batch(batch, f)
    return reports[0] if single else reports


@dataclass
class PSDReport:
    min_joint_eigenvalue: np.ndarray  # per sampled pair
    min_hat_eigenvalue: np.ndarray
    hat_trace: np.ndarray

    @property
    def worst_joint(self) -> float:
        return float(self.min_joint_eigenvalue.min())

    @property
    def worst_hat(self) -> float:
        return float(self.min_hat_eigenvalue.min())


def joint_matrix_psd_probe(spec: DiffusionSpec, strategy: CouplingStrategy, xs: np.ndarray,
                           ys: np.ndarray) -> PSDReport:
    """Eigen-check of a(x, y) = [[AA^T(x), C], [C^T, AA^T(y)]] and of
    A_hat = AA^T(x) + AA^T(y) - C - C^T on sampled pairs."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    ax, ay = spec.diffusion(xs), spec.diffusion(ys)
    cov_x = np.einsum("nij,nkj->nik", ax, ax)
    cov_y = np.einsum("nij,nkj->nik", ay, ay)
    cross = cross_covariance(spec, strategy, xs, ys)
    joint = np.block([[cov_x, cross], [np.swapaxes(cross, 1, 2), cov_y]])
    hat = cov_x + cov_y - cross - np.swapaxes(cross, 1, 2)
    joint_min = np.linalg.eigvalsh(0.5 * (joint + np.swapaxes(joint, 1, 2)))[:, 0]
    hat_min = np.linalg.eigvalsh(0.5 * (hat + np.swapaxes(hat, 1, 2)))[:, 0]
    report = PSDReport(joint_min, hat_min, np.trace(hat, axis1=1, axis2=2))
    logger.info(f"PSD probe {spec.name}/{strategy.kind.value}: {xs.shape[0]} pairs, "
                f"min eig(a)={report.worst_joint:.3e}, min eig(A_hat)={report.worst_hat:.3e}")
    return report


def energy_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """Two-sample energy distance 2E|A-B| - E|A-A'| - E|B-B'| for samples in R^d."""
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    b = np.asarray(b, dtype=float).reshape(len(b), -1)
    return float(2.0 * cdist(a, b).mean() - cdist(a, a).mean() - cdist(b, b).mean())


def sliced_energy_statistic(a: np.ndarray, b: np.ndarray, directions: np.ndarray) -> float:
    """Mean one-dimensional energy distance over projections onto unit directions (rows)."""
    a = np.asarray(a, dtype=float).reshape(len(a), -1) @ directions.T
    b = np.asarray(b, dtype=float).reshape(len(b), -1) @ directions.T
    return float(np.mean([energy_distance(a[:, j], b[:, j]) for j in range(directions.shape[0])]))


def marginal_energy_test(a: np.ndarray, b: np.ndarray, n_permutations: int = 200,
                         seed: int = config.DEFAULT_SEED) -> float:
    """Permutation p-value of the energy statistic; small values reject equal laws.

    Pooled samples above EXACT_ENERGY_LIMIT switch to the sliced statistic,
    which sorts instead of forming pairwise distance matrices.
    """
    pooled = np.vstack([np.asarray(a, dtype=float).reshape(len(a), -1),
                        np.asarray(b, dtype=float).reshape(len(b), -1)])
    rng = np.random.default_rng(seed)
    if len(pooled) <= EXACT_ENERGY_LIMIT:
        statistic = energy_statistic
    else:
        directions = rng.standard_normal((SLICE_DIRECTIONS, pooled.shape[1]))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        logger.debug(f"Energy test on {len(pooled)} samples uses {SLICE_DIRECTIONS} projections")

        def statistic(x, y):
            return sliced_energy_statistic(x, y, directions)

    observed = statistic(pooled[:len(a)], pooled[len(a):])
    exceed = 0
    for _ in range(n_permutations):
        order = rng.permutation(len(pooled))
        if statistic(pooled[order[:len(a)]], pooled[order[len(a):]]) >= observed:
            exceed += 1
    return (exceed + 1) / (n_permutations + 1)


@dataclass
class TraceDriftReport:
    trace: float
    slope: BatchEstimate
    t_grid: np.ndarray
    means: np.ndarray

    @property
    def relative_error(self) -> float:
        return abs(self.slope.point - self.trace) / abs(self.trace)


def trace_drift_probe(spec: DiffusionSpec, x0, y0, t_grid: Sequence[float], plan: StepPlan, n_paths: int,
                      seed: int, strategy: Optional[CouplingStrategy] = None, threads: int = 1) -> TraceDriftReport:
    """Small-time slope of E|X_t - Y_t|^2 against Tr A_hat(x0, y0).

    For a drift-free spec D_t - d is a martingale, so E|D_t|^2 - |d|^2 =
    E|D_t - d|^2; the latter has far smaller variance and is what gets fitted.
    The slope is a least-squares fit through the origin; its standard error
    comes from per-path slopes.
    """
    strategy = strategy or CouplingStrategy(CouplingKind.SYNCHRONOUS, spec.chart)
    x0, y0 = spec.check_start(x0), spec.check_start(y0)
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0):
        raise PreconditionError("trace drift times must be positive")
    # coupling must not truncate the small-time increments
    eps = 1e-300
    batch = simulate_coupled_batch(spec, strategy, x0, y0, plan, eps, n_paths, seed, t_grid=t_grid, threads=threads)
    d0 = x0 - y0
    sq = np.sum((batch.snapshots_x - batch.snapshots_y - d0) ** 2, axis=-1)  # (N, T)
    per_path_slope = sq @ t_grid / np.dot(t_grid, t_grid)
    hat_trace = float(joint_matrix_psd_probe(spec, strategy, x0[None, :], y0[None, :]).hat_trace[0])
    return TraceDriftReport(hat_trace, mean_estimate(per_path_slope), t_grid, sq.mean(axis=0))
