"""
Carathéodory quantities: closed forms on the disk and on H^n(C), and the
coupling estimator

    c(x, y) = sup_f |E[(f(X_t) - f(Y_t)) 1(tau > t)]| <= 2 P(tau > t)

over holomorphic f into the disk with f(y) = 0.

On the disk c is the Möbius (pseudo-hyperbolic) distance; geodesic
distances enter only through the Schwarz bound.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

import config
from comparison.bounds import schwarz_bound
from coupling.estimators import BatchEstimate, ExpectationEstimate, count_estimate
from coupling.simulator import default_eps, simulate_coupled_batch
from coupling.strategies import CouplingStrategy
from errors import PreconditionError
from geometry.complex_ball import ball_pseudo_distance, real_to_complex
from geometry.disk import PointLike, as_complex, disk_geodesic_distance, from_complex, moebius_pseudo_distance
from geometry.model_spaces import DISK_PROFILE
from sde.engine import DiffusionSpec, StepPlan
from sde.specs import disk_spec

from .holomorphic import HolomorphicTestFunction

logger = logging.getLogger("caratheodory_estimator")


def caratheodory_disk(x: PointLike, y: PointLike) -> float:
    return moebius_pseudo_distance(x, y)


def caratheodory_reiffen_chn(p, v) -> float:
    """gamma(p; v) = sqrt(|v|^2 / (1 - |p|^2) + |<p, v>|^2 / (1 - |p|^2)^2) on the unit ball."""
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    if p.shape != v.shape:
        raise PreconditionError(f"point and vector shapes differ: {p.shape} vs {v.shape}")
    gap = 1.0 - float(np.vdot(p, p).real)
    if not gap > 0:
        raise PreconditionError("base point must lie inside the unit ball")
    inner = abs(np.vdot(p, v))
    return math.sqrt(float(np.vdot(v, v).real) / gap + inner * inner / (gap * gap))


def caratheodory_ball(p, q) -> float:
    """|phi_p(q)|, the Carathéodory distance of the unit ball of C^n (n = 1 gives the disk)."""
    return ball_pseudo_distance(np.atleast_1d(p), np.atleast_1d(q))


def chn_poincare_distance(p, q) -> float:
    """sqrt(n + 1) * artanh |phi_p(q)|, geodesic distance of the normalized Poincaré metric."""
    p = np.atleast_1d(np.asarray(p, dtype=complex))
    return math.sqrt(p.size + 1) * math.atanh(caratheodory_ball(p, q))


@dataclass
class CaratheodoryReport:
    closed_form: float
    stochastic_estimate: BatchEstimate
    survival: BatchEstimate
    survival_bound: float
    schwarz_rhs: Optional[float]
    t: float
    member_estimates: List[ExpectationEstimate] = field(default_factory=list)
    best_member: int = -1

    @property
    def survival_bound_se(self) -> float:
        return 2.0 * self.survival.se

    def bound_respected(self, multiplier: float = config.SE_MULTIPLIER) -> bool:
        """closed_form <= 2 P(tau > t) within the Monte Carlo band."""
        return self.closed_form <= self.survival_bound + multiplier * self.survival_bound_se


def _states_to_points(spec: DiffusionSpec, state: np.ndarray):
    if spec.chart == "disk":
        return complex(state[0], state[1])
    return real_to_complex(state)


def _closed_form(spec: DiffusionSpec, x: np.ndarray, y: np.ndarray) -> float:
    if spec.chart == "disk":
        return caratheodory_disk(complex(x[0], x[1]), complex(y[0], y[1]))
    if spec.chart == "h2c":
        return caratheodory_ball(real_to_complex(x), real_to_complex(y))
    return float("nan")


def _check_family(spec: DiffusionSpec, family: Sequence[HolomorphicTestFunction], y: np.ndarray):
    if not family:
        raise PreconditionError("test family is empty")
    anchor = _states_to_points(spec, y)
    for member in family:
        value = abs(member.value_at(anchor))
        if value > 1e-12:
            raise PreconditionError(f"test function {member} does not vanish at y (|f(y)| = {value:.3e})")


def stochastic_caratheodory(spec: DiffusionSpec, strategy: CouplingStrategy, x, y, t: float,
                            family: Sequence[HolomorphicTestFunction], n_paths: int, seed: int,
                            plan: Optional[StepPlan] = None, eps_couple: Optional[float] = None,
                            threads: int = 1) -> CaratheodoryReport:
    """Sup over ``family`` of the indicator-weighted expectation at time t, next to 2 P(tau > t).

    The sup is taken on point estimates; a finite family gives a lower bound
    of c up to Monte Carlo error.
    """
    x, y = spec.check_start(x), spec.check_start(y)
    _check_family(spec, family, y)
    plan = plan or StepPlan(config.DT_H2C if spec.chart == "h2c" else config.DT_DISK, t)
    eps_couple = eps_couple or default_eps(spec)
    batch = simulate_coupled_batch(spec, strategy, x, y, plan, eps_couple, n_paths, seed,
                                   t_grid=[t], threads=threads)
    alive = batch.uncoupled_at(t)
    estimates = []
    for member in family:
        diff = member.evaluate_states(batch.snapshots_x[:, 0]) - member.evaluate_states(batch.snapshots_y[:, 0])
        estimates.append(ExpectationEstimate.of(diff * alive))
    best = int(np.argmax([e.modulus for e in estimates]))
    top = estimates[best]
    stochastic = BatchEstimate(n_paths, top.modulus, top.modulus_se,
                               top.modulus - config.WILSON_Z * top.modulus_se,
                               top.modulus + config.WILSON_Z * top.modulus_se)
    survival = count_estimate(int(alive.sum()), n_paths)
    schwarz_rhs = None
    if spec.chart == "disk":
        rho = disk_geodesic_distance(complex(x[0], x[1]), complex(y[0], y[1]))
        schwarz_rhs = schwarz_bound(DISK_PROFILE, rho).value
    report = CaratheodoryReport(_closed_form(spec, x, y), stochastic, survival, 2.0 * survival.point,
                                schwarz_rhs, t, estimates, best)
    logger.info(f"Carathéodory at t={t}: closed form {report.closed_form:.6f}, "
                f"sup estimate {stochastic.point:.6f} +- {stochastic.se:.2e}, 2P(tau>t) = {report.survival_bound:.6f}")
    return report


@dataclass(frozen=True)
class SchwarzCheck:
    lhs: float
    rhs: float
    lhs_se: float
    rhs_se: float
    holds: bool

    @property
    def combined_se(self) -> float:
        return math.hypot(self.lhs_se, self.rhs_se)


def disk_schwarz_check(f: HolomorphicTestFunction, x: PointLike, t: float, strategy: CouplingStrategy,
                       n_paths: int, seed: int, spec: Optional[DiffusionSpec] = None,
                       plan: Optional[StepPlan] = None, eps_couple: float = config.EPS_COUPLE_DISK,
                       threads: int = 1) -> SchwarzCheck:
    """|E[(f(X_t) - f(Y_t)) 1(tau > t)]| against the same quantity for the identity, y = 0."""
    if not f.vanishes_at(0j):
        raise PreconditionError(f"{f} must vanish at 0")
    spec = spec or disk_spec()
    plan = plan or StepPlan(config.DT_DISK, t)
    x = from_complex(as_complex(x))
    batch = simulate_coupled_batch(spec, strategy, x, np.zeros(2), plan, eps_couple, n_paths, seed,
                                   t_grid=[t], threads=threads)
    alive = batch.uncoupled_at(t)
    zx = batch.snapshots_x[:, 0, 0] + 1j * batch.snapshots_x[:, 0, 1]
    zy = batch.snapshots_y[:, 0, 0] + 1j * batch.snapshots_y[:, 0, 1]
    lhs = ExpectationEstimate.of((f(zx) - f(zy)) * alive)
    rhs = ExpectationEstimate.of((zx - zy) * alive)
    combined = math.hypot(lhs.modulus_se, rhs.modulus_se)
    holds = lhs.modulus <= rhs.modulus + config.SE_MULTIPLIER * combined
    return SchwarzCheck(lhs.modulus, rhs.modulus, lhs.modulus_se, rhs.modulus_se, holds)
