"""
One-dimensional comparison diffusions dr = sigma dW + drift(r) dt and their
hitting estimates: the lemma-type survival bound, the scale-function
absorption probability and its numerical ODE cross-check.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_bvp
from scipy.optimize import minimize_scalar

import config
from errors import PreconditionError
from geometry.model_spaces import CurvatureProfile

from .bounds import comparison_drift, eta_drift, eta_entrance_dimension

logger = logging.getLogger("curvature_comparison")


@dataclass(frozen=True)
class ComparisonDiffusion1D:
    """dr = sqrt(sigma2) dW + drift(r) dt started at r0.

    drift takes and returns arrays. ``drift_constant`` is set for constant-drift
    processes and ``entrance_dimension`` for processes with an entrance
    boundary at 0 (drift ~ (dimension - 1) sigma2 / (2r) there).
    """
    sigma2: float
    drift: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    r0: float
    name: str = "comparison"
    drift_constant: Optional[float] = None
    entrance_dimension: Optional[float] = None

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise PreconditionError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.r0 >= 0:
            raise PreconditionError(f"start r0 must be nonnegative, got {self.r0}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def with_start(self, r0: float) -> "ComparisonDiffusion1D":
        return ComparisonDiffusion1D(self.sigma2, self.drift, r0, self.name,
                                     self.drift_constant, self.entrance_dimension)


def constant_drift_diffusion(b: float, sigma2: float, r0: float) -> ComparisonDiffusion1D:
    return ComparisonDiffusion1D(
        sigma2, lambda r: np.full(np.shape(r), float(b)), r0,
        name=f"constant_drift(b={b})", drift_constant=float(b),
    )


def rho_comparison(profile: CurvatureProfile, r0: float) -> ComparisonDiffusion1D:
    """Distance comparison process: quadratic variation 2t and constant drift b."""
    b = comparison_drift(profile)
    process = constant_drift_diffusion(b, 2.0, r0)
    return ComparisonDiffusion1D(process.sigma2, process.drift, r0, "rho", b)


def eta_comparison(profile: CurvatureProfile, r0: float = 0.0) -> ComparisonDiffusion1D:
    """Radial comparison process of one Brownian motion about its start point."""
    profile.require_negative()

    def drift(r):
        r = np.asarray(r, dtype=float)
        # the entrance-step simulator never evaluates the drift at 0
        return eta_drift(profile, np.maximum(r, np.finfo(float).tiny))

    return ComparisonDiffusion1D(1.0, drift, r0, "eta", None, eta_entrance_dimension(profile))


def bessel_diffusion(dimension: float, r0: float = 0.0) -> ComparisonDiffusion1D:
    """BES(dimension): dr = dW + (dimension - 1) / (2r) dt."""
    if not dimension >= 1:
        raise PreconditionError(f"Bessel dimension must be at least 1, got {dimension}")

    def drift(r):
        return (dimension - 1.0) / (2.0 * np.asarray(r, dtype=float))

    return ComparisonDiffusion1D(1.0, drift, r0, f"bessel({dimension})", None, float(dimension))


def absorption_probability(b: float, sigma2: float, r0: float) -> float:
    """P(dr = sigma dW + b dt started at r0 ever hits 0) from the scale function."""
    if not sigma2 > 0:
        raise PreconditionError(f"sigma2 must be positive, got {sigma2}")
    if not r0 >= 0:
        raise PreconditionError(f"r0 must be nonnegative, got {r0}")
    if r0 == 0 or b <= 0:
        return 1.0
    return min(1.0, math.exp(-2.0 * b * r0 / sigma2))


def absorption_probability_numeric(b: float, sigma2: float, r0: float,
                                   horizon: Optional[float] = None) -> float:
    """Solve a u'' + b u' = 0, u(0) = 1, u(R) = 0 on a long interval and read u(r0).

    a = sigma2 / 2. R defaults to 40 decay lengths so that the truncation sits
    far below solver tolerance.
    """
    if not sigma2 > 0:
        raise PreconditionError(f"sigma2 must be positive, got {sigma2}")
    if r0 == 0 or b <= 0:
        return 1.0
    a = sigma2 / 2.0
    decay = b / a
    horizon = max(40.0 / decay, 2.0 * r0) if horizon is None else horizon
    if r0 >= horizon:
        raise PreconditionError(f"r0 = {r0} lies beyond the truncation horizon {horizon}")

    def rhs(x, y):
        return np.vstack([y[1], -decay * y[1]])

    def boundary(ya, yb):
        return np.array([ya[0] - 1.0, yb[0]])

    mesh = np.linspace(0.0, horizon, 400)
    guess = np.vstack([np.exp(-decay * mesh), -decay * np.exp(-decay * mesh)])
    solution = solve_bvp(rhs, boundary, mesh, guess, tol=1e-10, max_nodes=100000)
    if not solution.success:
        logger.warning(f"exit ODE solver did not converge: {solution.message}")
    return float(solution.sol(r0)[0])


def _xi(a: float, b: float, r):
    if b == 0:
        return np.asarray(r, dtype=float)
    return (a / b) * -np.expm1(-(b / a) * np.asarray(r, dtype=float))


def wang_bound(a: float, b: float, r0: float, t: float) -> float:
    """Survival bound for the diffusion generated by a d^2/dr^2 + b d/dr absorbed at 0.

    xi(r0) * inf_{s > r0} (1 / xi(s) + exp(c(s)) / sqrt(a pi t)),
    xi(r) = (a/b)(1 - exp(-(b/a) r)) and c(s) = max(0, (b/a) s).
    The infimum is taken on a log grid of s and refined by bounded Brent search.
    t = inf returns the closed-form limit.
    """
    if not a > 0:
        raise PreconditionError(f"a must be positive, got {a}")
    if not r0 >= 0:
        raise PreconditionError(f"r0 must be nonnegative, got {r0}")
    if not t > 0:
        raise PreconditionError(f"t must be positive, got {t}")
    if r0 == 0:
        return 0.0
    xi_r0 = float(_xi(a, b, r0))
    if math.isinf(t):
        return xi_r0 * (b / a) if b > 0 else 0.0

    scale = 1.0 / math.sqrt(a * math.pi * t)

    def infimand(s):
        with np.errstate(over="ignore"):
            return 1.0 / _xi(a, b, s) + np.exp(np.maximum(0.0, (b / a) * np.asarray(s))) * scale

    grid = np.geomspace(r0, config.WANG_GRID_SPAN * max(1.0, r0), config.WANG_GRID_POINTS + 1)[1:]
    values = infimand(grid)
    best = int(np.argmin(values))
    lo = grid[best - 1] if best > 0 else r0
    hi = grid[min(best + 1, grid.size - 1)]
    best_value = float(values[best])
    if hi > lo:
        refined = minimize_scalar(lambda s: float(infimand(s)), bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12 * max(1.0, hi)})
        if refined.success and refined.fun < best_value:
            best_value = float(refined.fun)
    return xi_r0 * best_value
