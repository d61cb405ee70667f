"""
Theorem-level bound evaluators.

Every evaluator here assumes k1, k2 < 0 and rejects other profiles with
CurvatureSignError; the comparison functions themselves stay total.
"""

import enum
import logging
import math
from dataclasses import dataclass

from errors import CurvatureSignError, PreconditionError
from geometry.model_spaces import CurvatureFamily, CurvatureProfile

from .functions import laplacian_bound

logger = logging.getLogger("curvature_comparison")


class BoundKind(enum.Enum):
    COUPLING_FAILURE = "coupling_failure"
    SCHWARZ = "schwarz"
    GRADIENT = "gradient"
    EXIT_EVENT = "exit_event"


@dataclass(frozen=True)
class BoundReport:
    profile: CurvatureProfile
    rho: float
    value: float
    kind: BoundKind


def _check_rho(rho: float):
    if not rho >= 0:
        raise PreconditionError(f"distance must be nonnegative, got {rho}")


def failure_constant(profile: CurvatureProfile) -> float:
    """Multiplier of rho in the coupling-failure and gradient bounds.

    Kähler: 8((n-1) sqrt|k2| + sqrt|k1|) + 2m.
    Quaternionic: 8(n-1) sqrt|k2| + 24 sqrt|k1| + 2m.
    """
    profile.require_negative()
    r1, r2 = math.sqrt(-profile.k1), math.sqrt(-profile.k2)
    if profile.is_kahler:
        return 8.0 * ((profile.n - 1) * r2 + r1) + 2.0 * profile.m
    return 8.0 * (profile.n - 1) * r2 + 24.0 * r1 + 2.0 * profile.m


def coupling_failure_bound(profile: CurvatureProfile, rho: float) -> BoundReport:
    _check_rho(rho)
    return BoundReport(profile, rho, failure_constant(profile) * rho, BoundKind.COUPLING_FAILURE)


def schwarz_bound(profile: CurvatureProfile, rho: float) -> BoundReport:
    """16((n-1) sqrt|k2| + sqrt|k1|) * rho, for drift-free Kähler profiles."""
    _check_rho(rho)
    profile.require_negative()
    if not profile.is_kahler:
        raise CurvatureSignError("the Schwarz bound is stated for Kähler profiles only")
    if profile.m != 0:
        raise CurvatureSignError(f"the Schwarz bound needs m = 0, got m = {profile.m}")
    constant = 4.0 * (4.0 * ((profile.n - 1) * math.sqrt(-profile.k2) + math.sqrt(-profile.k1)))
    return BoundReport(profile, rho, constant * rho, BoundKind.SCHWARZ)


def gradient_bound(profile: CurvatureProfile, sup_norm: float) -> float:
    if not sup_norm >= 0:
        raise PreconditionError(f"sup norm must be nonnegative, got {sup_norm}")
    return failure_constant(profile) * sup_norm


def exit_event_bound(profile: CurvatureProfile, rho: float, delta: float, c: float) -> BoundReport:
    """c (1/delta + 1) rho with a supplied or fitted constant c."""
    _check_rho(rho)
    profile.require_negative()
    if not delta > 0:
        raise PreconditionError(f"ball radius must be positive, got {delta}")
    if not c >= 0:
        raise PreconditionError(f"constant c must be nonnegative, got {c}")
    return BoundReport(profile, rho, c * (1.0 / delta + 1.0) * rho, BoundKind.EXIT_EVENT)


def comparison_drift_kahler(profile: CurvatureProfile) -> float:
    """Constant drift b = 4(n-1) sqrt|k2| + 4 sqrt|k1| + 2m of the distance comparison process."""
    profile.require_negative()
    return 4.0 * (profile.n - 1) * math.sqrt(-profile.k2) + 4.0 * math.sqrt(-profile.k1) + 2.0 * profile.m


def comparison_drift_quaternionic(profile: CurvatureProfile) -> float:
    profile.require_negative()
    return 4.0 * (profile.n - 1) * math.sqrt(-profile.k2) + 12.0 * math.sqrt(-profile.k1) + 2.0 * profile.m


def comparison_drift(profile: CurvatureProfile) -> float:
    if profile.family is CurvatureFamily.KAHLER:
        return comparison_drift_kahler(profile)
    return comparison_drift_quaternionic(profile)


def eta_drift(profile: CurvatureProfile, r):
    """Radial drift of the one-point comparison process: half the Laplacian bound plus m."""
    profile.require_negative()
    return 0.5 * laplacian_bound(profile, r) + profile.m


def eta_entrance_dimension(profile: CurvatureProfile) -> float:
    """1 + 2 lim_{r->0} r * eta_drift(r), the Bessel dimension seen near r = 0.

    The drift behaves like (2n-1)/(2r) (Kähler) or (4n-1)/(2r) (quaternionic),
    giving the real dimension 2n or 4n.
    """
    residue = (2 * profile.n - 1) / 2.0 if profile.is_kahler else (4 * profile.n - 1) / 2.0
    return 1.0 + 2.0 * residue


def non_coupling_lower_bound(rho: float) -> float:
    """rho^2 / 4 with rho the Euclidean chart distance on the H^2(C) ball.

    Lower bound for P(tau = infinity) under every Markovian coupling of two
    Brownian motions started at distinct points.
    """
    _check_rho(rho)
    return rho * rho / 4.0
