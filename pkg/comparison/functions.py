"""
Closed-form comparison functions of the constant-curvature models and the
index and Laplacian bounds built from them.

G and F accept a scalar radius or an array of radii; scalars come back as floats.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from errors import PreconditionError, SingularityError
from geometry.model_spaces import CurvatureFamily, CurvatureProfile

logger = logging.getLogger("curvature_comparison")

RICCI_SLACK = 1e-12


def _check_singularity(k: float, r: np.ndarray, name: str):
    if k > 0 and r.size and np.max(math.sqrt(k) * r) >= math.pi:
        raise SingularityError(f"{name}({k}, r) needs sqrt(k) * r < pi")


def G(k: float, r):
    """k > 0: -2 sqrt(k) tan(sqrt(k) r / 2); k = 0: 0; k < 0: 2 sqrt|k| tanh(sqrt|k| r / 2)."""
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise PreconditionError("G is defined for r >= 0 only")
    _check_singularity(k, r, "G")
    if k > 0:
        root = math.sqrt(k)
        value = -2.0 * root * np.tan(root * r / 2.0)
    elif k == 0:
        value = np.zeros_like(r)
    else:
        root = math.sqrt(-k)
        value = 2.0 * root * np.tanh(root * r / 2.0)
    return float(value) if scalar else value


def F(k: float, r):
    """k > 0: sqrt(k) cot(sqrt(k) r); k = 0: 1 / r; k < 0: sqrt|k| coth(sqrt|k| r)."""
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise PreconditionError("F is defined for r > 0 only")
    _check_singularity(k, r, "F")
    if k > 0:
        root = math.sqrt(k)
        value = root / np.tan(root * r)
    elif k == 0:
        value = 1.0 / r
    else:
        root = math.sqrt(-k)
        value = root / np.tanh(root * r)
    return float(value) if scalar else value


def _require_family(profile: CurvatureProfile, family: CurvatureFamily):
    if profile.family is not family:
        raise PreconditionError(f"expected a {family.value} profile, got {profile.family.value}")


def kahler_index_bound(profile: CurvatureProfile, d):
    _require_family(profile, CurvatureFamily.KAHLER)
    d = np.asarray(d, dtype=float) if np.ndim(d) else d
    return (2 * profile.n - 2) * G(profile.k2, d) + 2.0 * G(profile.k1, 2 * d)


def quaternionic_index_bound(profile: CurvatureProfile, d):
    _require_family(profile, CurvatureFamily.QUATERNIONIC)
    d = np.asarray(d, dtype=float) if np.ndim(d) else d
    return (4 * profile.n - 4) * G(profile.k2, d) + 6.0 * G(profile.k1, 2 * d)


def kahler_laplacian_bound(profile: CurvatureProfile, r):
    """Upper bound for the Laplacian of the distance function at radius r > 0."""
    _require_family(profile, CurvatureFamily.KAHLER)
    r = np.asarray(r, dtype=float) if np.ndim(r) else r
    return (2 * profile.n - 2) * F(profile.k2, r) + 2.0 * F(profile.k1, 2 * r)


def quaternionic_laplacian_bound(profile: CurvatureProfile, r):
    _require_family(profile, CurvatureFamily.QUATERNIONIC)
    r = np.asarray(r, dtype=float) if np.ndim(r) else r
    return (4 * profile.n - 4) * F(profile.k2, r) + 6.0 * F(profile.k1, 2 * r)


def laplacian_bound(profile: CurvatureProfile, r):
    if profile.is_kahler:
        return kahler_laplacian_bound(profile, r)
    return quaternionic_laplacian_bound(profile, r)


@dataclass(frozen=True)
class RicciReductionRecord:
    n: int
    k1: float
    k2: float
    r: float
    lhs: float
    rhs: float
    holds: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def ricci_reduction_check(n: int, k1: float, k2: float, r: float) -> RicciReductionRecord:
    """Compare (2n-2) G(k2, r) + 2 G(k1, 2r) with (2n-1) G((4 k1 + (2n-2) k2) / (2n-1), r).

    The inequality follows from concavity of k -> G(k, r); the result is reported,
    never asserted.
    """
    if k1 > 0 or k2 > 0:
        raise PreconditionError(f"ricci reduction needs k1, k2 <= 0, got k1={k1}, k2={k2}")
    if r < 0:
        raise PreconditionError(f"r must be nonnegative, got {r}")
    if int(n) != n or n < 1:
        raise PreconditionError(f"n must be a positive integer, got {n}")
    lhs = (2 * n - 2) * G(k2, r) + 2.0 * G(k1, 2.0 * r)
    averaged_k = (4.0 * k1 + (2 * n - 2) * k2) / (2 * n - 1)
    rhs = (2 * n - 1) * G(averaged_k, r)
    return RicciReductionRecord(int(n), k1, k2, r, lhs, rhs, rhs - lhs >= -RICCI_SLACK)


DEFAULT_SWEEP_NS = (1, 2, 3, 4)
DEFAULT_SWEEP_KS = (-2.0, -1.0, -0.25)


def default_sweep_radii(count: int = 50, r_max: float = 5.0) -> np.ndarray:
    return np.linspace(r_max / count, r_max, count)


def ricci_reduction_sweep(ns: Iterable[int] = DEFAULT_SWEEP_NS,
                          ks: Iterable[float] = DEFAULT_SWEEP_KS,
                          rs: Optional[Iterable[float]] = None) -> List[RicciReductionRecord]:
    """Evaluate the reduction on the full (n, k1, k2, r) grid; violations are logged, not raised."""
    rs = default_sweep_radii() if rs is None else rs
    ks = list(ks)
    records = [
        ricci_reduction_check(n, k1, k2, float(r))
        for n in ns for k1 in ks for k2 in ks for r in rs
    ]
    violations = [rec for rec in records if not rec.holds]
    if violations:
        worst = min(violations, key=lambda rec: rec.slack)
        logger.warning(f"Ricci reduction fails at {len(violations)} of {len(records)} grid points; "
                       f"worst slack {worst.slack:.3e} at n={worst.n}, k1={worst.k1}, k2={worst.k2}, r={worst.r}")
    else:
        logger.info(f"Ricci reduction holds on all {len(records)} grid points")
    return records
