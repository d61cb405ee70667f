"""Bounded harmonic functions on the disk and the hyperbolic gradient check."""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from comparison.bounds import gradient_bound
from errors import PreconditionError
from geometry.disk import PointLike, as_complex, metric_factor
from geometry.model_spaces import DISK_PROFILE, CurvatureProfile

logger = logging.getLogger("caratheodory_estimator")

FD_STEP = 1e-5


class HarmonicFunction(ABC):
    @property
    @abstractmethod
    def sup_norm(self) -> float:
        """Supremum of |u| over the disk."""

    @abstractmethod
    def __call__(self, z):
        """Values at complex points."""


@dataclass(frozen=True)
class ConstantHarmonic(HarmonicFunction):
    value: float = 0.0

    @property
    def sup_norm(self) -> float:
        return abs(self.value)

    def __call__(self, z):
        return np.full(np.shape(z), float(self.value))


@dataclass(frozen=True)
class RealPart(HarmonicFunction):
    """Re(c z); sup over the disk is |c|."""
    c: complex = 1.0

    @property
    def sup_norm(self) -> float:
        return abs(self.c)

    def __call__(self, z):
        return np.real(complex(self.c) * np.asarray(z, dtype=complex))


@dataclass(frozen=True)
class ArcIndicatorHarmonic(HarmonicFunction):
    """Poisson extension of the indicator of the boundary arc {e^{i s}: alpha < s < beta}.

    u(z) = arg((e^{i beta} - z) / (e^{i alpha} - z)) / pi - (beta - alpha) / (2 pi).
    """
    alpha: float = 0.0
    beta: float = math.pi

    def __post_init__(self):
        if not 0 < self.beta - self.alpha < 2 * math.pi:
            raise PreconditionError(f"arc ({self.alpha}, {self.beta}) must have length in (0, 2 pi)")

    @property
    def sup_norm(self) -> float:
        return 1.0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        ratio = (np.exp(1j * self.beta) - z) / (np.exp(1j * self.alpha) - z)
        # the subtended angle lies in ((beta - alpha) / 2, pi + (beta - alpha) / 2)
        angle = np.mod(np.angle(ratio), 2.0 * math.pi)
        return angle / math.pi - (self.beta - self.alpha) / (2.0 * math.pi)


@dataclass(frozen=True)
class PoissonExtension(HarmonicFunction):
    """u(z) = (1 / 2 pi) int P(z, s) g(s) ds by adaptive quadrature of boundary data g."""
    boundary: Callable[[float], float]
    bound: float

    @property
    def sup_norm(self) -> float:
        return self.bound

    def _at(self, z: complex) -> float:
        if not abs(z) < 1.0:
            raise PreconditionError(f"{z} is not inside the unit disk")
        r2 = abs(z) ** 2

        def integrand(s):
            return (1.0 - r2) / abs(complex(math.cos(s), math.sin(s)) - z) ** 2 * self.boundary(s)

        value, _ = quad(integrand, 0.0, 2.0 * math.pi, epsabs=1e-13, epsrel=1e-13, limit=400)
        return value / (2.0 * math.pi)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.vectorize(self._at, otypes=[float])(z)


def euclidean_gradient(u: HarmonicFunction, z: complex, h: float = FD_STEP) -> np.ndarray:
    """Central differences in x and y with one Richardson extrapolation step."""
    def central(step):
        points = np.array([z + step, z - step, z + 1j * step, z - 1j * step])
        values = np.asarray(u(points), dtype=float)
        return np.array([values[0] - values[1], values[2] - values[3]]) / (2.0 * step)

    return (4.0 * central(h / 2.0) - central(h)) / 3.0


def hyperbolic_gradient_norm(u: HarmonicFunction, x: PointLike, h: float = FD_STEP) -> float:
    """|grad u|_g = lambda(z) |grad_e u| for the metric g = |dz|^2 / lambda^2."""
    z = as_complex(x)
    return float(metric_factor(z) * np.linalg.norm(euclidean_gradient(u, z, h)))


@dataclass(frozen=True)
class GradientCheck:
    grad_norm: float
    bound: float
    holds: bool


def harmonic_gradient_check(u: HarmonicFunction, x: PointLike,
                            profile: CurvatureProfile = DISK_PROFILE) -> GradientCheck:
    grad = hyperbolic_gradient_norm(u, x)
    bound = gradient_bound(profile, u.sup_norm)
    if grad > bound:
        logger.warning(f"gradient {grad:.6g} at {x} exceeds the bound {bound:.6g}")
    return GradientCheck(grad, bound, grad <= bound)
