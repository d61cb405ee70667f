"""
Holomorphic maps into the unit disk used as Carathéodory test functions.

Each member evaluates on complex points and on real chart states, and knows
the point where it vanishes (its anchor).
"""

import cmath
import enum
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from errors import PreconditionError
from geometry.complex_ball import ball_automorphism, real_to_complex
from geometry.disk import as_complex, to_complex


class TestFunctionKind(enum.Enum):
    MOEBIUS = "moebius"
    ROTATED_MOEBIUS = "rotated_moebius"
    COORDINATE_SLICE = "coordinate_slice"
    POWER = "power"
    CONSTANT_ZERO = "constant_zero"


class HolomorphicTestFunction(ABC):
    kind: TestFunctionKind
    domain_dim: int = 1  # complex dimension of the domain

    @abstractmethod
    def __call__(self, z):
        """Values in the unit disk at points of the domain."""

    def evaluate_states(self, states: np.ndarray) -> np.ndarray:
        """Values on real chart states of shape (N, 2 * domain_dim)."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if self.domain_dim == 1:
            return np.asarray(self(to_complex(states)), dtype=complex)
        return np.asarray(self(real_to_complex(states)), dtype=complex)

    def value_at(self, point) -> complex:
        if self.domain_dim == 1:
            return complex(self(np.asarray(as_complex(point))))
        return complex(self(np.asarray(point, dtype=complex)))

    def vanishes_at(self, point, tol: float = 1e-12) -> bool:
        return abs(self.value_at(point)) <= tol


@dataclass(frozen=True)
class MoebiusAboutPoint(HolomorphicTestFunction):
    """(z - a) / (1 - conj(a) z), the disk automorphism sending a to 0."""
    a: complex
    kind = TestFunctionKind.MOEBIUS

    def __post_init__(self):
        object.__setattr__(self, "a", as_complex(self.a))

    def __call__(self, z):
        return (z - self.a) / (1.0 - np.conj(self.a) * z)


@dataclass(frozen=True)
class RotatedMoebius(HolomorphicTestFunction):
    a: complex
    phase: float = 0.0
    kind = TestFunctionKind.ROTATED_MOEBIUS

    def __post_init__(self):
        object.__setattr__(self, "a", as_complex(self.a))

    def __call__(self, z):
        return cmath.exp(1j * self.phase) * (z - self.a) / (1.0 - np.conj(self.a) * z)


@dataclass(frozen=True)
class PowerMap(HolomorphicTestFunction):
    """e^{i phase} z^k; vanishes at 0."""
    k: int
    phase: float = 0.0
    kind = TestFunctionKind.POWER

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise PreconditionError(f"power must be a positive integer, got {self.k}")

    def __call__(self, z):
        return cmath.exp(1j * self.phase) * np.asarray(z, dtype=complex) ** self.k


@dataclass(frozen=True)
class ConstantZero(HolomorphicTestFunction):
    domain_dim: int = 1
    kind = TestFunctionKind.CONSTANT_ZERO

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        shape = z.shape if self.domain_dim == 1 else z.shape[:-1]
        return np.zeros(shape, dtype=complex)


@dataclass(frozen=True)
class CoordinateSliceCHn(HolomorphicTestFunction):
    """e^{i phase} * (phi_center(z))_index on the unit ball of C^n.

    |f| <= |phi_center(z)| < 1 and f(center) = 0.
    """
    index: int
    center: Tuple[complex, ...]
    phase: float = 0.0
    kind = TestFunctionKind.COORDINATE_SLICE

    def __post_init__(self):
        center = tuple(complex(c) for c in self.center)
        object.__setattr__(self, "center", center)
        if not 0 <= self.index < len(center):
            raise PreconditionError(f"coordinate index {self.index} out of range for C^{len(center)}")
        if sum(abs(c) ** 2 for c in center) >= 1.0:
            raise PreconditionError("automorphism center must lie inside the unit ball")

    @property
    def domain_dim(self) -> int:
        return len(self.center)

    def __call__(self, z):
        image = ball_automorphism(np.array(self.center), np.asarray(z, dtype=complex))
        return cmath.exp(1j * self.phase) * image[..., self.index]


def moebius_family(anchor, phases: Optional[Iterable[float]] = None) -> List[HolomorphicTestFunction]:
    """Rotations of the Möbius map about ``anchor``; 8 equally spaced phases by default."""
    phases = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False) if phases is None else phases
    return [RotatedMoebius(anchor, float(theta)) for theta in phases]
