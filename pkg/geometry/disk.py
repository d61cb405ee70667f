"""
Poincaré disk geometry in the complex chart.

The disk carries the Gaussian-curvature -1 metric ds = 2|dz| / (1 - |z|^2).
Geodesics and parallel transport are obtained in closed form by moving one
endpoint to the origin with a disk automorphism, where the geodesic is a
piece of the real diameter.

Tangent vectors are chart vectors stored as complex numbers; the metric is
applied explicitly through ``metric_factor`` whenever a norm is needed.
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from errors import DegenerateGeodesicError, PreconditionError

PointLike = Union["DiskPoint", complex, float, tuple]


@dataclass(frozen=True)
class DiskPoint:
    re: float
    im: float = 0.0

    def __post_init__(self):
        if not self.re * self.re + self.im * self.im < 1.0:
            raise PreconditionError(f"point ({self.re}, {self.im}) is not inside the unit disk")

    @property
    def z(self) -> complex:
        return complex(self.re, self.im)

    @classmethod
    def from_complex(cls, z: complex) -> "DiskPoint":
        z = complex(z)
        return cls(z.real, z.imag)

    def as_array(self) -> np.ndarray:
        return np.array([self.re, self.im])


def as_complex(p: PointLike) -> complex:
    """Coerce a DiskPoint, complex, real or (re, im) pair to a checked complex point."""
    if isinstance(p, DiskPoint):
        return p.z
    if isinstance(p, (tuple, list, np.ndarray)) and len(p) == 2:
        z = complex(float(p[0]), float(p[1]))
    else:
        z = complex(p)
    if not abs(z) < 1.0:
        raise PreconditionError(f"point {z} is not inside the unit disk")
    return z


def to_complex(states: np.ndarray) -> np.ndarray:
    """(N, 2) real chart states -> (N,) complex."""
    states = np.asarray(states, dtype=float)
    return states[..., 0] + 1j * states[..., 1]


def from_complex(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1)


def metric_factor(z):
    """lambda(z) = (1 - |z|^2) / 2; the metric is g = |dz|^2 / lambda^2."""
    return 0.5 * (1.0 - np.abs(z) ** 2)


def hyperbolic_norm(z, v):
    return np.abs(v) / metric_factor(z)


def pseudo_distance_array(z, w):
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return np.abs((z - w) / (1.0 - np.conj(w) * z))


def geodesic_distance_array(z, w):
    # clip guards arctanh against rounding to exactly 1 for near-boundary pairs
    return 2.0 * np.arctanh(np.minimum(pseudo_distance_array(z, w), 1.0 - 1e-16))


def moebius_pseudo_distance(z: PointLike, w: PointLike) -> float:
    """|(z - w) / (1 - conj(w) z)|, the Carathéodory distance of the disk."""
    return float(pseudo_distance_array(as_complex(z), as_complex(w)))


def disk_geodesic_distance(z: PointLike, w: PointLike) -> float:
    return float(2.0 * math.atanh(moebius_pseudo_distance(z, w)))


@dataclass(frozen=True)
class DiskAutomorphism:
    """phi(zeta) = e^{i*phase} (zeta - center) / (1 - conj(center) zeta)."""
    center: complex
    phase: float = 0.0

    def __post_init__(self):
        if not abs(self.center) < 1.0:
            raise PreconditionError(f"automorphism center {self.center} outside the disk")

    @property
    def rotation(self) -> complex:
        return complex(math.cos(self.phase), math.sin(self.phase))

    def __call__(self, zeta):
        a = self.center
        return self.rotation * (zeta - a) / (1.0 - np.conj(a) * zeta)

    def inverse(self, xi):
        a = self.center
        u = np.conj(self.rotation) * xi
        return (u + a) / (1.0 + np.conj(a) * u)

    def derivative(self, zeta):
        a = self.center
        return self.rotation * (1.0 - abs(a) ** 2) / (1.0 - np.conj(a) * zeta) ** 2

    def inverse_derivative(self, xi):
        a = self.center
        u = np.conj(self.rotation) * xi
        return np.conj(self.rotation) * (1.0 - abs(a) ** 2) / (1.0 + np.conj(a) * u) ** 2


@dataclass(frozen=True)
class DiskGeodesic:
    """Unit-speed geodesic from ``start`` to ``end``.

    ``chart`` sends start to 0 and end to the positive real number
    tanh(length / 2), so the curve is chart^{-1}(tanh(s / 2)) for s in [0, length].
    """
    start: complex
    end: complex
    chart: DiskAutomorphism
    length: float

    def point(self, s):
        return self.chart.inverse(np.tanh(np.asarray(s, dtype=float) / 2.0))

    def tangent(self, s):
        r = np.tanh(np.asarray(s, dtype=float) / 2.0)
        return self.chart.inverse_derivative(r) * 0.5 * (1.0 - r * r)


def _straightening_phase(z, w):
    d = (w - z) / (1.0 - np.conj(z) * w)
    return -np.angle(d), np.abs(d)


def disk_geodesic(z: PointLike, w: PointLike) -> DiskGeodesic:
    z, w = as_complex(z), as_complex(w)
    if z == w:
        raise DegenerateGeodesicError(f"no geodesic between coincident points {z}")
    phase, s = _straightening_phase(z, w)
    return DiskGeodesic(z, w, DiskAutomorphism(z, float(phase)), float(2.0 * math.atanh(s)))


def mirror_coefficient(z, w):
    """beta with m_{z,w}(v) = beta * conj(v), vectorized over complex arrays.

    Transport along the geodesic is done in the straightened chart, where it is
    multiplication by (1 - s^2) along the real diameter; the reflection at the
    far end negates the geodesic (real) component, i.e. v -> -conj(v).
    Coincident pairs fall back to the reflection across the imaginary axis.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    phase, s = _straightening_phase(z, w)
    phase = np.where(s > 0.0, phase, 0.0)
    rot = np.exp(1j * phase)
    one_minus = 1.0 - np.abs(z) ** 2
    d_start = rot / one_minus
    d_end = rot * one_minus / (1.0 - np.conj(z) * w) ** 2
    return -np.conj((1.0 - s * s) * d_start) / d_end


def mirror_map(z: PointLike, w: PointLike, v) -> complex:
    """Parallel transport of v from z to w followed by reflection in the
    hyperplane normal to the geodesic at w.

    v is a chart tangent vector at z, given as complex or (dx, dy).
    """
    z, w = as_complex(z), as_complex(w)
    if z == w:
        raise DegenerateGeodesicError("mirror map needs distinct points")
    if isinstance(v, (tuple, list, np.ndarray)):
        v = complex(float(v[0]), float(v[1]))
    return complex(mirror_coefficient(z, w) * np.conj(complex(v)))


def mirror_noise(x: np.ndarray, y: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Noise for Y under mirror coupling of dX = lambda(X) dB, dY = lambda(Y) dW.

    x, y: (N,) complex positions; xi: (N,) complex standard noise. The result is
    m_{x,y}(lambda(x) xi) / lambda(y), an orthogonal image of xi.
    """
    beta = mirror_coefficient(x, y) * metric_factor(x) / metric_factor(y)
    return beta * np.conj(xi)


def mirror_matrix(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(N, 2, 2) real reflection matrices of ``mirror_noise``."""
    beta = mirror_coefficient(x, y) * metric_factor(x) / metric_factor(y)
    c, d = beta.real, beta.imag
    return np.stack([np.stack([c, d], axis=-1), np.stack([d, -c], axis=-1)], axis=-2)
