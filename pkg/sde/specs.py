"""Ready-made DiffusionSpec instances for the charts the lab simulates."""

from typing import Optional, Sequence

import numpy as np

import config
from comparison.radial import ComparisonDiffusion1D
from errors import PreconditionError
from geometry.complex_ball import chc2_diffusion_batch
from geometry.disk import geodesic_distance_array, metric_factor, to_complex

from .engine import DiffusionSpec


def _euclidean_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(x) - np.asarray(y), axis=-1)


def _inside_ball(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return np.einsum("ni,ni->n", x, x) < (1.0 - config.BOUNDARY_GUARD) ** 2


def disk_spec() -> DiffusionSpec:
    """Brownian motion of the curvature -1 disk: dX = (1 - |X|^2)/2 dB, no drift.

    The conformal chart has a vanishing Ito correction, so f(X) is a local
    martingale for every holomorphic f.
    """
    def diffusion(x):
        scale = metric_factor(to_complex(x))
        return scale[:, None, None] * np.eye(2)

    def drift(x):
        return np.zeros_like(np.atleast_2d(x))

    def distance(x, y):
        return geodesic_distance_array(to_complex(x), to_complex(y))

    return DiffusionSpec(2, diffusion, drift, _inside_ball, distance, name="disk", chart="disk")


def chc2_spec() -> DiffusionSpec:
    """Brownian motion of H^2(C) in the ball chart of R^4; distance is Euclidean."""
    def drift(x):
        return np.zeros_like(np.atleast_2d(x))

    return DiffusionSpec(4, chc2_diffusion_batch, drift, _inside_ball, _euclidean_distance,
                         name="h2c", chart="h2c")


def radial_spec(process: ComparisonDiffusion1D) -> DiffusionSpec:
    """The 1-D comparison diffusion, absorbed on reaching 0."""
    sigma = process.sigma

    def diffusion(r):
        return np.full((np.shape(r)[0], 1, 1), sigma)

    def drift(r):
        return np.asarray(process.drift(np.asarray(r)[:, 0]), dtype=float)[:, None]

    def in_domain(r):
        return np.atleast_2d(r)[:, 0] > 0.0

    return DiffusionSpec(1, diffusion, drift, in_domain, _euclidean_distance,
                         name=process.name, chart="radial",
                         drift_bound=abs(process.drift_constant or 0.0), constant_diffusion=True)


def euclidean_spec(dim: int, sigma: float = 1.0, drift: Optional[Sequence[float]] = None) -> DiffusionSpec:
    """dX = sigma dB + z dt on all of R^dim."""
    if dim < 1:
        raise PreconditionError(f"dim must be positive, got {dim}")
    if not sigma >= 0:
        raise PreconditionError(f"sigma must be nonnegative, got {sigma}")
    z = np.zeros(dim) if drift is None else np.asarray(drift, dtype=float)
    if z.shape != (dim,):
        raise PreconditionError(f"drift must have shape ({dim},), got {z.shape}")

    def diffusion(x):
        return np.broadcast_to(sigma * np.eye(dim), (np.shape(x)[0], dim, dim))

    def drift_field(x):
        return np.broadcast_to(z, np.shape(x))

    def in_domain(x):
        return np.ones(np.atleast_2d(x).shape[0], dtype=bool)

    return DiffusionSpec(dim, diffusion, drift_field, in_domain, _euclidean_distance,
                         name=f"euclidean{dim}", chart="euclidean",
                         drift_bound=float(np.linalg.norm(z)), constant_diffusion=True)


def spec_for(space: str) -> DiffusionSpec:
    """Lookup used by the experiment configs."""
    if space == "disk":
        return disk_spec()
    if space == "h2c":
        return chc2_spec()
    if space.startswith("euclidean"):
        dim = int(space[len("euclidean"):] or 1)
        return euclidean_spec(dim)
    raise PreconditionError(f"unknown space {space!r}")
