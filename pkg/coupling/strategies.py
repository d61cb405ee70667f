"""
Markovian coupling rules: how the second process's noise is built from the first's.

For dX = A(X) dB and dY = A(Y) dW the strategy supplies dW = R(x, y) dB
(or fresh noise for the independent coupling). R is orthogonal, so W is
again a standard Brownian motion and both marginals keep their law.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import AlreadyCoupledError, PreconditionError
from geometry.disk import from_complex, mirror_matrix, mirror_noise, to_complex
from sde.engine import DiffusionSpec

logger = logging.getLogger("coupling_lab")

MIRROR_CHARTS = ("disk", "euclidean", "radial")


class CouplingKind(enum.Enum):
    SYNCHRONOUS = "synchronous"
    INDEPENDENT = "independent"
    MIRROR = "mirror"


@dataclass(frozen=True)
class CouplingStrategy:
    kind: CouplingKind
    chart: str = "euclidean"

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", CouplingKind(self.kind.lower()))
        if self.kind is CouplingKind.MIRROR and self.chart not in MIRROR_CHARTS:
            raise PreconditionError(f"mirror coupling is not available on the {self.chart} chart")

    @classmethod
    def for_spec(cls, kind, spec: DiffusionSpec) -> "CouplingStrategy":
        return cls(kind, spec.chart)

    @property
    def is_mirror(self) -> bool:
        return self.kind is CouplingKind.MIRROR

    @property
    def needs_fresh_noise(self) -> bool:
        return self.kind is CouplingKind.INDEPENDENT


def _unit_separation(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = y - x
    norm = np.linalg.norm(diff, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise AlreadyCoupledError("mirror noise requested for coincident states")
    return diff / norm


def _mirror(chart: str, x: np.ndarray, y: np.ndarray, xi: np.ndarray) -> np.ndarray:
    if np.any(np.all(x == y, axis=-1)):
        raise AlreadyCoupledError("mirror noise requested for coincident states; check coalescence first")
    if chart == "disk":
        return from_complex(mirror_noise(to_complex(x), to_complex(y), to_complex(xi)))
    if chart == "radial":
        return -xi
    # Euclidean reflection across the hyperplane normal to y - x
    e = _unit_separation(x, y)
    return xi - 2.0 * np.sum(xi * e, axis=-1, keepdims=True) * e


def couple_noise(strategy: CouplingStrategy, x, y, xi, fresh: Optional[np.ndarray] = None) -> np.ndarray:
    """Noise driving Y given the noise xi driving X.

    Accepts single states (dim,) or batches (N, dim). ``fresh`` is the
    independent draw used by the independent coupling.
    """
    single = np.ndim(xi) == 1
    x, y, xi = (np.atleast_2d(np.asarray(v, dtype=float)) for v in (x, y, xi))
    if strategy.kind is CouplingKind.SYNCHRONOUS:
        out = xi.copy()
    elif strategy.kind is CouplingKind.INDEPENDENT:
        if fresh is None:
            raise PreconditionError("the independent coupling needs a fresh noise draw")
        out = np.atleast_2d(np.asarray(fresh, dtype=float))
    else:
        out = _mirror(strategy.chart, x, y, xi)
    return out[0] if single else out


def correlation_matrix(strategy: CouplingStrategy, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """(N, dim, dim) matrices R with dW = R dB; zero for the independent coupling.

    Coincident pairs under the mirror coupling get the identity, matching the
    synchronous fallback the simulator uses near coalescence.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, dim = x.shape
    eye = np.broadcast_to(np.eye(dim), (n, dim, dim)).copy()
    if strategy.kind is CouplingKind.SYNCHRONOUS:
        return eye
    if strategy.kind is CouplingKind.INDEPENDENT:
        return np.zeros((n, dim, dim))
    apart = ~np.all(x == y, axis=-1)
    if not apart.any():
        return eye
    if strategy.chart == "disk":
        eye[apart] = mirror_matrix(to_complex(x[apart]), to_complex(y[apart]))
    elif strategy.chart == "radial":
        eye[apart] = -np.eye(dim)
    else:
        e = _unit_separation(x[apart], y[apart])
        eye[apart] = np.eye(dim) - 2.0 * np.einsum("ni,nj->nij", e, e)
    return eye


def cross_covariance(spec: DiffusionSpec, strategy: CouplingStrategy, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """C(x, y) = A(x) R^T A(y)^T, the instantaneous covariance of dX and dY."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    r = correlation_matrix(strategy, x, y)
    return np.einsum("nij,nkj,nlk->nil", spec.diffusion(x), r, spec.diffusion(y))
