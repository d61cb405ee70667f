"""
Complex hyperbolic space H^n(C) as the unit ball of C^n.

H^2(C) is simulated in the real chart R^4 = C^2, x = (a1, b1, a2, b2), where
its Brownian motion solves dX = A(X) dB.
"""

import math
from dataclasses import dataclass

import numpy as np

from errors import PreconditionError


@dataclass(frozen=True)
class BallPoint4:
    a1: float
    b1: float
    a2: float
    b2: float

    def __post_init__(self):
        if not self.norm_squared < 1.0:
            raise PreconditionError(f"{self.as_array()} is not inside the unit ball of R^4")

    @property
    def norm_squared(self) -> float:
        return self.a1 ** 2 + self.b1 ** 2 + self.a2 ** 2 + self.b2 ** 2

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.b1, self.a2, self.b2])

    def as_complex(self) -> np.ndarray:
        return np.array([complex(self.a1, self.b1), complex(self.a2, self.b2)])


def real_to_complex(x: np.ndarray) -> np.ndarray:
    """(..., 2n) real chart coordinates -> (..., n) complex."""
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def complex_to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def _complex_structure(x: np.ndarray) -> np.ndarray:
    """J x, multiplication by i in the real chart: (a, b) -> (-b, a) per coordinate."""
    jx = np.empty_like(x)
    jx[..., 0::2] = -x[..., 1::2]
    jx[..., 1::2] = x[..., 0::2]
    return jx


def chc2_diffusion_batch(x: np.ndarray) -> np.ndarray:
    """A(x) for a batch of states, shape (N, 4) -> (N, 4, 4).

    A(x) = 2 s (I - (x x^T + Jx Jx^T) / (1 + s)), s = sqrt(1 - |x|^2), which is
    the entrywise matrix of the H^2(C) Brownian motion. x and Jx span the complex
    line through x, where A acts as 2 s^2; on its complement A acts as 2 s.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r2 = np.einsum("ni,ni->n", x, x)
    if np.any(r2 >= 1.0):
        raise PreconditionError("diffusion matrix requested outside the unit ball")
    s = np.sqrt(1.0 - r2)
    jx = _complex_structure(x)
    line = np.einsum("ni,nj->nij", x, x) + np.einsum("ni,nj->nij", jx, jx)
    eye = np.eye(x.shape[-1])
    return (2.0 * s)[:, None, None] * (eye - line / (1.0 + s)[:, None, None])


def chc2_diffusion_matrix(x) -> np.ndarray:
    if isinstance(x, BallPoint4):
        x = x.as_array()
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise PreconditionError(f"expected a point of R^4, got shape {x.shape}")
    return chc2_diffusion_batch(x[None, :])[0]


def ball_automorphism(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Involutive automorphism phi_a of the unit ball of C^n, phi_a(a) = 0.

    phi_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z, a>), with P_a the orthogonal
    projection onto C a, Q_a = I - P_a and s_a = sqrt(1 - |a|^2).
    z may be (n,) or (N, n).
    """
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    aa = float(np.vdot(a, a).real)
    if aa >= 1.0:
        raise PreconditionError("automorphism center must lie inside the ball")
    za = z @ np.conj(a)
    if aa == 0.0:
        return -z
    proj = (za / aa)[..., None] * a
    s_a = math.sqrt(1.0 - aa)
    return (a - proj - s_a * (z - proj)) / (1.0 - za)[..., None]


def ball_pseudo_distance(p: np.ndarray, q: np.ndarray) -> float:
    """|phi_p(q)|, the Möbius distance of the ball (the disk formula at n = 1)."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    if np.vdot(p, p).real >= 1.0 or np.vdot(q, q).real >= 1.0:
        raise PreconditionError("points must lie inside the unit ball")
    return float(np.linalg.norm(ball_automorphism(p, q)))
