import enum
import math
from dataclasses import dataclass

from errors import CurvatureSignError, PreconditionError


class CurvatureFamily(enum.Enum):
    KAHLER = "kahler"
    QUATERNIONIC = "quaternionic"


class ModelSpace(enum.Enum):
    COMPLEX_EUCLIDEAN = "complex_euclidean"
    COMPLEX_PROJECTIVE = "complex_projective"
    COMPLEX_HYPERBOLIC = "complex_hyperbolic"
    QUATERNION_EUCLIDEAN = "quaternion_euclidean"
    QUATERNION_PROJECTIVE = "quaternion_projective"
    QUATERNION_HYPERBOLIC = "quaternion_hyperbolic"

    @property
    def family(self) -> CurvatureFamily:
        if self.name.startswith("COMPLEX"):
            return CurvatureFamily.KAHLER
        return CurvatureFamily.QUATERNIONIC


@dataclass(frozen=True)
class CurvatureProfile:
    """Lower curvature bounds and drift size feeding every closed-form bound.

    Kähler: H >= 4*k1 and Ric_perp >= (2n-2)*k2.
    Quaternionic: Q >= 12*k1 and Ric_perp >= (4n-4)*k2.
    The drift field Z of the generator 1/2*Laplacian + Z satisfies |Z| <= m.
    """
    family: CurvatureFamily
    n: int
    k1: float
    k2: float
    m: float = 0.0

    def __post_init__(self):
        if isinstance(self.family, str):
            object.__setattr__(self, "family", CurvatureFamily(self.family.lower()))
        if int(self.n) != self.n or self.n < 1:
            raise PreconditionError(f"dimension n must be a positive integer, got {self.n}")
        if not (math.isfinite(self.k1) and math.isfinite(self.k2)):
            raise PreconditionError("curvature parameters must be finite")
        if not self.m >= 0:
            raise PreconditionError(f"drift bound m must be nonnegative, got {self.m}")

    @property
    def is_kahler(self) -> bool:
        return self.family is CurvatureFamily.KAHLER

    def require_negative(self):
        """Reject profiles outside the k1, k2 < 0 hypotheses of the coupling theorems."""
        if not (self.k1 < 0 and self.k2 < 0):
            raise CurvatureSignError(
                f"coupling bounds need k1 < 0 and k2 < 0, got k1={self.k1}, k2={self.k2}"
            )

    @classmethod
    def for_model(cls, space: ModelSpace, dim: int, m: float = 0.0) -> "CurvatureProfile":
        """Sharp lower-bound parameters of a model space, read off its table row."""
        row = model_constants(space, dim)
        if space.family is CurvatureFamily.KAHLER:
            k1 = row.sectional_value / 4.0
            k2 = row.orth_ricci_value / (2 * dim - 2) if dim > 1 else k1
        else:
            k1 = row.sectional_value / 12.0
            k2 = row.orth_ricci_value / (4 * dim - 4) if dim > 1 else k1
        return cls(space.family, dim, k1, k2, m)


@dataclass(frozen=True)
class ModelSpaceConstants:
    space: ModelSpace
    dim: int
    sectional_value: float  # H for Kähler rows, Q for quaternionic rows
    orth_ricci_value: float


# (sectional value, orthogonal Ricci per unit of (2m-2) or (4m-4))
_TABLE = {
    ModelSpace.COMPLEX_EUCLIDEAN: (0.0, 0.0),
    ModelSpace.COMPLEX_PROJECTIVE: (4.0, 1.0),
    ModelSpace.COMPLEX_HYPERBOLIC: (-4.0, -1.0),
    ModelSpace.QUATERNION_EUCLIDEAN: (0.0, 0.0),
    ModelSpace.QUATERNION_PROJECTIVE: (12.0, 1.0),
    ModelSpace.QUATERNION_HYPERBOLIC: (-12.0, -1.0),
}


def model_constants(space: ModelSpace, dim: int) -> ModelSpaceConstants:
    if isinstance(space, str):
        space = ModelSpace(space.lower())
    if dim < 1:
        raise PreconditionError(f"dim must be >= 1, got {dim}")
    sectional, orth_unit = _TABLE[space]
    multiplier = (2 * dim - 2) if space.family is CurvatureFamily.KAHLER else (4 * dim - 4)
    # + 0.0 turns -0.0 (hyperbolic rows at dim 1) into 0.0
    return ModelSpaceConstants(space, dim, sectional, orth_unit * multiplier + 0.0)


# Curvature -1 disk: H = -1 >= 4*k1
DISK_PROFILE = CurvatureProfile(CurvatureFamily.KAHLER, 1, -0.25, -0.25, 0.0)
