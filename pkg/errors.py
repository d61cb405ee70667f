class PreconditionError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class SingularityError(PreconditionError):
    """A positive-curvature branch was evaluated at or past its singularity."""


class DegenerateGeodesicError(PreconditionError):
    """A geodesic between two coincident points was requested."""


class AlreadyCoupledError(PreconditionError):
    """Mirror noise was requested for a pair that has already met."""


class CurvatureSignError(PreconditionError):
    """A theorem-level bound was evaluated outside its curvature hypotheses."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
