"""Exception types raised along the pulse-design pipeline."""


class DegenerateParametrization(ValueError):
    """The Gaussian sum never rises above zero on the evaluation grid."""


class BoundaryConditionError(ValueError):
    """Reference pulses do not start in |1> and end in |3>."""


class SingularMixingAngle(ValueError):
    """Both reference pulses vanish at a grid point, so theta is undefined."""


class NonPhysicalFrame(ValueError):
    """The rotated frame cannot be realised by real, finite laser pulses."""


class NormDriftError(RuntimeError):
    """Time integration lost unitarity beyond tolerance."""


class SeedRejectionError(RuntimeError):
    """Too many random draws were rejected while generating seeds."""
