"""Exception types raised across the package."""


class DrPoseError(Exception):
    """Base class for every error raised by drpose."""


class NearSingularRotation(DrPoseError, ValueError):
    """Rotation angle at or too close to pi for a Gibbs-vector representation."""


class BehindCamera(DrPoseError, ValueError):
    """A point projects with non-positive depth."""


class DimensionMismatch(DrPoseError, ValueError):
    pass


class InsufficientFeatures(DrPoseError):
    """Fewer than the minimum number of features are tracked in every view."""


class DegenerateBatch(DrPoseError):
    """A perturbation batch could not reach full rank."""


class RankDeficientBatch(DrPoseError, ValueError):
    pass


class SingularNormalEquations(DrPoseError, ValueError):
    pass


class InitialGuessInfeasible(DrPoseError):
    """The initial guess shares too few features with the reference observation."""


class Degenerate(DrPoseError):
    """The solve cannot continue (re-initialization budget spent, rank loss, ...)."""


class DegenerateModel(DrPoseError):
    pass


class ConfigError(DrPoseError, ValueError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass
