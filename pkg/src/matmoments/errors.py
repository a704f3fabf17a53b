"""Exception types raised across the package."""


class MatMomentsError(Exception):
    """Base class for all package errors."""


class InvalidMatrix(MatMomentsError, ValueError):
    """Matrix is non-finite, non-square or violates symmetry/hermiticity."""


class SingularMatrix(MatMomentsError, ValueError):
    pass


class DomainError(MatMomentsError, ValueError):
    """A parameter lies outside the domain of a special function or distribution."""


class NotInterior(MatMomentsError, ValueError):
    """Moment sequence is not in the interior of the moment space."""


class SingularHankel(MatMomentsError, ValueError):
    pass


class SingularRange(MatMomentsError, ValueError):
    """The range S_k^+ - S_k^- is not strictly positive definite."""


class InvalidCanonical(MatMomentsError, ValueError):
    """A canonical moment lies on or outside the boundary of (0, I)."""


class WeightError(MatMomentsError, ValueError):
    pass


class TooFewSamples(MatMomentsError, ValueError):
    pass


class ConfigError(MatMomentsError, ValueError):
    pass
