"""Exception types raised by nystromkit."""


class NystromError(Exception):
    """Base class for all library errors."""


class NonConvergence(NystromError):
    pass


class NotPsd(NystromError):
    pass


class NotPositiveDefinite(NystromError):
    pass


class SingularK11(NystromError):
    """The covariance carries (numerically) no energy in the leading eigenspace."""


class ZeroTail(NystromError):
    """All trailing eigenvalues vanish, so the quality factors are undefined."""


class InvalidOversampling(NystromError, ValueError):
    pass


class InvalidRank(NystromError, ValueError):
    pass


class InvalidTrials(NystromError, ValueError):
    pass


class ShapeMismatch(NystromError, ValueError):
    pass


class OutOfDomain(NystromError, ValueError):
    pass


class TooManyNodes(NystromError, ValueError):
    pass


class ParseError(NystromError, ValueError):
    """Malformed matrix file, kernel id or config file."""


class ConfigError(ParseError):
    """Invalid experiment configuration; ``keys`` lists the offending entries."""

    def __init__(self, message: str, keys=()):
        super().__init__(message)
        self.keys = tuple(keys)
