"""Exception hierarchy.

Every failure raised by the library derives from :class:`SpduffError`, so the
CLI can separate domain failures (exit code 1) from usage errors (exit code 2).
"""


class SpduffError(Exception):
    """Base class for all library errors."""


class EvaluationOverflow(SpduffError):
    pass


class UnknownInstance(SpduffError):
    pass


class AssumptionA1Violated(SpduffError):
    """The critical manifold is not S-shaped with exactly two folds."""


class BranchDomainError(SpduffError):
    pass


class ChartMarginTooLarge(SpduffError):
    pass


class InvalidDelta(SpduffError):
    pass


class NoTurningPoints(SpduffError):
    pass


class SeparatrixLevel(SpduffError):
    pass


class StiffnessFailure(SpduffError):
    pass


class Divergence(SpduffError):
    pass


class PolarSingularity(SpduffError):
    pass


class BranchDerivativeUnavailable(SpduffError):
    pass


class EpsilonTooLarge(SpduffError):
    """Grid-minimized rate constant is not positive.

    The offending grid point is kept on ``witness`` as a dict.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness or {}


class NeedsSweep(SpduffError):
    pass


class UsageError(SpduffError):
    """Bad command line or configuration input."""


class IoError(SpduffError):
    """An output path could not be written."""
