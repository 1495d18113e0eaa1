"""Exception hierarchy.

Every domain failure raised by the package derives from :class:`MetricRamseyError`.
The command line maps these to exit code 1 and prints the class name, so the
class names double as stable error codes.
"""

from __future__ import annotations

import warnings


class MetricRamseyError(Exception):
    """Base class for all domain errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InvalidParameters(MetricRamseyError, ValueError):
    """A numeric parameter is outside its admissible range."""


# metric-core -------------------------------------------------------------

class NotSquare(MetricRamseyError, ValueError):
    pass


class AsymmetricMatrix(MetricRamseyError, ValueError):
    pass


class NegativeDistance(MetricRamseyError, ValueError):
    pass


class ZeroOffDiagonal(MetricRamseyError, ValueError):
    pass


class TriangleViolation(MetricRamseyError, ValueError):
    """Raised with ``witness = (i, j, k)`` such that d(i, k) > d(i, j) + d(j, k)."""

    def __init__(self, message: str, witness: tuple[int, int, int]):
        super().__init__(message)
        self.witness = witness


class DisconnectedGraph(MetricRamseyError, ValueError):
    pass


class NotBijection(MetricRamseyError, ValueError):
    pass


class SizeMismatch(MetricRamseyError, ValueError):
    pass


class InstanceTooLarge(MetricRamseyError, ValueError):
    pass


class InvalidSubset(MetricRamseyError, ValueError):
    pass


# hst ---------------------------------------------------------------------

class LabelMonotonicityViolation(MetricRamseyError, ValueError):
    pass


class DegenerateVertex(MetricRamseyError, ValueError):
    pass


class InvalidK(MetricRamseyError, ValueError):
    pass


class DegenerateComposition(MetricRamseyError, ValueError):
    pass


class InvalidBeta(MetricRamseyError, ValueError):
    pass


class InvalidH(MetricRamseyError, ValueError):
    pass


class DistortionPreconditionFailed(MetricRamseyError, ValueError):
    pass


# ramsey ------------------------------------------------------------------

class QTooSmall(MetricRamseyError, ValueError):
    pass


class AllZero(MetricRamseyError, ValueError):
    pass


class NotDecomposable(MetricRamseyError, ValueError):
    pass


class TTooSmall(MetricRamseyError, ValueError):
    pass


class AlphaTooSmall(MetricRamseyError, ValueError):
    pass


class AlphaAtMostTwo(MetricRamseyError, ValueError):
    """Strict-mode refusal for distortion targets at or below 2."""


class AlphaAtMostTwoWarning(UserWarning):
    """Distortion at most 2 admits no power-law guarantee; output is best effort."""


class SeparationTooSmall(MetricRamseyError, ValueError):
    pass


# spectral ----------------------------------------------------------------

class NotRegular(MetricRamseyError, ValueError):
    pass


class SubsetTooSmall(MetricRamseyError, ValueError):
    pass


class TOutOfRange(MetricRamseyError, ValueError):
    pass


class OutOfRange(MetricRamseyError, ValueError):
    pass


class StateSpaceTooLarge(MetricRamseyError, ValueError):
    pass


# instances ---------------------------------------------------------------

class DTooLarge(MetricRamseyError, ValueError):
    pass


class InfeasibleDegree(MetricRamseyError, ValueError):
    pass


class RejectionLimit(MetricRamseyError, RuntimeError):
    pass


class RetryLimitExceeded(MetricRamseyError, RuntimeError):
    pass


def warn_alpha_at_most_two(alpha: float) -> None:
    warnings.warn(
        f"distortion target {alpha} <= 2: no power-law subset guarantee exists; "
        "returning a best-effort subset",
        AlphaAtMostTwoWarning,
        stacklevel=3,
    )
