"""Exception hierarchy shared by every module.

The CLI maps :class:`ConfigError` to exit code 2 and every other
:class:`SuperheatError` to exit code 3.
"""


class SuperheatError(Exception):
    """Base class for all library errors."""


class ConfigError(SuperheatError, ValueError):
    """Malformed scenario or argument outside its documented range."""


class TailDivergence(SuperheatError):
    """The integral of 1/f over [s, inf) does not converge numerically."""


class NonPositiveSource(SuperheatError):
    """A sampled value of f or f' is not strictly positive."""


class OutOfRange(SuperheatError):
    """Argument of F^{-1} lies outside the range of F."""


class NoBracket(SuperheatError):
    """Bracket expansion for a monotone inversion hit its iteration cap."""


class NonConvergent(SuperheatError):
    """An extrapolated limit did not settle within tolerance."""


class EmptyBall(SuperheatError):
    """Ball radius smaller than half a grid cell."""


class SingularCell(SuperheatError):
    """F(u0) underflows (or F(u0)^{-r} overflows) at a grid cell."""

    def __init__(self, message, index=None, position=None):
        super().__init__(message)
        self.index = index
        self.position = position


class InsufficientLevels(SuperheatError):
    """Fewer than three refinement levels supplied."""


class CutoffTooSmall(SuperheatError):
    """Direct-kernel truncation radius below the Gaussian tail bound."""


class ZeroField(SuperheatError):
    """Norm of the input field vanishes."""


class RangeError(SuperheatError):
    """A transform argument leaves the range of F by more than the clamp slack."""


class NotApplicable(SuperheatError):
    """Transform or construction not defined for this nonlinearity."""


class NonPositive(SuperheatError):
    """Field touches the domain floor where a strictly positive one is required."""


class BlowupDetected(SuperheatError):
    """An iterate exceeded the blow-up cap."""

    def __init__(self, message, index=None, time=None, iteration=None):
        super().__init__(message)
        self.index = index
        self.time = time
        self.iteration = iteration


class NotConvex(SuperheatError):
    """Sampled second derivative of a growth function is negative."""


class CriticalExponent(SuperheatError):
    """Integrability exponent sits exactly on the critical line."""


class InversionFailure(SuperheatError):
    """Bracketing inversion of a growth function failed."""


class NoRoot(SuperheatError):
    """Left side of a time-bound inequality already exceeds gamma as T -> 0."""
