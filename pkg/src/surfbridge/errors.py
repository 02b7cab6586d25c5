"""Exception hierarchy.

Every error raised by the library derives from :class:`SurfBridgeError` and
from ``ValueError`` so callers can catch either.
"""


class SurfBridgeError(ValueError):
    pass


# geometry
class DegenerateGeometry(SurfBridgeError):
    pass


class DegenerateInput(SurfBridgeError):
    pass


# kernels
class InvalidTime(SurfBridgeError):
    pass


class IndexOutOfSchedule(SurfBridgeError):
    pass


class InvalidType(SurfBridgeError):
    pass


class InvalidK(SurfBridgeError):
    pass


class EmptyInput(SurfBridgeError):
    pass


# bridge
class ShapeMismatch(SurfBridgeError):
    pass


class TimeOutOfRange(SurfBridgeError):
    pass


class DegenerateTime(SurfBridgeError):
    pass


class NonFiniteState(SurfBridgeError):
    pass


# network / pipeline
class DimensionMismatch(SurfBridgeError):
    pass


class NegativeDistance(SurfBridgeError):
    pass


class NonFiniteComponent(SurfBridgeError):
    pass


class NonFiniteLoss(SurfBridgeError):
    def __init__(self, step, value):
        super().__init__(f"non-finite loss {value!r} at step {step}")
        self.step = step
        self.value = value


class EmptyReceptor(SurfBridgeError):
    pass


# io
class FormatError(SurfBridgeError):
    """Parser failure carrying a 1-based line number when one applies."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MalformedRecord(FormatError):
    pass


class EmptyStructure(FormatError):
    pass


class BadMagic(FormatError):
    pass


class CountMismatch(FormatError):
    pass


class NonFiniteValue(FormatError):
    pass


class UnknownKey(FormatError):
    pass


class UnparsableValue(FormatError):
    pass


# metrics
class LengthMismatch(SurfBridgeError):
    pass


class TooFewItems(SurfBridgeError):
    pass


class EmptyNativeSite(SurfBridgeError):
    pass


class DegenerateLabels(SurfBridgeError):
    pass


class EmptyCloud(SurfBridgeError):
    pass
