"""Exception hierarchy shared by the simulator, profiler and tensor I/O."""


class TubSimError(Exception):
    """Base class for every error raised by tubsim."""


class RangeError(TubSimError, ValueError):
    """A value does not fit the signed range of its declared precision."""


class ConfigurationError(TubSimError, ValueError):
    """Array geometry or cube shapes do not match the configuration."""


class ValidationError(TubSimError, ValueError):
    """Inputs are inconsistent (shape mismatch, empty tensor, bad period...)."""


class TensorFormatError(TubSimError):
    """A tensor container file could not be parsed."""


class TextFormatError(TubSimError, ValueError):
    """A profile or calibration text document could not be parsed."""


class BadMagicError(TensorFormatError):
    pass


class UnknownDtypeError(TensorFormatError):
    pass


class PayloadLengthError(TensorFormatError):
    """Payload size disagrees with dtype and dims."""


class ElementRangeError(TensorFormatError, RangeError):
    """A decoded element lies outside the declared dtype range."""


class CalibrationError(TubSimError, KeyError):
    """A design point is missing from, or malformed in, a calibration table."""

    def __str__(self) -> str:
        # KeyError repr()s its message; keep it readable
        return str(self.args[0]) if self.args else ""
