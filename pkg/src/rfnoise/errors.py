"""Exception hierarchy shared by every stage of the modeling flow."""


class RFNoiseError(Exception):
    """Base class for all errors raised by rfnoise."""


class SignalError(RFNoiseError, ValueError):
    """Invalid stimulus request (empty, aliased, degenerate, ...)."""


class EmptyRequestError(SignalError):
    pass


class SpectralBoundsError(SignalError):
    pass


class AliasingError(SignalError):
    pass


class DegenerateToneError(SignalError):
    pass


class DomainError(SignalError):
    """Non-positive amplitude or impedance handed to a log conversion."""


class CaptureFormatError(RFNoiseError, ValueError):
    """Malformed capture CSV. ``line`` is 1-based, or None if not line-specific."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class PipelineError(RFNoiseError, ValueError):
    """Preprocessing failure: undefined correlation, empty overlap, short capture."""


class DivergenceError(RFNoiseError, ArithmeticError):
    def __init__(self, message, epoch=None):
        self.epoch = epoch
        super().__init__(message if epoch is None else f"epoch {epoch}: {message}")


class MetrologyError(RFNoiseError, ValueError):
    pass


class IncoherentToneError(MetrologyError):
    pass


class UnreliableIM3Error(MetrologyError):
    pass


class ConfigError(RFNoiseError, ValueError):
    pass
