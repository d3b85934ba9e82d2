"""Exception hierarchy shared by all layers."""


class PilotwaveError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(PilotwaveError, ValueError):
    pass


class InvalidGridError(PilotwaveError, ValueError):
    pass


class OutOfDomainError(PilotwaveError):
    """A position fell outside the grid extent (e.g. a trajectory left the box)."""


class NumericalBlowupError(PilotwaveError):
    """NaN/Inf or runaway growth in a field; ``step`` is the offending step index."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class DegenerateSliceError(PilotwaveError):
    """Every point of a conditional slice is below the node floor."""


class AlignmentError(PilotwaveError, ValueError):
    """Two time series do not share the same time stamps."""


class ConfigError(PilotwaveError, ValueError):
    """Invalid scenario or model file. ``field`` names the offending key."""

    def __init__(self, message, field=None, line=None):
        parts = [message]
        if field is not None:
            parts.append(f"field={field!r}")
        if line is not None:
            parts.append(f"line={line}")
        super().__init__("; ".join(parts))
        self.message = message
        self.field = field
        self.line = line

    def at_line_of(self, text):
        """Copy of this error with ``line`` set to where the field's key appears in ``text``."""
        if self.line is not None or not self.field:
            return self
        key = str(self.field).split(".")[-1].split("[")[0]
        for i, row in enumerate(text.splitlines(), start=1):
            if f'"{key}"' in row:
                return ConfigError(self.message, self.field, i)
        return self
