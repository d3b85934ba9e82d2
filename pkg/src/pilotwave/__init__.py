"""Two-particle Bohmian dynamics: exact configuration-space evolution versus
coupled single-particle pilot waves with conditional-wavefunction towers."""
from .core import ComplexField, SpatialGrid
from .errors import (
    AlignmentError,
    ConfigError,
    DegenerateSliceError,
    InvalidArgumentError,
    InvalidGridError,
    NumericalBlowupError,
    OutOfDomainError,
    PilotwaveError,
)
from .units import UNITS

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "ComplexField",
    "ConfigError",
    "DegenerateSliceError",
    "InvalidArgumentError",
    "InvalidGridError",
    "NumericalBlowupError",
    "OutOfDomainError",
    "PilotwaveError",
    "SpatialGrid",
    "UNITS",
    "data_path",
]


def data_path(name: str):
    """Path of a shipped scenario or model file (e.g. ``"benchmark_C-1.json"``)."""
    from importlib.resources import files

    return files(__name__) / "data" / name
