"""Exit-time laws of Markov mixture processes."""

from .errors import (
    ConvergenceError,
    ImpossibleObservationError,
    InfeasibleConditioningError,
    ModelValidationError,
    PhasemixError,
    ShapeError,
    SingularMatrixError,
    StructureMismatchError,
    UnsupportedSpectrumError,
)
from .model import ClosedSetFamily, MixtureModel, block_partition, structured_blocks, validate
from .inference import (
    AliveCurrentOnly,
    AliveFull,
    AliveInitial,
    CurrentOnly,
    FullPath,
    InitialAndCurrent,
    InitialOnly,
    NoInformation,
    PastOnlyFull,
    PathRecord,
    condition,
)

__all__ = [
    "AliveCurrentOnly", "AliveFull", "AliveInitial", "ClosedSetFamily", "ConvergenceError", "CurrentOnly",
    "FullPath", "ImpossibleObservationError", "InfeasibleConditioningError", "InitialAndCurrent",
    "InitialOnly", "MixtureModel", "ModelValidationError", "NoInformation", "PastOnlyFull", "PathRecord",
    "PhasemixError", "ShapeError", "SingularMatrixError", "StructureMismatchError",
    "UnsupportedSpectrumError", "block_partition", "condition", "structured_blocks", "validate",
]
