"""Quench simulator and analysis toolkit for magic and entanglement in tilted Ising chains."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContractError,
    ConvergenceError,
    DimensionError,
    DomainError,
    ResonanceError,
    ResourceError,
    StarkMagicError,
)
from .evolution import KrylovConfig, StrangStepSpec, TimeGrid
from .hamiltonian import ChainSpec, InitialStateSpec, LongRangeSpec, SparseHamiltonian
from .magic import MagicResult, PauliMomentTable, QuenchTrace, haar_reference, sre
from .states import BitString, PauliString, SeededRng, StateVector

__all__ = [
    "BitString",
    "ChainSpec",
    "ConfigError",
    "ContractError",
    "ConvergenceError",
    "DimensionError",
    "DomainError",
    "InitialStateSpec",
    "KrylovConfig",
    "LongRangeSpec",
    "MagicResult",
    "PauliMomentTable",
    "PauliString",
    "QuenchTrace",
    "ResonanceError",
    "ResourceError",
    "SeededRng",
    "SparseHamiltonian",
    "StarkMagicError",
    "StateVector",
    "StrangStepSpec",
    "TimeGrid",
    "haar_reference",
    "sre",
]
