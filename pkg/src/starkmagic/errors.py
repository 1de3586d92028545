"""Exception hierarchy shared by all modules.

Each class carries the process exit code the CLI maps it to:
0 success, 2 config, 3 resource, 4 convergence, 5 resonance/singularity,
1 anything else.
"""


class StarkMagicError(Exception):
    exit_code = 1


class ContractError(StarkMagicError):
    """A caller violated a documented precondition (bad norm, non-unitary gate, ...)."""


class DimensionError(ContractError):
    """Operand does not fit the register (mask wider than L, length mismatch, ...)."""


class DomainError(StarkMagicError):
    """Mathematical domain violation (alpha <= 0, x < -1/e, r >= L, ...)."""


class ConfigError(StarkMagicError):
    exit_code = 2


class ResourceError(StarkMagicError):
    exit_code = 3


class ConvergenceError(StarkMagicError):
    exit_code = 4

    def __init__(self, message, residual=None, best=None):
        super().__init__(message)
        self.residual = residual
        self.best = best


class ResonanceError(StarkMagicError):
    """A perturbative energy denominator hit (near-)zero; parameters are named in the message."""

    exit_code = 5
