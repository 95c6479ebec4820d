"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes, so new errors should subclass one of the
three families below rather than ``Exception`` directly.
"""


class SearchPeersError(Exception):
    """Base class for all package errors."""


class DomainError(SearchPeersError, ValueError):
    """Invalid parameters or inputs (violated preconditions)."""


class DataContractError(SearchPeersError):
    """A file, panel or schema does not satisfy its declared contract."""


class StructuralError(DataContractError):
    """Panel structure is unusable (e.g. empty degree-cohort cells)."""


class GenerationError(DataContractError):
    """Synthetic data could not satisfy the requested constraints."""


class SchemaError(DataContractError):
    """An emitted or consumed artifact failed schema validation."""


class CollinearityError(DataContractError):
    """Regressors are rank deficient after absorbing fixed effects."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"regressor {column!r} is collinear with earlier columns or the fixed effects")


class NumericalError(SearchPeersError):
    """An iterative numerical routine failed."""


class SolverError(NumericalError):
    """Reservation-earnings fixed point did not converge."""

    def __init__(self, message, last_iterate=None, iterations=None):
        self.last_iterate = last_iterate
        self.iterations = iterations
        super().__init__(message)


class ConvergenceError(NumericalError):
    """Fixed-effect demeaning did not converge."""


class SpellTruncationError(NumericalError):
    """A simulated search spell exceeded the configured maximum duration."""
