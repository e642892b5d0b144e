"""Exception hierarchy.

The CLI maps these onto exit codes: :class:`ParameterError` (and its
subclasses) exit with 1, :class:`NumericalError` with 3. I/O failures are
plain :class:`OSError` and exit with 2.
"""


class PopCompressError(Exception):
    """Base class for all package errors."""


class ParameterError(PopCompressError, ValueError):
    """Invalid argument: bad dimension, non-positive variance, shape mismatch."""


class DomainError(ParameterError):
    """Argument outside the domain where a closed form is defined."""


class RankError(ParameterError):
    """Too few samples for the least-squares problem to have a unique solution."""


class NumericalError(PopCompressError, ArithmeticError):
    """A computation failed numerically."""


class SingularityError(NumericalError):
    """Gram matrix too ill-conditioned to solve the normal equations."""


class TrainingError(NumericalError):
    """Training diverged (loss became non-finite)."""
