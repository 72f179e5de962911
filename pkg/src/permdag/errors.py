"""Exception hierarchy shared by every module in the package."""


class PermDagError(Exception):
    """Base class for all package errors."""


class InputError(PermDagError, ValueError):
    """Bad arguments or malformed input (CLI exit code 2)."""


class NumericalError(PermDagError, ArithmeticError):
    """A numerical routine could not complete (CLI exit code 3)."""


class NotPositiveDefinite(NumericalError):
    def __init__(self, message="matrix is not positive definite", pivot=None, index=None):
        super().__init__(message)
        self.pivot = pivot
        self.index = index


class ImproperPrior(NumericalError):
    pass


class NoValidThreshold(NumericalError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class InvalidEdge(InputError):
    pass


class SupportViolation(InputError):
    pass


class InvalidFolds(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class EmptyEnsemble(InputError):
    pass


class InvalidSpec(InputError):
    pass
