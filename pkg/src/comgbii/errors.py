"""Exception hierarchy shared by all modules."""


class ComGbiiError(Exception):
    """Base class for package errors."""


class DomainError(ComGbiiError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class ExistenceError(ComGbiiError, ValueError):
    """A requested moment or risk measure does not exist for the parameters."""


class ConstraintError(ComGbiiError, ValueError):
    """Shape parameters violate the mode-existence constraints p*nu > 1."""


class ConvergenceError(ComGbiiError, ArithmeticError):
    """An iterative numerical routine failed to reach its tolerance."""


class NonFiniteError(ComGbiiError, ArithmeticError):
    """A likelihood term overflowed or became NaN."""


class DataError(ComGbiiError, ValueError):
    """Malformed input data; the message names the offending row/column."""


class SingularHessianError(ComGbiiError, ArithmeticError):
    """The observed information matrix could not be inverted."""

    def __init__(self, message: str, condition_number: float):
        super().__init__(message)
        self.condition_number = condition_number
