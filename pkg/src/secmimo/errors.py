"""Exception hierarchy. The CLI maps these onto exit codes."""


class SecMimoError(Exception):
    """Base class for all package errors."""


class ValidationError(SecMimoError, ValueError):
    """Malformed input: bad configuration, out-of-range parameter, non-Hermitian matrix."""


class NumericalError(SecMimoError, ArithmeticError):
    """A numerical operation could not be carried out reliably."""


class NotPSDError(NumericalError):
    def __init__(self, min_eig, max_eig):
        self.min_eig = float(min_eig)
        self.max_eig = float(max_eig)
        super().__init__(
            f"matrix is not positive semidefinite: smallest eigenvalue {min_eig:.3e} "
            f"vs largest {max_eig:.3e}"
        )


class ConditioningError(NumericalError):
    def __init__(self, cond):
        self.cond = float(cond)
        super().__init__(f"matrix is numerically singular (condition number ~ {cond:.3e})")


class DegenerateError(NumericalError):
    """Zero-norm estimates, zero traces and similar degenerate configurations."""


class InfeasibleSplitError(ValidationError):
    pass


class NotApplicableError(ValidationError):
    """The requested scheme does not exist for this scenario (e.g. no eavesdropper null space)."""


class PreconditionError(ValidationError):
    pass
