"""Exception types shared across the package."""


class DomainError(ValueError):
    """Raised for parameters or time points outside the model's support."""


class DataError(ValueError):
    """Invalid or inconsistent input data (cohort files, covariates, specs)."""


class NonFiniteLikelihood(ArithmeticError):
    """The log-likelihood is not finite for some observations."""

    def __init__(self, indices, message=None):
        self.indices = list(indices)
        shown = ", ".join(str(i) for i in self.indices[:10])
        more = "" if len(self.indices) <= 10 else f" (+{len(self.indices) - 10} more)"
        super().__init__(message or f"non-finite log-likelihood at observations {shown}{more}")


class IdentifiabilityError(ValueError):
    """A parameter cannot be estimated from the data at hand."""


class SingularHessianError(ArithmeticError):
    """The observed information matrix cannot be inverted."""

    def __init__(self, message, condition_number=float("nan")):
        self.condition_number = condition_number
        super().__init__(f"{message} (condition number {condition_number:.3g})")
