"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """Inputs break a structural precondition (grid, representation, shape)."""


class DomainError(ValueError):
    """A numeric argument lies outside the domain of the operation."""


class IterationLimitError(RuntimeError):
    """An iterative solver hit its iteration cap before converging."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateOperator(RuntimeError):
    """The operator is identically zero on the probed subspace."""


class InconsistencyError(RuntimeError):
    """A computed sequence violates a property it is guaranteed to have."""


class InvalidTestFunction(ValueError):
    """A test function does not decay inside the box."""


class InadmissibleWeight(ValueError):
    """A weight fails the admissibility conditions for the model."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict
