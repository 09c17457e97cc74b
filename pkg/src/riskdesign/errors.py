"""Exception hierarchy shared by the library and the CLI."""


class RiskDesignError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class DomainError(RiskDesignError, ValueError):
    """Input outside the admissible domain (bad parameter, action, shape)."""

    exit_code = 2


class SchemaError(DomainError):
    """Scenario or report document does not match the schema."""


class UnsupportedError(RiskDesignError):
    """Operation is undefined for the given model (e.g. derivative of a discrete family)."""

    exit_code = 2


class InfeasibleError(RiskDesignError):
    """Participation constraint cannot be met."""

    exit_code = 3

    def __init__(self, message, minimal_cost=None):
        super().__init__(message)
        self.minimal_cost = minimal_cost


class NumericalError(RiskDesignError):
    """Numerical failure: step collapse, degenerate Jacobian, non-isolated optimum."""

    exit_code = 4


class InternalError(RiskDesignError):
    """Broken invariant that indicates a bug (e.g. an infeasible envelope LP)."""

    exit_code = 4
