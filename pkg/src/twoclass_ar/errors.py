"""Exception hierarchy shared by the pipeline stages."""


class TwoClassARError(Exception):
    """Base class for all pipeline failures."""


class ValidationError(TwoClassARError, ValueError):
    """An input violates a model or configuration invariant."""


class DomainError(ValidationError):
    pass


class InfeasibleEquilibriumError(ValidationError):
    pass


class OrderingError(ValidationError):
    """Class 1 must be the faster class (v1* > v2*)."""


class RegimeError(ValidationError):
    """The equilibrium is not in the congested regime required by the controller."""


class NumericalError(TwoClassARError):
    """A numerical stage failed (singular system, non-convergence, CFL...)."""


class ConstructionError(NumericalError):
    pass


class WellPosednessError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class GridError(NumericalError):
    pass


class CFLError(NumericalError):
    pass
