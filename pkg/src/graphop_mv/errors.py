"""Exception and warning types shared across the package."""


class InvalidParameterError(ValueError):
    pass


class DimensionError(ValueError):
    """Array shapes do not match the grid or network space."""


class SelfAdjointnessError(ValueError):
    pass


class PositivityError(RuntimeError):
    """Density dropped below the hard positivity floor during a step."""

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class CFLViolationError(RuntimeError):
    """Step rejected because the advection CFL bound is exceeded."""

    def __init__(self, message, max_dt=None):
        super().__init__(message)
        self.max_dt = max_dt


class ConvergenceWarning(UserWarning):
    pass
