class QThermoError(ValueError):
    """Base class for numerical rejections raised by the library."""


class NotHermitianError(QThermoError):
    pass


class DimensionError(QThermoError):
    pass


class InvalidStateError(QThermoError):
    pass


class BranchCutError(QThermoError):
    """An eigenphase sits on the branch cut of the principal logarithm."""


class BudgetExceededError(QThermoError):
    pass
