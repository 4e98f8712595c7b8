"""Exception types raised by the estimators."""


class RmsError(Exception):
    """Base class for all estimator errors."""


class ModelInstabilityError(RmsError):
    """A simulated state became non-finite."""

    def __init__(self, coordinate, step=None):
        self.coordinate = coordinate
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite value in coordinate {coordinate}{where}")


class BudgetExceededError(RmsError):
    """A simulation ran past its configured step budget."""


class ZeroCrossingsError(RmsError):
    """No inward crossing of the recurrency set was observed."""


class InsufficientSamplesError(RmsError):
    """Too few samples for the requested statistic."""


class DegenerateFitError(RmsError):
    """Pilot probabilities do not decay with importance."""


class UnstableSystemError(RmsError, ValueError):
    """The discrete-time linear recursion has spectral radius >= 1."""
