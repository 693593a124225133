"""Exception types shared across the package."""


class NumericFailure(RuntimeError):
    """Quadrature or root-finding did not reach the requested accuracy.

    Carries the best value obtained and the achieved error estimate.
    """

    def __init__(self, message, value=None, err_estimate=None):
        super().__init__(message)
        self.value = value
        self.err_estimate = err_estimate


class BudgetExceeded(RuntimeError):
    """A step budget ran out; ``partial`` holds whatever state was reached."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ExperimentInconclusive(RuntimeError):
    """An experiment cannot produce a usable estimate; carries a partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
