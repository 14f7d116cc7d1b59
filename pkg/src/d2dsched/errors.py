"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument violates a documented precondition."""


class CapacityError(RuntimeError):
    """A combinatorial search would exceed the configured action-space cap."""


class ContractError(ValueError):
    """A value handed between components violates its stated range contract."""


class AccountingError(LookupError):
    """Regret accounting needs a ground-truth mean that was never supplied."""


class ConfigError(ValueError):
    """Experiment configuration failed validation.

    ``key`` names the offending entry when one can be identified.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class QuadratureError(ArithmeticError):
    """Numerical integration did not converge within its budget.

    ``estimate`` carries the best partial value so callers can log it.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
