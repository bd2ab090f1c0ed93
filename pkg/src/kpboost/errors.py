"""Exception hierarchy. The CLI maps each family to an exit code."""


class KPBoostError(Exception):
    exit_code = 1


class ConfigError(KPBoostError, ValueError):
    exit_code = 2


class ParameterError(ConfigError):
    """Invalid numeric parameter (sigma <= 0, negative step, bad factors)."""


class DataError(KPBoostError, ValueError):
    exit_code = 3


class ShapeError(KPBoostError, ValueError):
    exit_code = 3


class MetricUndefinedError(KPBoostError, ValueError):
    exit_code = 4


class SelectionError(KPBoostError, ValueError):
    exit_code = 2


class NumericalError(KPBoostError, ArithmeticError):
    exit_code = 4


class InfeasibleError(NumericalError):
    """Dual problem with a single label value."""


class ConvergenceError(NumericalError):
    """Solver hit its iteration cap; ``model`` holds the last (best) iterate."""

    def __init__(self, msg, model=None):
        super().__init__(msg)
        self.model = model
