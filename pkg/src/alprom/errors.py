"""Exception hierarchy.

``ConfigError`` maps to CLI exit code 1, every ``NumericalError`` to exit code 2.
"""


class AlpError(Exception):
    pass


class ConfigError(AlpError, ValueError):
    pass


class MeshError(AlpError, ValueError):
    pass


class NumericalError(AlpError, ArithmeticError):
    pass


class EigensolverError(NumericalError):
    pass


class CalibrationError(NumericalError):
    """Raised when no scattering parameter below ``chi_max`` meets the tolerance."""

    def __init__(self, message, best_chi, best_error):
        super().__init__(message)
        self.best_chi = best_chi
        self.best_error = best_error


class IllConditionedError(NumericalError):
    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


class RankDeficiencyError(NumericalError):
    pass
