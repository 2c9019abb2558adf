"""Exception hierarchy shared by all modules."""


class YMLabError(Exception):
    """Base class; ``stage`` is filled in by the scenario runner."""

    stage = None


class UnsupportedAlgebraError(YMLabError, ValueError):
    pass


class DegenerateAlgebraError(YMLabError, ValueError):
    pass


class InconsistentStructureConstantsError(YMLabError, ValueError):
    pass


class DimensionError(YMLabError, ValueError):
    pass


class ShapeError(YMLabError, ValueError):
    pass


class DiscretizationError(YMLabError, ValueError):
    """Background too strong for the lattice spacing."""


class InvalidGaugeError(YMLabError, ValueError):
    pass


class ParameterError(YMLabError, ValueError):
    pass


class ConvergenceError(YMLabError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SizeError(YMLabError, ValueError):
    pass


class FitDegeneracyError(YMLabError, ValueError):
    pass


class IntegrationError(YMLabError, RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or {}


class MismatchError(YMLabError, ValueError):
    pass


class LandauPoleError(YMLabError, ValueError):
    def __init__(self, message, pole_scale=None):
        super().__init__(message)
        self.pole_scale = pole_scale


class InvalidGraphError(YMLabError, ValueError):
    pass


class ConfigError(YMLabError, ValueError):
    pass
