"""Exception hierarchy.

The CLI maps :class:`ConfigError` to exit 2 and :class:`NumericalError` to
exit 3; hypothesis violations raised by the media constructors are plain
``ValueError`` subclasses so they read naturally at call sites.
"""


class KppSpeedError(Exception):
    pass


class ConfigError(KppSpeedError):
    """A run configuration that cannot be parsed or resolved."""


class HypothesisError(KppSpeedError, ValueError):
    """Coefficients violate positivity, KPP or monostability requirements."""


class NumericalError(KppSpeedError):
    pass


class StabilityError(NumericalError):
    """The time step or discretization breaks the discrete maximum principle."""


class ConvergenceError(NumericalError):
    pass


class BracketError(NumericalError):
    """A minimizer/root/maximizer sits at the edge of its search bracket."""


class DomainError(NumericalError):
    """A computation asked for something outside its valid regime."""
