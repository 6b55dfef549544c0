"""Exception and warning classes shared across the package."""


class JointSenseError(Exception):
    """Base class for errors raised by jointsense."""


class ConfigError(JointSenseError, ValueError):
    """Invalid scenario, trainer or experiment configuration."""


class DegenerateEvidenceError(JointSenseError, ValueError):
    """A sensor outcome has zero probability under the given belief."""


class ReducibleChainError(JointSenseError, ValueError):
    """Transition model has no unique stationary distribution."""


class UnboundedObjectiveError(JointSenseError, ValueError):
    """Zero power price with a positive gain: the power objective has no maximizer."""


class DimensionError(JointSenseError, ValueError):
    """Array shapes do not agree with the number of channels or users."""


class MissingTableError(JointSenseError, ValueError):
    """A sensing policy that needs a value table was called without one."""


class ConvergenceWarning(UserWarning):
    """An iterative procedure stopped at its iteration cap."""
