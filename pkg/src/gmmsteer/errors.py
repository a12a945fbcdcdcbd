"""Exception types raised by the solvers."""


class SteeringError(Exception):
    """Base class for solver failures (as opposed to bad arguments)."""


class NotControllableError(SteeringError):
    """The system cannot reach arbitrary terminal states over the horizon."""


class ConditioningError(SteeringError):
    """A matrix that must be inverted is numerically singular."""


class InconsistentPolicyError(SteeringError):
    """A policy maps components of the same terminal index to different Gaussians."""
