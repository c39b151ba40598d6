"""Exception types shared across the package."""


class BackflowLabError(Exception):
    """Base class for all package errors."""


class NonConvergence(BackflowLabError):
    """An adaptive numerical procedure ran out of budget before meeting its tolerance."""


class InvalidBracket(BackflowLabError):
    """Root bracket endpoints do not straddle a sign change."""


class DegenerateState(BackflowLabError):
    """The superposition is (numerically) the zero vector and cannot be normalized."""


class Unattainable(BackflowLabError):
    """No admissible parameter value reaches the requested target."""


class WindowTooSmall(BackflowLabError):
    """The extremal time interval touches the sampling window boundary."""


class NoBackflowAtZero(BackflowLabError):
    """The unsmoothed state shows no backflow, so a depth is undefined."""


class ConfigError(BackflowLabError):
    """Invalid run configuration."""
