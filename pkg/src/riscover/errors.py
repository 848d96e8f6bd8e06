"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Inconsistent geometry (e.g. an arcsin argument well outside [-1, 1])."""


class PoleError(ArithmeticError):
    """A moment-generating function was evaluated past its pole."""


class NonConvergenceError(RuntimeError):
    """A numerical routine exhausted its evaluation budget."""


class ConfigError(ValueError):
    """Invalid or unparsable experiment configuration."""
