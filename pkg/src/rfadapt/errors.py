"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment or kernel configuration."""


class SolverError(RuntimeError):
    """A linear-algebra solve failed or did not meet its residual target."""


class SequencingError(RuntimeError):
    """Trajectory tape received a non-monotone or misspaced timestamp."""


class SaturationError(FloatingPointError):
    """A mirror-map inverse overflowed the floating-point range."""


class SingularityError(RuntimeError):
    """Bodies approached closer than the configured distance floor."""
