"""Exception types shared across the package.

Plain ``ValueError`` is used for ordinary domain errors (bad arguments);
the classes here mark conditions that callers may want to branch on,
e.g. the CLI maps them to distinct exit codes.
"""


class CapacityError(RuntimeError):
    """Requested object exceeds a documented size/memory budget."""


class IntegrationError(RuntimeError):
    """Time propagation failed to converge within its step/subspace limits."""


class SymmetryAbsentError(ValueError):
    """A symmetry-resolved operation was requested on a graph lacking it."""


class DispersiveRegimeError(ValueError):
    """Circuit reduction outside the dispersive regime |detuning| > |g|."""


class ConfigError(ValueError):
    """Run configuration failed validation."""
