"""Exception hierarchy shared by the numerical modules and the CLI."""


class ValidationError(ValueError):
    """Invalid input: bad shapes, out-of-domain parameters, unknown config keys."""


class NumericalError(RuntimeError):
    """A numerical routine could not deliver a trustworthy answer."""


class NonConvergenceError(NumericalError):
    """Iterative solver exhausted its budget."""


class InvalidPredictionError(NumericalError):
    """A deterministic-equivalent formula is outside its domain of validity."""


class SingularSystemError(NumericalError):
    """A linear system that must be solved exactly is singular."""
