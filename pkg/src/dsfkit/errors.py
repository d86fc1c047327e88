"""Exception hierarchy shared by all dsfkit modules."""


class DsfError(Exception):
    """Base class for dsfkit errors."""


class InvalidModelError(DsfError, ValueError):
    pass


class SizeLimitError(DsfError, ValueError):
    pass


class StructuralError(DsfError, ValueError):
    """A plan, grid or state does not fit the object it is combined with."""


class ConvergenceError(DsfError, RuntimeError):
    """An iterative solver ran out of budget.

    ``residual`` holds the last residual norm (Lanczos) and ``trajectory``
    the energy history (imaginary-time search) when available.
    """

    def __init__(self, message, residual=None, trajectory=None):
        super().__init__(message)
        self.residual = residual
        self.trajectory = list(trajectory) if trajectory is not None else None


class AliasingError(DsfError, ValueError):
    pass


class NormalizationError(DsfError, ValueError):
    pass


class AlignmentError(DsfError, ValueError):
    pass


class ConfigError(DsfError, ValueError):
    pass
