class InputError(ValueError):
    """Malformed or out-of-range input data."""


class StructuralError(ValueError):
    """Network topology problem (disconnected graph, bad partition)."""


class SolverError(RuntimeError):
    """A numerical solve failed in a way the caller has to handle."""

    def __init__(self, message, area=None, iteration=None):
        super().__init__(message)
        self.area = area
        self.iteration = iteration
