"""Economic MPC of AC distribution feeders, solved centrally or with ALADIN."""

from .errors import InputError, SolverError, StructuralError

__version__ = "0.1.0"

__all__ = ["InputError", "SolverError", "StructuralError", "__version__"]
