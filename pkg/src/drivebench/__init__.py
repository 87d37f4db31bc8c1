"""Closed-loop 2D driving benchmark toolkit: a rule-based expert planner,
dataset curation utilities and driving-score mathematics."""
from .kernels import USE_NUMBA, backend_name

__version__ = "0.1.0"
__all__ = ["USE_NUMBA", "backend_name", "__version__"]
