"""Partial-determinant tests for correlated state-preparation and measurement errors."""
__version__ = "0.1.0"

from .errors import PDTomoError
from .model import CorrelationConfig, DataTensor, random_devices, synthesize
from .pd import PDResult, Square, partial_determinant, reduced_pd
from .schemes import BracketScheme, build_square, enumerate_schemes, parse, sensitivity

__all__ = [
    "BracketScheme", "CorrelationConfig", "DataTensor", "PDResult", "PDTomoError", "Square",
    "build_square", "enumerate_schemes", "parse", "partial_determinant", "random_devices",
    "reduced_pd", "sensitivity", "synthesize",
]
