"""Selective encryption and fragmentation of byte streams and images."""
from .backend import kernels
from .errors import (
    AvailabilityError,
    CoefficientRangeError,
    IntegrityError,
    NonceReuseError,
    PolicyError,
    SefragError,
    StructuralError,
    UndefinedCorrelationError,
)
from .model import SchemeId, SecretKey

__version__ = "0.1.0"

__all__ = [
    "AvailabilityError",
    "CoefficientRangeError",
    "IntegrityError",
    "NonceReuseError",
    "PolicyError",
    "SchemeId",
    "SecretKey",
    "SefragError",
    "StructuralError",
    "UndefinedCorrelationError",
    "kernels",
    "__version__",
]
