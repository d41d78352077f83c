"""Entropy-rate identities for open quantum and classical linear systems."""

__version__ = "0.1.0"

from .errors import NumericalError, QdbError, ValidationError  # noqa: E402

__all__ = ["__version__", "QdbError", "ValidationError", "NumericalError"]
