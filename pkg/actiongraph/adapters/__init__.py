"""Adapters package for actiongraph."""

from .stub import StubEncoder
from .table import TableEncoder

__all__ = [
    "StubEncoder",
    "TableEncoder",
]
