"""Runtime package for actiongraph."""

from .factory import EncoderFactory

__all__ = [
    "EncoderFactory",
]
