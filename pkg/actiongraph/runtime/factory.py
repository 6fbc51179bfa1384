"""runtime/factory.py

Factory for semantic encoders.

This module provides the entry point for creating the ``SemanticEncoder``
of a run with the backend and template its configuration asks for.
"""

import logging
from typing import Optional

from ..adapters.stub import StubEncoder
from ..adapters.table import TableEncoder
from ..core.errors import ActionGraphError, ConfigError, EncoderError
from ..core.semantic import SEMANTIC_DIM, PromptTemplate, SemanticEncoder
from ..config.settings import PromptConfig

logger = logging.getLogger(__name__)


class EncoderFactory:
    """Factory for ``SemanticEncoder`` instances.

    The stub backend needs nothing but a seed; the table backend needs the
    path of a precomputed embedding table. The semantic mode of an ablation
    decides the template: "raw" encodes the bare label token, "prompt" the
    configured template, and "none" needs no encoder at all.
    """

    @staticmethod
    def create_stub_encoder(
        seed: int = 0,
        dimension: int = SEMANTIC_DIM,
        template: PromptTemplate = PromptTemplate.ENSEMBLE,
    ) -> SemanticEncoder:
        """Create an encoder over the deterministic hashing stub.

        Example:
            >>> encoder = EncoderFactory.create_stub_encoder(seed=7, template=PromptTemplate.RAW)
            >>> encoder.encode_label("pour").shape
            (512,)
        """
        logger.info(
            "Creating stub semantic encoder",
            extra={
                "seed": seed,
                "dimension": dimension,
                "template": PromptTemplate(template).value,
            },
        )
        encoder = SemanticEncoder(StubEncoder(seed=seed, dimension=dimension), template)
        logger.info("Stub semantic encoder created successfully", extra={"mode": encoder.mode})
        return encoder

    @staticmethod
    def create_table_encoder(
        path: str, template: PromptTemplate = PromptTemplate.ENSEMBLE
    ) -> SemanticEncoder:
        """Create an encoder reading vectors from a JSON embedding table.

        Raises:
            EncoderError: If the table cannot be loaded
        """
        logger.info("Creating table semantic encoder", extra={"path": path})
        try:
            encoder = SemanticEncoder(TableEncoder.from_file(path), template)
        except ActionGraphError:
            raise
        except Exception as e:
            logger.error(f"Failed to load embedding table: {e}")
            raise EncoderError(f"Failed to load embedding table {path}: {e}") from e
        logger.info(
            "Table semantic encoder created successfully",
            extra={"path": path, "dimension": encoder.dimension, "mode": encoder.mode},
        )
        return encoder

    @staticmethod
    def from_config(
        prompt: PromptConfig, semantic_mode: str = "prompt", table_path: Optional[str] = None
    ) -> Optional[SemanticEncoder]:
        """Encoder for a run, or None when the semantic block is switched off."""
        if semantic_mode == "none":
            return None
        template = PromptTemplate.RAW if semantic_mode == "raw" else PromptTemplate(prompt.template)
        if prompt.backend == "table":
            if table_path is None:
                raise ConfigError("prompt.backend is 'table' but data.embedding_table is not set")
            return EncoderFactory.create_table_encoder(table_path, template)
        return EncoderFactory.create_stub_encoder(prompt.seed, prompt.dimension, template)
