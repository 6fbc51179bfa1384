"""core/errors.py

Error classes for actiongraph.

Every failure raised by the library derives from ``ActionGraphError`` so that
callers (and the CLI) can catch one type at the boundary. Pipeline stages wrap
whatever escapes them into a ``StageError`` that names the stage.
"""

from typing import Any, Dict, Optional


class ActionGraphError(Exception):
    """Base exception for all actiongraph errors.

    Carries a human-readable message plus an optional context dictionary with
    whatever identifies the failing input (video id, chunk index, path, ...).
    The context is also what the CLI logs next to the message.

    Attributes:
        message: Human-readable error message
        context: Extra identifying data (if available)
    """

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = dict(context or {})


class DataError(ActionGraphError):
    """Input data is missing or malformed."""

    pass


class EmptySequence(DataError):
    """A label sequence has no frames."""

    def __init__(self, message: str = "empty sequence", context: Optional[Dict[str, Any]] = None):
        super().__init__(message, context)


class UnknownLabel(DataError):
    """A label token or id is not in the label map."""

    pass


class RowCountMismatch(DataError):
    """Feature rows and label frames disagree."""

    pass


class MissingFile(DataError):
    """A referenced file does not exist."""

    pass


class FormatError(DataError):
    """A file exists but does not follow its declared format."""

    pass


class LabelMapError(ActionGraphError):
    """Label map violates its invariants."""

    pass


class GraphError(ActionGraphError):
    """Invalid graph construction arguments or malformed graph."""

    pass


class EncoderError(ActionGraphError):
    """Semantic encoder failure."""

    pass


class MissingEmbedding(EncoderError):
    """Embedding table has no vector for a label.

    Raised by the table backend when a label token of the dataset is absent
    from the precomputed embedding table. The label is part of the message so
    the table can be fixed without digging through logs.
    """

    def __init__(self, label: str):
        super().__init__(f"no embedding for label '{label}'", {"label": label})
        self.label = label


class ModelError(ActionGraphError):
    """Directed GCN failure."""

    pass


class ShapeMismatch(ModelError):
    """Tensor shapes are inconsistent."""

    pass


class StaleCache(ModelError):
    """Forward cache does not belong to the current parameters."""

    pass


class EmptyDataset(ModelError):
    """Training was asked to run on nothing."""

    pass


class MetricsError(ActionGraphError):
    """Invalid metric arguments."""

    pass


class ConfigError(ActionGraphError):
    """Invalid run configuration."""

    pass


class UnknownSwitch(ConfigError):
    """Ablation preset name is not defined."""

    pass


class StageError(ActionGraphError):
    """A pipeline stage failed.

    Wraps the original exception and records the stage it escaped from, so a
    failing run reports "structure: ..." rather than a bare numpy traceback.
    """

    def __init__(self, stage: str, cause: BaseException):
        message = getattr(cause, "message", None) or str(cause) or type(cause).__name__
        context = dict(getattr(cause, "context", {}) or {})
        context["stage"] = stage
        super().__init__(f"{stage}: {message}", context)
        self.stage = stage
        self.cause = cause


class ErrorMapper:
    """Attribute arbitrary exceptions to pipeline stages."""

    @staticmethod
    def map_stage_error(stage: str, error: BaseException) -> StageError:
        """Wrap ``error`` into a ``StageError`` for ``stage``.

        An error that is already a ``StageError`` keeps its original stage.
        """
        if isinstance(error, StageError):
            return error
        return StageError(stage, error)


def raise_unknown_switch(kind: str, name: str, known) -> None:
    """Raise ``UnknownSwitch`` listing the presets that do exist.

    Args:
        kind: The preset family ("edges", "modalities", ...)
        name: The name that was asked for
        known: Iterable of valid names

    Raises:
        UnknownSwitch: Always
    """
    raise UnknownSwitch(
        f"unknown {kind} preset '{name}'; expected one of: {', '.join(sorted(known))}",
        {"kind": kind, "preset": name},
    )
