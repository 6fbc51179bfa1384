"""Core package for actiongraph."""

from .errors import (
    ActionGraphError,
    ConfigError,
    DataError,
    EmptyDataset,
    EmptySequence,
    EncoderError,
    ErrorMapper,
    FormatError,
    GraphError,
    LabelMapError,
    MetricsError,
    MissingEmbedding,
    MissingFile,
    ModelError,
    RowCountMismatch,
    ShapeMismatch,
    StageError,
    StaleCache,
    UnknownLabel,
    UnknownSwitch,
)
from .graph import (
    AdjacencyMatrix,
    Edge,
    EdgeKind,
    FrameSequence,
    LabelMap,
    VideoGraph,
    adjacency,
    build_graph,
    chunk,
    segment_runs,
)
from .switches import Switches, get_edge_preset, get_modality_preset

__all__ = [
    "LabelMap",
    "FrameSequence",
    "EdgeKind",
    "Edge",
    "VideoGraph",
    "AdjacencyMatrix",
    "segment_runs",
    "build_graph",
    "chunk",
    "adjacency",
    "Switches",
    "get_edge_preset",
    "get_modality_preset",
    "ActionGraphError",
    "DataError",
    "EmptySequence",
    "UnknownLabel",
    "RowCountMismatch",
    "MissingFile",
    "FormatError",
    "LabelMapError",
    "GraphError",
    "EncoderError",
    "MissingEmbedding",
    "ModelError",
    "ShapeMismatch",
    "StaleCache",
    "EmptyDataset",
    "MetricsError",
    "ConfigError",
    "UnknownSwitch",
    "StageError",
    "ErrorMapper",
]
