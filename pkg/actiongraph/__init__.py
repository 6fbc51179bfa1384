"""actiongraph

Graph-based temporal action segmentation.

Frame label sequences become directed video graphs; visual, structural
(node2vec) and semantic (prompted label embedding) node features are fused
and classified by a two-layer directed graph convolutional network, and
predictions are scored with the standard segmentation metrics.
"""

__version__ = "0.1.0"

from .core.errors import (  # noqa: E402
    ActionGraphError,
    ConfigError,
    DataError,
    EncoderError,
    GraphError,
    MetricsError,
    ModelError,
    StageError,
)
from .core.graph import FrameSequence, LabelMap, VideoGraph, adjacency, build_graph  # noqa: E402
from .core.metrics import MetricsReport, full_report  # noqa: E402
from .core.model import HyperParams, ModelParams  # noqa: E402
from .core.training import predict, train  # noqa: E402
from .config.settings import RunConfig, load_config  # noqa: E402
from .runtime.factory import EncoderFactory  # noqa: E402

__all__ = [
    # Graphs
    "LabelMap",
    "FrameSequence",
    "VideoGraph",
    "build_graph",
    "adjacency",
    # Model
    "HyperParams",
    "ModelParams",
    "train",
    "predict",
    # Evaluation
    "MetricsReport",
    "full_report",
    # Configuration and factory
    "RunConfig",
    "load_config",
    "EncoderFactory",
    # Error classes
    "ActionGraphError",
    "DataError",
    "GraphError",
    "EncoderError",
    "ModelError",
    "MetricsError",
    "ConfigError",
    "StageError",
]
