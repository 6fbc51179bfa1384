"""config/settings.py

Run configuration for actiongraph.

A run is described by one JSON file whose top-level keys are the sections
below plus ``seed`` and ``output_dir``. Command-line flags are layered on top
as dotted keys ("hyper.epochs", "graph.gamma", ...), so every flag maps to a
config key and flags always win over the file.

The run seed is the only seed: it is copied into the walk, prompt and
training sections when the config is resolved.
"""

import dataclasses
import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from ..core.errors import ActionGraphError, ConfigError, MissingFile
from ..core.graph import DEFAULT_CHUNK_SIZE
from ..core.model import HyperParams
from ..core.semantic import SEMANTIC_DIM, PromptTemplate
from ..core.structure import WalkConfig
from ..core.switches import Switches

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

ABLATION_GRIDS = ("edges", "modalities", "hops", "semantic", "test_semantic")


@dataclass(frozen=True)
class DataConfig:
    """Where a dataset lives.

    ``labels_dir`` holds ``<video>.txt`` label files and ``features_dir`` the
    matching ``<video>.bin`` (with manifest) or ``<video>.tsv`` visual
    features. Test videos read their graph labels from ``pseudo_labels_dir``
    when it is set. ``splits`` lists split files; without them every video is
    used for both training and evaluation.
    """

    labels_dir: Optional[str] = None
    features_dir: Optional[str] = None
    label_map: Optional[str] = None
    pseudo_labels_dir: Optional[str] = None
    embedding_table: Optional[str] = None
    background: Optional[str] = None
    exclude_background: bool = False
    splits: Tuple[str, ...] = ()

    def check_paths(self) -> None:
        """Raise ``MissingFile`` for the first configured path that does not exist."""
        required = {
            "labels_dir": self.labels_dir,
            "features_dir": self.features_dir,
            "label_map": self.label_map,
        }
        for key, value in required.items():
            if value is None:
                raise ConfigError(f"data.{key} is not set")
        optional = {
            "pseudo_labels_dir": self.pseudo_labels_dir,
            "embedding_table": self.embedding_table,
        }
        for key, value in {**required, **optional}.items():
            if value is not None and not Path(value).exists():
                raise MissingFile(f"data.{key} does not exist: {value}", {"path": value})
        for split in self.splits:
            if not Path(split).is_file():
                raise MissingFile(f"split file does not exist: {split}", {"path": split})


@dataclass(frozen=True)
class GraphConfig:
    gamma: float = 0.0
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"graph.gamma must lie in [0, 1), got {self.gamma}")
        if self.chunk_size < 2:
            raise ConfigError(f"graph.chunk_size must be at least 2, got {self.chunk_size}")


@dataclass(frozen=True)
class PromptConfig:
    """Semantic encoder settings; ``backend`` is "stub" or "table"."""

    backend: str = "stub"
    template: str = PromptTemplate.ENSEMBLE.value
    dimension: int = SEMANTIC_DIM
    seed: int = 0

    def __post_init__(self):
        if self.backend not in ("stub", "table"):
            raise ConfigError(f"prompt.backend must be 'stub' or 'table', got '{self.backend}'")
        try:
            PromptTemplate(self.template)
        except ValueError:
            names = ", ".join(t.value for t in PromptTemplate)
            raise ConfigError(
                f"unknown prompt template '{self.template}'; expected one of: {names}"
            ) from None


@dataclass(frozen=True)
class AblationConfig:
    """Switches of a single run plus the grid explored by ``ablate``.

    ``drop_probability`` overrides the preset's own edge-drop probability
    when set. With ``test_semantic`` off, test graphs lose their semantic
    edges and test features their semantic block. ``oracle_test_labels``
    builds test graphs from ground truth instead of pseudo-labels.
    """

    edges: str = "all"
    modalities: str = "vis+str+sem"
    semantic: str = "prompt"
    drop_probability: Optional[float] = None
    test_semantic: bool = True
    oracle_test_labels: bool = False
    edge_grid: Tuple[str, ...] = tuple(Switches.EDGE_PRESETS)
    modality_grid: Tuple[str, ...] = tuple(Switches.MODALITY_PRESETS)
    hop_grid: Tuple[int, ...] = Switches.HOP_GRID
    semantic_grid: Tuple[str, ...] = ("none", "raw", "prompt")
    grids: Tuple[str, ...] = ABLATION_GRIDS

    def __post_init__(self):
        Switches.edge_preset(self.edges)
        Switches.modality_preset(self.modalities)
        Switches.require_semantic_mode(self.semantic)
        for name in self.edge_grid:
            Switches.edge_preset(name)
        for name in self.modality_grid:
            Switches.modality_preset(name)
        for mode in self.semantic_grid:
            Switches.require_semantic_mode(mode)
        unknown = set(self.grids) - set(ABLATION_GRIDS)
        if unknown:
            raise ConfigError(f"unknown ablation grids: {', '.join(sorted(unknown))}")
        if self.drop_probability is not None and not 0.0 <= self.drop_probability <= 1.0:
            raise ConfigError(f"drop_probability must lie in [0, 1], got {self.drop_probability}")


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of the desk-scale dataset generator."""

    num_classes: int = 3
    train_videos: int = 8
    test_videos: int = 4
    frames: int = 100
    visual_dim: int = 32
    min_run: int = 8
    max_run: int = 30
    cluster_scale: float = 3.0
    noise: float = 1.0
    relabel_probability: float = 0.1
    boundary_jitter: int = 2

    def __post_init__(self):
        if self.num_classes < 2 or self.frames < 2 or self.visual_dim < 1:
            raise ConfigError("synthetic data needs at least 2 classes, 2 frames and 1 feature")
        if self.train_videos < 1 or self.test_videos < 0:
            raise ConfigError("synthetic data needs at least one training video")
        if not 1 <= self.min_run <= self.max_run:
            raise ConfigError("synthetic run lengths must satisfy 1 <= min_run <= max_run")
        if not 0.0 <= self.relabel_probability <= 1.0 or self.boundary_jitter < 0:
            raise ConfigError("relabel probability must lie in [0, 1] and jitter be >= 0")


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    walk: WalkConfig = field(default_factory=WalkConfig)
    prompt: PromptConfig = field(default_factory=PromptConfig)
    hyper: HyperParams = field(default_factory=HyperParams)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    seed: int = 0
    output_dir: str = "runs/default"

    def with_seed(self, seed: int) -> "RunConfig":
        """Same config with ``seed`` propagated into every seeded section."""
        return replace(
            self,
            seed=seed,
            walk=replace(self.walk, seed=seed),
            prompt=replace(self.prompt, seed=seed),
            hyper=replace(self.hyper, seed=seed),
        )


_SECTIONS = {
    "data": DataConfig,
    "graph": GraphConfig,
    "walk": WalkConfig,
    "prompt": PromptConfig,
    "hyper": HyperParams,
    "ablation": AblationConfig,
    "synthetic": SyntheticConfig,
}
_TOP_LEVEL = {"seed", "output_dir"}
_PATH_KEYS = ("labels_dir", "features_dir", "label_map", "pseudo_labels_dir", "embedding_table")


def _section(cls, values: Mapping[str, Any], name: str):
    if not isinstance(values, Mapping):
        raise ConfigError(f"config section '{name}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {', '.join(sorted(unknown))}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ActionGraphError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid '{name}' section: {getattr(e, 'message', e)}") from e


def config_from_dict(data: Mapping[str, Any], base_dir: Optional[PathLike] = None) -> RunConfig:
    """Build a ``RunConfig`` from nested dictionaries.

    Relative data paths are resolved against ``base_dir`` (the directory of
    the config file).

    Raises:
        ConfigError: unknown keys or invalid values
    """
    unknown = set(data) - set(_SECTIONS) - _TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    sections = {name: _section(cls, data.get(name, {}), name) for name, cls in _SECTIONS.items()}
    if base_dir is not None:
        sections["data"] = _resolve_paths(sections["data"], Path(base_dir))
    try:
        seed = int(data.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigError(f"seed must be an integer, got {data.get('seed')!r}") from None
    output_dir = str(data.get("output_dir", "runs/default"))
    config = RunConfig(seed=seed, output_dir=output_dir, **sections)
    return config.with_seed(seed)


def _resolve_paths(data: DataConfig, base: Path) -> DataConfig:
    def resolve(value):
        if value is None or Path(value).is_absolute():
            return value
        return str(base / value)

    updates = {key: resolve(getattr(data, key)) for key in _PATH_KEYS}
    updates["splits"] = tuple(resolve(s) for s in data.splits)
    return replace(data, **updates)


def load_config(path: Optional[PathLike] = None) -> RunConfig:
    """Read a JSON config file; no path gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"config file not found: {path}", {"path": str(path)})
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e.msg}", {"path": str(path)}) from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a JSON object")
    logger.debug("Loaded config", extra={"path": str(path)})
    return config_from_dict(data, path.parent)


def config_to_dict(config: RunConfig) -> Dict[str, Any]:
    """Plain-JSON form of ``config``; ``config_from_dict`` reverses it."""

    def plain(value):
        if isinstance(value, tuple):
            return [plain(v) for v in value]
        return value

    return {
        k: ({kk: plain(vv) for kk, vv in v.items()} if isinstance(v, dict) else v)
        for k, v in dataclasses.asdict(config).items()
    }


def apply_overrides(config: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """Layer dotted-key overrides on top of ``config``.

    ``None`` values are ignored, so unset CLI flags leave the file alone.
    A ``seed`` override is propagated like the file's seed.

    >>> apply_overrides(RunConfig(), {"hyper.epochs": 3}).hyper.epochs
    3
    """
    data = config_to_dict(config)
    for key, value in overrides.items():
        if value is None:
            continue
        section, _, name = key.partition(".")
        if not name:
            if section not in _TOP_LEVEL:
                raise ConfigError(f"unknown config key '{key}'")
            data[section] = value
        else:
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section '{section}'")
            data[section][name] = list(value) if isinstance(value, tuple) else value
    return config_from_dict(data)
