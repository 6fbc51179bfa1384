"""Configuration package for actiongraph."""

from .labels import LabelFiles, load_label_map, read_label_file, write_label_file
from .settings import RunConfig, apply_overrides, config_to_dict, load_config

__all__ = [
    "LabelFiles",
    "load_label_map",
    "read_label_file",
    "write_label_file",
    "RunConfig",
    "load_config",
    "apply_overrides",
    "config_to_dict",
]
