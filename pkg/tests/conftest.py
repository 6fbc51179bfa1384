"""tests/conftest.py

Pytest configuration & reusable fixtures.

This module provides shared fixtures and configuration for both unit and
integration tests in the actiongraph test suite.
"""

from dataclasses import replace

import numpy as np
import pytest

from actiongraph.config.settings import RunConfig, SyntheticConfig
from actiongraph.core.graph import FrameSequence, LabelMap
from actiongraph.core.model import HyperParams
from actiongraph.core.structure import WalkConfig
from actiongraph.runtime.synthetic import write_dataset


def pytest_addoption(parser):
    """Add custom command line options for pytest."""
    parser.addoption(
        "--integration",
        action="store_true",
        default=False,
        help="Run integration tests (end-to-end training runs)",
    )


def pytest_collection_modifyitems(config, items):
    """Modify test collection based on command line options."""
    if config.getoption("--integration"):
        return

    skip_integration = pytest.mark.skip(reason="need --integration option to run")
    for item in items:
        if "integration" in item.keywords:
            item.add_marker(skip_integration)


@pytest.fixture
def label_map():
    """Three-class label map a, b, c."""
    return LabelMap((("a", 0), ("b", 1), ("c", 2)))


@pytest.fixture
def example_sequence():
    """Seven frames in runs 0-3, 4-5 and 6."""
    return FrameSequence("example", (0, 0, 0, 0, 1, 1, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_hyper():
    """Narrow, quick hyperparameters for unit tests."""
    return HyperParams(hidden=8, batch_size=2, epochs=3, dropout=0.0, learning_rate=0.01)


@pytest.fixture
def small_walk():
    return WalkConfig(dimension=8, walks_per_node=2, walk_length=6, epochs=1)


@pytest.fixture
def synthetic_settings():
    """A handful of short videos with clearly separated classes."""
    return SyntheticConfig(
        num_classes=3,
        train_videos=3,
        test_videos=2,
        frames=30,
        visual_dim=6,
        min_run=4,
        max_run=10,
        cluster_scale=4.0,
        noise=0.5,
    )


@pytest.fixture
def synthetic_run(tmp_path, synthetic_settings):
    """Run config over a synthetic dataset written to ``tmp_path``.

    Widths are kept tiny so a full train/eval run takes well under a second.
    """
    data = write_dataset(tmp_path / "data", synthetic_settings, seed=3)
    config = RunConfig(
        data=data,
        walk=WalkConfig(dimension=4, walks_per_node=2, walk_length=5, epochs=1),
        hyper=HyperParams(hidden=8, batch_size=2, epochs=2),
        synthetic=synthetic_settings,
        output_dir=str(tmp_path / "run"),
    )
    config = replace(config, prompt=replace(config.prompt, dimension=16))
    return config.with_seed(5)
