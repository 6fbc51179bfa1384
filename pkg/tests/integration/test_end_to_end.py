"""Integration tests for complete runs.

These tests generate a synthetic dataset, then train, evaluate and ablate
through the command line exactly as a user would. They take tens of seconds
and only run with ``--integration``.
"""

import csv
import json
from pathlib import Path

import pytest

from actiongraph.adapters.formats import read_json, read_report
from actiongraph.config.settings import load_config
from actiongraph.core.model import HyperParams
from actiongraph.core.switches import Switches
from actiongraph.core.training import node_accuracy, train
from actiongraph.runtime.cli import main
from actiongraph.runtime.pipeline import StageCache, ingest, prepare_examples

SETTINGS = {
    "seed": 2,
    "synthetic": {
        "num_classes": 4,
        "train_videos": 6,
        "test_videos": 3,
        "frames": 80,
        "visual_dim": 8,
        "min_run": 8,
        "max_run": 20,
        "cluster_scale": 4.0,
        "noise": 0.5,
    },
    "walk": {"dimension": 16, "walks_per_node": 4, "walk_length": 10, "epochs": 2},
    "prompt": {"dimension": 32},
    "hyper": {"hidden": 32, "batch_size": 2, "epochs": 25, "learning_rate": 0.01},
}


@pytest.fixture
def dataset_dir(tmp_path):
    """Synthetic dataset plus its generated config.json."""
    settings = tmp_path / "settings.json"
    settings.write_text(json.dumps(SETTINGS))
    assert main(["gen-synthetic", "--config", str(settings), "--out", str(tmp_path / "ds")]) == 0
    return tmp_path / "ds"


@pytest.mark.integration
@pytest.mark.slow
class TestEndToEnd:
    """Train, evaluate and ablate through the command line."""

    def test_train_then_eval(self, dataset_dir, capsys):
        """Test a full run beats chance clearly and prints its scores."""
        config = str(dataset_dir / "config.json")
        out = str(dataset_dir / "run")

        assert main(["train", "--config", config, "--out", out]) == 0
        assert main(["eval", "--config", config, "--out", out]) == 0

        report = read_report(Path(out) / "report.json")
        assert report.accuracy > 50.0
        assert report.top1 <= report.top5
        assert "Acc " in capsys.readouterr().out

    def test_all_folds(self, dataset_dir):
        """Test cross-validation writes the averaged report."""
        config = str(dataset_dir / "config.json")
        out = dataset_dir / "cv"

        assert main(["train", "--config", config, "--out", str(out), "--all-folds"]) == 0
        assert read_report(out / "report.json").videos == 3

    def test_edge_ablation(self, dataset_dir):
        """Test every edge preset completes and lands in the table."""
        config = str(dataset_dir / "config.json")
        out = dataset_dir / "ablate"

        assert main(["ablate", "--config", config, "--out", str(out), "--grids", "edges"]) == 0
        with open(out / "ablation.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        assert [r["setting"] for r in rows] == list(Switches.EDGE_PRESETS)
        assert all(r["status"] == "ok" for r in rows)
        assert len(read_json(out / "ablation.json")) == len(rows)

    def test_overfits_training_videos(self, dataset_dir):
        """Test the classifier fits its own training graphs almost perfectly."""
        config = load_config(dataset_dir / "config.json")
        dataset = ingest(config)
        examples = prepare_examples(
            dataset, dataset.folds[0].train, config, "train", None, StageCache()
        )
        hyper = HyperParams(hidden=32, epochs=80, dropout=0.0, learning_rate=0.01)
        params, _ = train(examples, hyper, seed=0)

        assert node_accuracy(examples, params, hyper) >= 0.95
