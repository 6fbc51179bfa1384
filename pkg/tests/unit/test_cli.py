"""Unit tests for the command-line entry point."""

import json

import pytest

from actiongraph.adapters.formats import GraphCodec, read_json, read_matrix
from actiongraph.config.settings import load_config
from actiongraph.runtime.cli import LOG_LEVELS, build_parser, main


@pytest.fixture
def files(tmp_path):
    """Label map plus one seven-frame label file."""
    (tmp_path / "mapping.txt").write_text("a\t0\nb\t1\nc\t2\n")
    (tmp_path / "v1.txt").write_text("a\na\na\na\nb\nb\nc\n")
    (tmp_path / "p1.txt").write_text("a\na\nb\nb\nb\nb\nc\n")
    return tmp_path


class TestParser:
    """Test argument parsing."""

    def test_subcommand_required(self):
        """Test running without a subcommand exits with status 2."""
        with pytest.raises(SystemExit) as exc_info:
            main([])
        assert exc_info.value.code == 2

    def test_bad_choice(self):
        """Test an unknown preset is an argument error."""
        with pytest.raises(SystemExit) as exc_info:
            main(["train", "--edges", "everything"])
        assert exc_info.value.code == 2

    def test_grids_flag(self):
        """Test the ablate subcommand accepts a grid subset."""
        args = build_parser().parse_args(["ablate", "--grids", "edges,hops"])
        assert args.grids == "edges,hops"

    def test_log_levels(self):
        """Test the documented LOG_LEVEL names."""
        assert set(LOG_LEVELS) == {"error", "warn", "info", "debug"}


class TestFileCommands:
    """Test the single-file subcommands."""

    def test_build_graph(self, files):
        """Test one graph file per chunk is written."""
        code = main(
            [
                "build-graph",
                "--labels", str(files / "v1.txt"),
                "--label-map", str(files / "mapping.txt"),
                "--chunk-size", "4",
                "--gamma", "0.1",
                "--out", str(files / "graphs"),
            ]
        )  # fmt: skip

        assert code == 0
        assert sorted(p.name for p in (files / "graphs").iterdir()) == [
            "v1.chunk0.json",
            "v1.chunk1.json",
        ]
        graph = GraphCodec.read(files / "graphs" / "v1.chunk1.json")
        assert graph.labels == (1, 1, 2)
        assert graph.gamma == 0.1

    def test_embed_structure(self, files):
        """Test a graph file is embedded into a matrix file."""
        labels, label_map = str(files / "v1.txt"), str(files / "mapping.txt")
        main(["build-graph", "--labels", labels, "--label-map", label_map, "--out", str(files)])
        code = main(
            [
                "embed-structure",
                "--graph", str(files / "v1.chunk0.json"),
                "--dimension", "8",
                "--hops", "2",
                "--out", str(files / "structure.bin"),
            ]
        )  # fmt: skip

        assert code == 0
        assert read_matrix(files / "structure.bin").shape == (7, 8)

    def test_embed_semantic(self, files):
        """Test a label file is embedded with the stub backend."""
        code = main(
            [
                "embed-semantic",
                "--labels", str(files / "v1.txt"),
                "--label-map", str(files / "mapping.txt"),
                "--template", "suffix",
                "--out", str(files / "semantic.bin"),
            ]
        )  # fmt: skip

        assert code == 0
        assert read_matrix(files / "semantic.bin").shape == (7, 512)

    def test_table_backend_needs_table(self, files, capsys):
        """Test the table backend without --table fails with status 1."""
        code = main(
            [
                "embed-semantic",
                "--labels", str(files / "v1.txt"),
                "--label-map", str(files / "mapping.txt"),
                "--backend", "table",
                "--out", str(files / "semantic.bin"),
            ]
        )  # fmt: skip

        assert code == 1
        assert "error: the table backend needs --table" in capsys.readouterr().err

    def test_visualize(self, files):
        """Test the chart is written as SVG."""
        code = main(
            [
                "visualize",
                "--gt", str(files / "v1.txt"),
                "--pred", str(files / "p1.txt"),
                "--label-map", str(files / "mapping.txt"),
                "--out", str(files / "v1.svg"),
            ]
        )  # fmt: skip

        assert code == 0
        assert "<svg" in (files / "v1.svg").read_text()

    def test_unknown_token(self, files, capsys):
        """Test a label outside the map fails with status 1."""
        (files / "bad.txt").write_text("a\nzzz\n")
        code = main(
            [
                "build-graph",
                "--labels", str(files / "bad.txt"),
                "--label-map", str(files / "mapping.txt"),
                "--out", str(files / "graphs"),
            ]
        )  # fmt: skip

        assert code == 1
        assert "zzz" in capsys.readouterr().err

    def test_missing_out(self, files):
        """Test file commands need --out."""
        labels, label_map = str(files / "v1.txt"), str(files / "mapping.txt")
        code = main(["build-graph", "--labels", labels, "--label-map", label_map])
        assert code == 1


class TestFileCommandConfig:
    """Test file-level subcommands read the run config under their flags."""

    @staticmethod
    def _config(files, settings):
        path = files / "run.json"
        path.write_text(json.dumps(settings))
        return str(path)

    def test_build_graph_reads_graph_section(self, files):
        """Test gamma and chunk size come from the config file."""
        config = self._config(files, {"graph": {"gamma": 0.5, "chunk_size": 2}})
        labels, label_map = str(files / "v1.txt"), str(files / "mapping.txt")
        out = str(files / "graphs")

        code = main(
            ["build-graph", "--config", config, "--labels", labels, "--label-map", label_map,
             "--out", out]
        )  # fmt: skip

        assert code == 0
        assert len(list((files / "graphs").iterdir())) == 4
        assert GraphCodec.read(files / "graphs" / "v1.chunk0.json").gamma == 0.5

    def test_build_graph_flag_overrides_config(self, files):
        """Test an explicit flag wins over the config file."""
        config = self._config(files, {"graph": {"gamma": 0.5, "chunk_size": 2}})
        labels, label_map = str(files / "v1.txt"), str(files / "mapping.txt")

        code = main(
            ["build-graph", "--config", config, "--labels", labels, "--label-map", label_map,
             "--gamma", "0.1", "--chunk-size", "500", "--out", str(files / "graphs")]
        )  # fmt: skip

        assert code == 0
        assert [p.name for p in (files / "graphs").iterdir()] == ["v1.chunk0.json"]
        assert GraphCodec.read(files / "graphs" / "v1.chunk0.json").gamma == 0.1

    def test_embed_structure_reads_walk_section(self, files):
        """Test the walk section sets the embedding width unless --dimension is given."""
        labels, label_map = str(files / "v1.txt"), str(files / "mapping.txt")
        main(["build-graph", "--labels", labels, "--label-map", label_map, "--out", str(files)])
        config = self._config(files, {"walk": {"dimension": 6, "walks_per_node": 2}})
        graph = str(files / "v1.chunk0.json")

        assert main(
            ["embed-structure", "--config", config, "--graph", graph, "--out",
             str(files / "a.bin")]
        ) == 0  # fmt: skip
        assert main(
            ["embed-structure", "--config", config, "--graph", graph, "--dimension", "8",
             "--out", str(files / "b.bin")]
        ) == 0  # fmt: skip
        assert read_matrix(files / "a.bin").shape == (7, 6)
        assert read_matrix(files / "b.bin").shape == (7, 8)

    def test_embed_semantic_reads_prompt_section(self, files):
        """Test the prompt section sets the stub width."""
        config = self._config(files, {"prompt": {"dimension": 64, "template": "raw"}})
        code = main(
            ["embed-semantic", "--config", config, "--labels", str(files / "v1.txt"),
             "--label-map", str(files / "mapping.txt"), "--out", str(files / "s.bin")]
        )  # fmt: skip

        assert code == 0
        assert read_matrix(files / "s.bin").shape == (7, 64)

    def test_embed_semantic_table_from_config(self, files):
        """Test the table backend and its table path can come from the config file."""
        (files / "table.json").write_text(
            json.dumps({"a": [1.0, 0.0, 0.0], "b": [0.0, 1.0, 0.0], "c": [0.0, 0.0, 1.0]})
        )
        config = self._config(
            files, {"prompt": {"backend": "table"}, "data": {"embedding_table": "table.json"}}
        )
        code = main(
            ["embed-semantic", "--config", config, "--labels", str(files / "v1.txt"),
             "--label-map", str(files / "mapping.txt"), "--out", str(files / "s.bin")]
        )  # fmt: skip

        assert code == 0
        assert read_matrix(files / "s.bin").shape == (7, 3)

    def test_visualize_takes_no_config(self):
        """Test visualize rejects --config since it reads no settings."""
        with pytest.raises(SystemExit) as exc_info:
            build_parser().parse_args(
                ["visualize", "--config", "x.json", "--gt", "a", "--pred", "b", "--label-map", "m"]
            )
        assert exc_info.value.code == 2


class TestDatasetCommands:
    """Test commands that read a run config."""

    def test_gen_synthetic(self, tmp_path):
        """Test the generated config points at the generated data."""
        config_path = tmp_path / "small.json"
        config_path.write_text(json.dumps({"synthetic": {"train_videos": 2, "test_videos": 1}}))

        out = str(tmp_path / "ds")
        code = main(["gen-synthetic", "--config", str(config_path), "--seed", "4", "--out", out])
        config = load_config(tmp_path / "ds" / "config.json")

        assert code == 0
        assert config.seed == 4
        assert config.data.label_map == str((tmp_path / "ds" / "mapping.txt").resolve())
        assert read_json(tmp_path / "ds" / "splits" / "split1.json")["test"] == ["test_000"]
        config.data.check_paths()

    def test_missing_config(self, tmp_path, capsys):
        """Test a missing config file fails with status 1."""
        code = main(["train", "--config", str(tmp_path / "absent.json")])

        assert code == 1
        assert "config file not found" in capsys.readouterr().err
