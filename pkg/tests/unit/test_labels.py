"""Unit tests for label map and label file parsing."""

import pytest

from actiongraph.config.labels import LabelFiles, load_label_map, read_label_file, write_label_file
from actiongraph.core import EmptySequence, FormatError, LabelMapError, MissingFile, UnknownLabel


class TestLabelMapFiles:
    """Test ``token<TAB>id`` label maps."""

    def test_parse(self):
        """Test tokens are ordered by id whatever the line order."""
        label_map = LabelFiles.parse_label_map(["pour\t1", "", "take\t0"])

        assert label_map.tokens == ["take", "pour"]
        assert label_map.background is None

    def test_background(self):
        """Test the background token resolves to its id."""
        label_map = LabelFiles.parse_label_map(["SIL\t0", "pour\t1"], background="SIL")
        assert label_map.background == 0

    def test_unknown_background(self):
        """Test a background token missing from the map."""
        with pytest.raises(LabelMapError):
            LabelFiles.parse_label_map(["pour\t0"], background="SIL")

    @pytest.mark.parametrize("line", ["pour 0", "pour\tzero", "pour\t0\textra"])
    def test_malformed_line(self, line):
        """Test lines must be a token and an integer id."""
        with pytest.raises(FormatError):
            LabelFiles.parse_label_map([line])

    def test_id_gap(self):
        """Test ids must be exactly 0..C-1."""
        with pytest.raises(LabelMapError):
            LabelFiles.parse_label_map(["a\t0", "b\t2"])

    def test_duplicate_token(self):
        """Test tokens must be unique."""
        with pytest.raises(LabelMapError):
            LabelFiles.parse_label_map(["a\t0", "a\t1"])

    def test_file_round_trip(self, tmp_path, label_map):
        """Test a written map loads back equal."""
        LabelFiles.write_label_map(tmp_path / "mapping.txt", label_map)
        assert load_label_map(tmp_path / "mapping.txt") == label_map

    def test_missing(self, tmp_path):
        """Test a missing map raises MissingFile."""
        with pytest.raises(MissingFile):
            load_label_map(tmp_path / "mapping.txt")


class TestLabelFiles:
    """Test per-frame label files."""

    def test_parse(self, label_map):
        """Test line n becomes frame n."""
        seq = LabelFiles.parse_labels(["a", "a", "c"], label_map, "v1")

        assert seq.labels == (0, 0, 2)
        assert seq.video_id == "v1"
        assert not seq.is_pseudo

    def test_blank_line(self, label_map):
        """Test blank lines are refused."""
        with pytest.raises(FormatError):
            LabelFiles.parse_labels(["a", "", "b"], label_map, "v1")

    def test_unknown_token(self, label_map):
        """Test tokens must be in the label map."""
        with pytest.raises(UnknownLabel):
            LabelFiles.parse_labels(["a", "zzz"], label_map, "v1")

    def test_empty(self, label_map):
        """Test a file without frames is an empty sequence."""
        with pytest.raises(EmptySequence):
            LabelFiles.parse_labels([], label_map, "v1")

    def test_read_uses_stem(self, tmp_path, label_map):
        """Test the video id defaults to the file stem."""
        (tmp_path / "rgb-01.txt").write_text("b\nb\na\n")
        seq = read_label_file(tmp_path / "rgb-01.txt", label_map, is_pseudo=True)

        assert seq.video_id == "rgb-01"
        assert seq.labels == (1, 1, 0)
        assert seq.is_pseudo

    def test_write_then_read(self, tmp_path, label_map):
        """Test written predictions read back as the same ids."""
        write_label_file(tmp_path / "pred" / "v.txt", [2, 2, 0, 1], label_map)
        assert read_label_file(tmp_path / "pred" / "v.txt", label_map).labels == (2, 2, 0, 1)
