"""Unit tests for segmentation bar charts."""

import pytest

from actiongraph.core import DataError
from actiongraph.runtime.visualize import (
    Rectangle,
    class_color,
    render_segmentation,
    segment_rectangles,
)


class TestRectangles:
    """Test segment geometry."""

    def test_widths_follow_durations(self):
        """Test one rectangle per segment, width equal to its length."""
        assert segment_rectangles([0, 0, 0, 2, 1, 1]) == [
            Rectangle(0, 0, 3),
            Rectangle(2, 3, 1),
            Rectangle(1, 4, 2),
        ]

    def test_colour_by_class(self):
        """Test colours depend on the class id only."""
        assert class_color(3) == class_color(3)
        assert class_color(0) != class_color(1)


class TestRenderSegmentation:
    """Test SVG rendering."""

    def test_writes_svg(self, tmp_path, label_map):
        """Test an SVG with the legend tokens is written."""
        path = render_segmentation([0, 0, 1, 2], [0, 1, 1, 2], label_map, tmp_path / "v.svg", "v")
        text = path.read_text()

        assert text.lstrip().startswith("<?xml")
        assert "<svg" in text
        for token in ("a", "b", "c"):
            assert f">{token}<" in text

    def test_deterministic_bytes(self, tmp_path, label_map):
        """Test rendering twice gives byte-identical files."""
        first = render_segmentation([0, 1, 1], [0, 0, 1], label_map, tmp_path / "a.svg")
        second = render_segmentation([0, 1, 1], [0, 0, 1], label_map, tmp_path / "b.svg")

        assert first.read_bytes() == second.read_bytes()

    def test_length_mismatch(self, tmp_path, label_map):
        """Test both bars must cover the same frames."""
        with pytest.raises(DataError):
            render_segmentation([0, 1], [0], label_map, tmp_path / "v.svg")
