"""Unit tests for the ablation switches.

These tests verify the preset tables and the errors raised for unknown names.
"""

import pytest

from actiongraph.core import EdgeKind, UnknownSwitch
from actiongraph.core.switches import (
    Switches,
    edge_grid,
    get_edge_preset,
    get_modality_preset,
    modality_grid,
)


class TestSwitches:
    """Test the preset registry."""

    def test_edge_presets_always_keep_temporal(self):
        """Test every edge preset keeps temporal edges."""
        for name in edge_grid():
            assert get_edge_preset(name).has(EdgeKind.TEMPORAL), name

    def test_all_preset(self):
        """Test the full preset keeps every kind and drops nothing."""
        preset = get_edge_preset("all")
        assert preset.kinds == frozenset(EdgeKind)
        assert preset.drop_probability == 0.0

    def test_random_presets(self):
        """Test the robustness presets thin their added edges at 0.5."""
        semantic = get_edge_preset("temporal+semantic@random50")
        assert semantic.drop_probability == 0.5
        assert EdgeKind.TEMPORAL not in semantic.drop_kinds
        assert EdgeKind.SELF_LOOP not in semantic.kinds

        everything = get_edge_preset("all@random50")
        assert EdgeKind.SELF_LOOP in everything.drop_kinds

    def test_modality_grid(self):
        """Test the seven non-empty modality subsets."""
        assert len(modality_grid()) == 7
        assert get_modality_preset("vis+sem").blocks == ("vis", "sem")
        assert get_modality_preset("vis+str+sem").has("str")

    def test_hop_grid(self):
        """Test the hop grid."""
        assert Switches.HOP_GRID == (2, 3, 4, 5)

    def test_unknown_edge_preset(self):
        """Test unknown edge presets list the known ones."""
        with pytest.raises(UnknownSwitch) as exc_info:
            get_edge_preset("nope")

        assert "nope" in exc_info.value.message
        assert "temporal+self" in exc_info.value.message
        assert exc_info.value.context == {"kind": "edges", "preset": "nope"}

    def test_unknown_modality_preset(self):
        """Test unknown modality presets raise UnknownSwitch."""
        with pytest.raises(UnknownSwitch):
            get_modality_preset("audio")

    def test_semantic_modes(self):
        """Test semantic modes are validated."""
        assert Switches.require_semantic_mode("raw") == "raw"
        with pytest.raises(UnknownSwitch):
            Switches.require_semantic_mode("clip")
