"""core/switches.py

Ablation switches for actiongraph.

This module defines the named presets an ablation run can select: which edge
kinds a graph keeps, which feature modalities reach the classifier and how
the semantic block is produced. Presets are static tables, looked up by name
and cached, so every experiment refers to the same definitions.
"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, Tuple

from .errors import raise_unknown_switch
from .graph import EdgeKind

MODALITIES = ("vis", "str", "sem")
SEMANTIC_MODES = ("none", "raw", "prompt")


@dataclass(frozen=True)
class EdgePreset:
    """Edge kinds kept in a graph, plus the kinds randomly thinned."""

    name: str
    kinds: FrozenSet[EdgeKind]
    drop_kinds: FrozenSet[EdgeKind] = frozenset()
    drop_probability: float = 0.0

    def has(self, kind: EdgeKind) -> bool:
        return kind in self.kinds


@dataclass(frozen=True)
class ModalityPreset:
    """Feature blocks that make up the fused node attributes."""

    name: str
    blocks: Tuple[str, ...]

    def has(self, block: str) -> bool:
        return block in self.blocks


class Switches:
    """Registry of ablation presets.

    Edge presets follow the rows of the edge-type study: a temporal baseline,
    each edge kind added on its own, the semantic pair, everything, and the
    two robustness rows where the added edges survive with probability 0.5.
    Modality presets enumerate every non-empty subset of the three feature
    blocks, always kept in the order visual, structural, semantic.
    """

    _T = EdgeKind.TEMPORAL
    _P = EdgeKind.POSITIVE_SEMANTIC
    _N = EdgeKind.NEGATIVE_SEMANTIC
    _S = EdgeKind.SELF_LOOP

    EDGE_PRESETS: Dict[str, EdgePreset] = {
        "temporal": EdgePreset("temporal", frozenset({_T})),
        "temporal+self": EdgePreset("temporal+self", frozenset({_T, _S})),
        "temporal+positive": EdgePreset("temporal+positive", frozenset({_T, _P})),
        "temporal+negative": EdgePreset("temporal+negative", frozenset({_T, _N})),
        "temporal+semantic": EdgePreset("temporal+semantic", frozenset({_T, _P, _N})),
        "all": EdgePreset("all", frozenset({_T, _P, _N, _S})),
        "temporal+semantic@random50": EdgePreset(
            "temporal+semantic@random50", frozenset({_T, _P, _N}), frozenset({_P, _N}), 0.5
        ),
        "all@random50": EdgePreset(
            "all@random50", frozenset({_T, _P, _N, _S}), frozenset({_P, _N, _S}), 0.5
        ),
    }

    MODALITY_PRESETS: Dict[str, ModalityPreset] = {
        name: ModalityPreset(name, tuple(name.split("+")))
        for name in ("vis", "str", "sem", "vis+str", "vis+sem", "str+sem", "vis+str+sem")
    }

    HOP_GRID: Tuple[int, ...] = (2, 3, 4, 5)

    @classmethod
    def edge_preset(cls, name: str) -> EdgePreset:
        if name not in cls.EDGE_PRESETS:
            raise_unknown_switch("edges", name, cls.EDGE_PRESETS)
        return cls.EDGE_PRESETS[name]

    @classmethod
    def modality_preset(cls, name: str) -> ModalityPreset:
        if name not in cls.MODALITY_PRESETS:
            raise_unknown_switch("modalities", name, cls.MODALITY_PRESETS)
        return cls.MODALITY_PRESETS[name]

    @classmethod
    def require_semantic_mode(cls, mode: str) -> str:
        if mode not in SEMANTIC_MODES:
            raise_unknown_switch("semantic", mode, SEMANTIC_MODES)
        return mode


def get_edge_preset(name: str) -> EdgePreset:
    """Look up an edge preset by name.

    Raises:
        UnknownSwitch: If no preset has that name
    """
    return Switches.edge_preset(name)


def get_modality_preset(name: str) -> ModalityPreset:
    """Look up a modality preset by name.

    Raises:
        UnknownSwitch: If no preset has that name
    """
    return Switches.modality_preset(name)


def edge_grid() -> Tuple[str, ...]:
    return tuple(Switches.EDGE_PRESETS)


def modality_grid() -> Tuple[str, ...]:
    return tuple(Switches.MODALITY_PRESETS)
