"""core/graph.py

Frame-level video graphs.

A label sequence of T frames becomes a directed graph with T nodes and four
kinds of edges:

- temporal edges link every frame to its successor,
- positive semantic edges link non-adjacent frames inside one run of equal
  labels,
- negative semantic edges link the frames of a run to the first frame of the
  next run (the adjacent frame excluded), weighted by gamma,
- self-loops keep each node's own features during aggregation.

All non-self-loop edges point forward in time. Node indices are 0-based.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import EmptySequence, GraphError, LabelMapError, RowCountMismatch, UnknownLabel

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 500


@dataclass(frozen=True)
class LabelMap:
    """Ordered mapping between label tokens and class ids 0..C-1."""

    entries: Tuple[Tuple[str, int], ...]
    background: Optional[int] = None

    def __post_init__(self):
        tokens = [token for token, _ in self.entries]
        ids = sorted(class_id for _, class_id in self.entries)
        if len(set(tokens)) != len(tokens):
            raise LabelMapError("label tokens must be unique")
        if ids != list(range(len(ids))):
            raise LabelMapError("class ids must be exactly 0..C-1")
        if self.background is not None and not 0 <= self.background < len(ids):
            raise LabelMapError(f"background id {self.background} is not a valid class id")

    @property
    def num_classes(self) -> int:
        return len(self.entries)

    @property
    def tokens(self) -> List[str]:
        """Tokens ordered by class id."""
        by_id = {class_id: token for token, class_id in self.entries}
        return [by_id[i] for i in range(len(by_id))]

    def id_of(self, token: str) -> int:
        for known, class_id in self.entries:
            if known == token:
                return class_id
        raise UnknownLabel(f"unknown label token '{token}'", {"token": token})

    def token_of(self, class_id: int) -> str:
        for token, known in self.entries:
            if known == class_id:
                return token
        raise UnknownLabel(f"unknown class id {class_id}", {"class_id": class_id})

    def validate(self, seq: "FrameSequence") -> None:
        """Check that every label of ``seq`` is a class id of this map."""
        for t, label in enumerate(seq.labels):
            if not 0 <= label < self.num_classes:
                raise UnknownLabel(
                    f"frame {t} of '{seq.video_id}' has class id {label} "
                    f"outside 0..{self.num_classes - 1}",
                    {"video_id": seq.video_id, "frame": t},
                )


@dataclass(frozen=True)
class FrameSequence:
    """Per-frame class ids of one video (or one chunk of it)."""

    video_id: str
    labels: Tuple[int, ...]
    is_pseudo: bool = False

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(label) for label in self.labels))
        if not self.labels:
            raise EmptySequence(context={"video_id": self.video_id})
        if min(self.labels) < 0:
            raise UnknownLabel(
                f"negative class id in '{self.video_id}'", {"video_id": self.video_id}
            )

    def __len__(self) -> int:
        return len(self.labels)


class EdgeKind(enum.IntEnum):
    """Edge kinds; the integer value is the on-disk kind code."""

    TEMPORAL = 0
    POSITIVE_SEMANTIC = 1
    NEGATIVE_SEMANTIC = 2
    SELF_LOOP = 3


SEMANTIC_KINDS = frozenset({EdgeKind.POSITIVE_SEMANTIC, EdgeKind.NEGATIVE_SEMANTIC})


class Edge(NamedTuple):
    src: int
    dst: int
    kind: EdgeKind
    weight: float


class Run(NamedTuple):
    """Maximal block of equal labels, ``end`` inclusive."""

    label: int
    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class VideoGraph:
    """Directed graph of one chunk of a video.

    Construction checks the structural rules every graph obeys, including the
    ablation variants that drop some edge kinds: indices in range, self-loops
    on the diagonal, everything else pointing forward, no duplicate
    (src, dst, kind) and at most one non-self-loop edge per ordered pair.
    Edges are kept sorted by (src, dst, kind).
    """

    video_id: str
    chunk: int
    labels: Tuple[int, ...]
    gamma: float
    edges: Tuple[Edge, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(int(label) for label in self.labels))
        edges = tuple(
            sorted(
                (
                    Edge(int(e.src), int(e.dst), EdgeKind(e.kind), float(e.weight))
                    for e in self.edges
                ),
                key=lambda e: (e.src, e.dst, int(e.kind)),
            )
        )
        object.__setattr__(self, "edges", edges)
        n = len(self.labels)
        if n == 0:
            raise EmptySequence(context={"video_id": self.video_id, "chunk": self.chunk})
        seen_pairs = set()
        previous = None
        for edge in edges:
            if not (0 <= edge.src < n and 0 <= edge.dst < n):
                raise GraphError(f"edge {edge[:2]} outside 0..{n - 1}")
            if edge.weight < 0:
                raise GraphError(f"negative weight on edge {edge[:2]}")
            if (edge.kind == EdgeKind.SELF_LOOP) != (edge.src == edge.dst):
                raise GraphError(f"edge {edge[:2]} of kind {edge.kind.name} is malformed")
            if edge.kind != EdgeKind.SELF_LOOP:
                if edge.src >= edge.dst:
                    raise GraphError(f"edge {edge[:2]} does not point forward in time")
                if (edge.src, edge.dst) in seen_pairs:
                    raise GraphError(f"more than one edge on pair {edge[:2]}")
                seen_pairs.add((edge.src, edge.dst))
            key = (edge.src, edge.dst, edge.kind)
            if key == previous:
                raise GraphError(f"duplicate edge {key}")
            previous = key

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    def edges_of(self, *kinds: EdgeKind) -> List[Edge]:
        wanted = set(kinds)
        return [edge for edge in self.edges if edge.kind in wanted]

    def count(self, kind: EdgeKind) -> int:
        return sum(1 for edge in self.edges if edge.kind == kind)

    def kind_counts(self) -> Dict[str, int]:
        return {kind.name.lower(): self.count(kind) for kind in EdgeKind}


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Dense weighted adjacency of a ``VideoGraph``."""

    matrix: np.ndarray
    gamma: float

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True)
class Chunk:
    """Consecutive slice of a video with its row-aligned feature matrices."""

    index: int
    start: int
    sequence: FrameSequence
    features: Tuple[np.ndarray, ...]


def segment_runs(labels: Sequence[int]) -> List[Run]:
    """Split ``labels`` into maximal runs of equal values.

    >>> segment_runs([0, 0, 0, 0, 1, 1, 2])
    [Run(label=0, start=0, end=3), Run(label=1, start=4, end=5), Run(label=2, start=6, end=6)]
    """
    if len(labels) == 0:
        raise EmptySequence()
    runs = []
    start = 0
    for t in range(1, len(labels)):
        if labels[t] != labels[t - 1]:
            runs.append(Run(int(labels[start]), start, t - 1))
            start = t
    runs.append(Run(int(labels[start]), start, len(labels) - 1))
    return runs


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 <= gamma < 1.0:
        raise GraphError(f"gamma must lie in [0, 1), got {gamma}", {"gamma": gamma})
    return gamma


def build_graph(seq: FrameSequence, gamma: float = 0.0, chunk: int = 0) -> VideoGraph:
    """Build the directed graph of a frame sequence.

    Positive semantic edges join every non-adjacent pair inside a run.
    Negative semantic edges join every frame of a run to the first frame of
    the following run, except the frame right before it; they carry weight
    ``gamma`` and stay in the edge set even when ``gamma`` is 0.

    Args:
        seq: Frame labels of one chunk
        gamma: Negative semantic edge weight in [0, 1)
        chunk: Chunk index recorded on the graph

    Raises:
        GraphError: gamma outside [0, 1)
        EmptySequence: no frames
    """
    gamma = _check_gamma(gamma)
    labels = seq.labels
    n = len(labels)
    runs = segment_runs(labels)
    edges = [Edge(i, i + 1, EdgeKind.TEMPORAL, 1.0) for i in range(n - 1)]

    for run in runs:
        for i in range(run.start, run.end + 1):
            for j in range(i + 2, run.end + 1):
                edges.append(Edge(i, j, EdgeKind.POSITIVE_SEMANTIC, 1.0))

    for previous, following in zip(runs, runs[1:]):
        boundary = following.start
        for i in range(previous.start, boundary - 1):
            edges.append(Edge(i, boundary, EdgeKind.NEGATIVE_SEMANTIC, gamma))

    edges.extend(Edge(i, i, EdgeKind.SELF_LOOP, 1.0) for i in range(n))

    graph = VideoGraph(seq.video_id, chunk, labels, gamma, tuple(edges))
    logger.debug(
        "Built video graph",
        extra={"video_id": seq.video_id, "chunk": chunk, "nodes": n, "edges": len(graph.edges)},
    )
    return graph


def chunk(
    seq: FrameSequence, features: Iterable[np.ndarray] = (), chunk_size: int = DEFAULT_CHUNK_SIZE
) -> List[Chunk]:
    """Cut a sequence and its row-aligned features every ``chunk_size`` frames.

    The last chunk keeps whatever is left over; no attempt is made to align
    cuts with run boundaries.

    Raises:
        GraphError: chunk_size < 2
        RowCountMismatch: a feature matrix does not have one row per frame
    """
    if chunk_size < 2:
        raise GraphError(f"chunk size must be at least 2, got {chunk_size}")
    features = tuple(np.asarray(matrix) for matrix in features)
    for matrix in features:
        if matrix.shape[0] != len(seq):
            raise RowCountMismatch(
                f"'{seq.video_id}' has {len(seq)} labels "
                f"but a feature matrix has {matrix.shape[0]} rows",
                {"video_id": seq.video_id},
            )
    chunks = []
    for index, start in enumerate(range(0, len(seq), chunk_size)):
        stop = min(start + chunk_size, len(seq))
        piece = FrameSequence(seq.video_id, seq.labels[start:stop], seq.is_pseudo)
        chunks.append(Chunk(index, start, piece, tuple(m[start:stop] for m in features)))
    return chunks


def adjacency(graph: VideoGraph) -> AdjacencyMatrix:
    """Dense weighted adjacency: A[src, dst] = edge weight, 0 elsewhere."""
    matrix = np.zeros((graph.num_nodes, graph.num_nodes), dtype=np.float64)
    for edge in graph.edges:
        matrix[edge.src, edge.dst] = edge.weight
    return AdjacencyMatrix(matrix, graph.gamma)


def filter_edges(graph: VideoGraph, kinds: Iterable[EdgeKind]) -> VideoGraph:
    """Keep only the listed edge kinds; temporal edges are always kept."""
    keep = set(kinds) | {EdgeKind.TEMPORAL}
    edges = tuple(edge for edge in graph.edges if edge.kind in keep)
    return VideoGraph(graph.video_id, graph.chunk, graph.labels, graph.gamma, edges)


def drop_edges(
    graph: VideoGraph,
    probability: float,
    rng: np.random.Generator,
    kinds: Iterable[EdgeKind] = SEMANTIC_KINDS,
) -> VideoGraph:
    """Remove each edge of the given kinds independently with ``probability``.

    Temporal edges are never dropped.
    """
    if not 0.0 <= probability <= 1.0:
        raise GraphError(f"drop probability must lie in [0, 1], got {probability}")
    droppable = set(kinds) - {EdgeKind.TEMPORAL}
    draws = rng.random(len(graph.edges))
    edges = tuple(
        edge
        for edge, draw in zip(graph.edges, draws)
        if edge.kind not in droppable or draw >= probability
    )
    return VideoGraph(graph.video_id, graph.chunk, graph.labels, graph.gamma, edges)
