"""core/structure.py

Structural node features from node2vec.

Walks follow out-edges only, so they always move forward in time; self-loops
are not walkable. Zero-weight edges (negative semantic edges with gamma 0)
stay walkable with a unit pseudo-weight, which keeps them visible to the
structural embedding even though the classifier's adjacency sees them as 0.

Skip-gram with negative sampling is trained in numpy by a single writer in a
fixed order, so a fixed seed gives bitwise-identical embeddings.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import DataError, GraphError
from .graph import EdgeKind, VideoGraph

logger = logging.getLogger(__name__)

Table = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class WalkConfig:
    """node2vec walk and skip-gram settings.

    ``hops`` is the skip-gram context radius in walk steps.
    """

    dimension: int = 128
    hops: int = 4
    p: float = 1.0
    q: float = 1.0
    walks_per_node: int = 10
    walk_length: int = 20
    negative_samples: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.dimension < 1 or self.hops < 1:
            raise GraphError("walk dimension and hops must be at least 1")
        if self.walk_length < 2:
            raise GraphError("walk length must be at least 2")
        counts = (self.walks_per_node, self.negative_samples, self.epochs, self.batch_size)
        if min(counts) < 1:
            raise GraphError("walk counts must be at least 1")
        if self.p <= 0 or self.q <= 0:
            raise GraphError("return and in-out parameters must be positive")


@dataclass(frozen=True)
class StructuralEmbedding:
    """Row t is the structural embedding of node t."""

    matrix: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise DataError("structural embedding has non-finite entries")


@dataclass
class TransitionTables:
    """Walk transition tables of one graph.

    ``first_step[v]`` holds (neighbours, probabilities) for a walk that
    starts at v. Second-order tables, keyed by (previous, current), are built
    on first use since a chunk that is one long run has a quadratic number of
    edges.
    """

    walk_graph: nx.DiGraph
    p: float
    q: float
    first_step: Dict[int, Table]
    _connected: np.ndarray
    _biased: Dict[Tuple[int, int], Table] = field(default_factory=dict)

    def table(self, previous: Optional[int], current: int) -> Table:
        if previous is None or (self.p == 1.0 and self.q == 1.0):
            return self.first_step[current]
        key = (previous, current)
        if key not in self._biased:
            neighbours, _ = self.first_step[current]
            weights = np.array(
                [self.walk_graph[current][x]["weight"] for x in neighbours], dtype=np.float64
            )
            bias = np.where(
                neighbours == previous,
                1.0 / self.p,
                np.where(self._connected[previous, neighbours], 1.0, 1.0 / self.q),
            )
            unnormalized = weights * bias
            self._biased[key] = (neighbours, unnormalized / unnormalized.sum())
        return self._biased[key]


def walk_graph(graph: VideoGraph) -> nx.DiGraph:
    """Walkable view of ``graph``: no self-loops, zero weights lifted to 1."""
    view = nx.DiGraph()
    view.add_nodes_from(range(graph.num_nodes))
    for edge in graph.edges:
        if edge.kind == EdgeKind.SELF_LOOP:
            continue
        view.add_edge(edge.src, edge.dst, weight=edge.weight if edge.weight > 0 else 1.0)
    return view


def walk_transition_probs(graph: VideoGraph, config: WalkConfig) -> TransitionTables:
    """Per-node transition tables, P(v -> j) = w_j / sum_k w_k.

    The (p, q) bias is applied on top for steps after the first: 1/p for
    returning to the previous node, 1 for a neighbour linked to the previous
    node (in either direction), 1/q otherwise. Nodes without walkable
    out-edges get an empty table.
    """
    view = walk_graph(graph)
    first_step = {}
    for node in view.nodes:
        neighbours = np.array(sorted(view.successors(node)), dtype=np.int64)
        weights = np.array([view[node][x]["weight"] for x in neighbours], dtype=np.float64)
        probs = weights / weights.sum() if len(weights) else weights
        first_step[node] = (neighbours, probs)
    dense = nx.to_numpy_array(view, nodelist=list(range(graph.num_nodes)), weight=None) > 0
    return TransitionTables(view, config.p, config.q, first_step, dense | dense.T)


def _walk(tables: TransitionTables, start: int, length: int, rng: np.random.Generator) -> List[int]:
    walk = [start]
    while len(walk) < length:
        previous = walk[-2] if len(walk) > 1 else None
        neighbours, probs = tables.table(previous, walk[-1])
        if len(neighbours) == 0:
            break
        walk.append(int(neighbours[rng.choice(len(neighbours), p=probs)]))
    return walk


def generate_walks(
    graph: VideoGraph, config: WalkConfig, tables: Optional[TransitionTables] = None
) -> List[List[int]]:
    """``walks_per_node`` walks from every node.

    Walk ``k`` starts at node ``k % T`` and draws from its own generator seeded
    with (seed, k), so walks can be produced in any order or in parallel with
    the same result.
    """
    tables = tables or walk_transition_probs(graph, config)
    n = graph.num_nodes
    walks = []
    for index in range(config.walks_per_node * n):
        rng = np.random.default_rng([config.seed, index])
        walks.append(_walk(tables, index % n, config.walk_length, rng))
    return walks


def _context_pairs(walks: Sequence[Sequence[int]], hops: int) -> np.ndarray:
    pairs = []
    for walk in walks:
        nodes = np.asarray(walk, dtype=np.int64)
        for offset in range(1, min(hops, len(nodes) - 1) + 1):
            pairs.append(np.stack([nodes[:-offset], nodes[offset:]], axis=1))
            pairs.append(np.stack([nodes[offset:], nodes[:-offset]], axis=1))
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(pairs)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -30.0, 30.0)))


def train_skipgram(
    walks: Sequence[Sequence[int]], config: WalkConfig, num_nodes: Optional[int] = None
) -> StructuralEmbedding:
    """Skip-gram with negative sampling over walk co-occurrences.

    Every pair of nodes at most ``hops`` steps apart on a walk is a positive
    pair; ``negative_samples`` noise nodes per pair are drawn from the walk
    unigram distribution raised to 0.75. The learning rate decays linearly to
    ``min_learning_rate`` over all updates. Returns the input vectors.
    """
    if not walks:
        raise DataError("cannot train skip-gram without walks")
    flat = np.concatenate([np.asarray(w, dtype=np.int64) for w in walks])
    n = int(num_nodes if num_nodes is not None else flat.max() + 1)
    dim = config.dimension
    rng = np.random.default_rng(config.seed)

    vectors = (rng.random((n, dim)) - 0.5) / dim
    contexts = np.zeros((n, dim))
    noise = np.bincount(flat, minlength=n).astype(np.float64) ** 0.75
    cdf = np.cumsum(noise / noise.sum())

    pairs = _context_pairs(walks, config.hops)
    if len(pairs) == 0:
        return StructuralEmbedding(vectors)

    batches_per_epoch = -(-len(pairs) // config.batch_size)
    total = config.epochs * batches_per_epoch
    lr_span = config.learning_rate - config.min_learning_rate
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        for start in range(0, len(pairs), config.batch_size):
            lr = config.learning_rate - lr_span * step / total
            batch = pairs[order[start : start + config.batch_size]]
            center, context = batch[:, 0], batch[:, 1]
            negatives = np.minimum(
                np.searchsorted(
                    cdf, rng.random((len(batch), config.negative_samples)), side="right"
                ),
                n - 1,
            )

            v = vectors[center]
            u_pos = contexts[context]
            u_neg = contexts[negatives]
            g_pos = (1.0 - _sigmoid(np.einsum("bd,bd->b", v, u_pos))) * lr
            g_neg = -_sigmoid(np.einsum("bd,bkd->bk", v, u_neg)) * lr

            grad_v = g_pos[:, None] * u_pos + np.einsum("bk,bkd->bd", g_neg, u_neg)
            np.add.at(contexts, context, g_pos[:, None] * v)
            negative_grad = (g_neg[:, :, None] * v[:, None, :]).reshape(-1, dim)
            np.add.at(contexts, negatives.ravel(), negative_grad)
            np.add.at(vectors, center, grad_v)
            step += 1
        logger.debug("Skip-gram epoch done", extra={"epoch": epoch, "pairs": len(pairs), "lr": lr})
    return StructuralEmbedding(vectors)


def embed_structure(graph: VideoGraph, config: WalkConfig) -> StructuralEmbedding:
    """node2vec embedding of every node of ``graph``, shape T x dimension."""
    tables = walk_transition_probs(graph, config)
    walks = generate_walks(graph, config, tables)
    embedding = train_skipgram(walks, config, num_nodes=graph.num_nodes)
    logger.debug(
        "Embedded graph structure",
        extra={"video_id": graph.video_id, "chunk": graph.chunk, "walks": len(walks)},
    )
    return embedding
