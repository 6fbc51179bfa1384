"""core/training.py

Adam optimisation, the batched training loop and prediction.

Training is the single-writer section of the pipeline: one parameter set,
updated batch after batch in an order fixed by the seed.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EmptyDataset, ShapeMismatch
from .graph import AdjacencyMatrix, VideoGraph, adjacency
from .model import (
    WEIGHT_NAMES,
    BlockOperators,
    DgcOperators,
    HyperParams,
    ModelParams,
    backward,
    dgc_operators,
    forward,
    init_params,
    loss_cls,
    loss_edge,
    loss_total,
    update_running_stats,
)

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class GraphExample:
    """One chunk-graph ready for the classifier."""

    video_id: str
    chunk: int
    adjacency: AdjacencyMatrix
    operators: DgcOperators
    features: np.ndarray
    labels: np.ndarray

    @property
    def num_nodes(self) -> int:
        return int(self.labels.shape[0])

    @classmethod
    def from_graph(cls, graph: VideoGraph, features, labels: Optional[Sequence[int]] = None):
        """Pair ``graph`` with its fused features.

        ``features`` is a matrix or anything with a ``fused`` matrix. Labels
        default to the graph's own node labels.
        """
        matrix = np.asarray(getattr(features, "fused", features))
        if matrix.shape[0] != graph.num_nodes:
            raise ShapeMismatch(
                f"graph '{graph.video_id}' chunk {graph.chunk} has {graph.num_nodes} nodes "
                f"but {matrix.shape[0]} feature rows",
                {"video_id": graph.video_id, "chunk": graph.chunk},
            )
        adj = adjacency(graph)
        node_labels = np.asarray(graph.labels if labels is None else labels, dtype=np.int64)
        return cls(graph.video_id, graph.chunk, adj, dgc_operators(adj), matrix, node_labels)


class LossRecord(NamedTuple):
    epoch: int
    batch: int
    loss_cls: float
    loss_edge: float
    loss_total: float


@dataclass
class TrainState:
    """Adam moments, step counter and the loss log."""

    first_moment: Dict[str, np.ndarray]
    second_moment: Dict[str, np.ndarray]
    step: int = 0
    epoch: int = 0
    log: List[LossRecord] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "TrainState":
        trainable = params.trainable()
        return cls(
            {name: np.zeros_like(t) for name, t in trainable.items()},
            {name: np.zeros_like(t) for name, t in trainable.items()},
        )

    def epoch_means(self) -> List[float]:
        """Mean total loss of every finished epoch."""
        totals: Dict[int, List[float]] = {}
        for record in self.log:
            totals.setdefault(record.epoch, []).append(record.loss_total)
        return [float(np.mean(totals[e])) for e in sorted(totals)]


def adam_step(
    params: ModelParams, grads: Dict[str, np.ndarray], state: TrainState, hyper: HyperParams
) -> Tuple[ModelParams, TrainState]:
    """One Adam update with bias correction.

    Weight decay is coupled L2 on weight matrices only: ``decay * w`` joins
    the gradient before the moments are updated. Biases and batch-norm
    parameters are not decayed.
    """
    step = state.step + 1
    first, second, updated = {}, {}, {}
    for name, value in params.trainable().items():
        grad = grads[name]
        if grad.shape != value.shape:
            raise ShapeMismatch(
                f"gradient of {name} has shape {grad.shape}, expected {value.shape}"
            )
        if name in WEIGHT_NAMES and hyper.weight_decay:
            grad = grad + hyper.weight_decay * value
        m = ADAM_BETA1 * state.first_moment[name] + (1 - ADAM_BETA1) * grad
        v = ADAM_BETA2 * state.second_moment[name] + (1 - ADAM_BETA2) * grad * grad
        m_hat = m / (1 - ADAM_BETA1**step)
        v_hat = v / (1 - ADAM_BETA2**step)
        updated[name] = (value - hyper.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)).astype(
            value.dtype
        )
        first[name], second[name] = m, v
    new_state = TrainState(first, second, step, state.epoch, state.log)
    return params.updated(**updated), new_state


def _batch(examples: Sequence[GraphExample]):
    ops = BlockOperators.of([e.operators for e in examples])
    x = np.concatenate([e.features for e in examples])
    labels = np.concatenate([e.labels for e in examples])
    return ops, x, labels, [e.adjacency for e in examples]


EpochCallback = Callable[[int, ModelParams, TrainState], None]


def train(
    dataset: Sequence[GraphExample],
    hyper: HyperParams,
    seed: Optional[int] = None,
    num_classes: Optional[int] = None,
    on_epoch: Optional[EpochCallback] = None,
) -> Tuple[ModelParams, TrainState]:
    """Train a fresh classifier on ``dataset``.

    Every epoch visits the graphs in a seeded random order, ``batch_size``
    graphs per batch. Batch-norm running statistics are updated after every
    forward pass.

    Raises:
        EmptyDataset: ``dataset`` has no graphs
    """
    if not dataset:
        raise EmptyDataset("cannot train on an empty dataset")
    seed = hyper.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    input_dim = dataset[0].features.shape[1]
    if any(e.features.shape[1] != input_dim for e in dataset):
        raise ShapeMismatch("all graphs must share one feature width")
    if num_classes is None:
        num_classes = int(max(e.labels.max() for e in dataset)) + 1

    params = init_params(input_dim, num_classes, hyper, rng)
    state = TrainState.zeros_like(params)
    logger.info(
        "Training started",
        extra={
            "graphs": len(dataset),
            "input_dim": input_dim,
            "classes": num_classes,
            "seed": seed,
        },
    )

    for epoch in range(hyper.epochs):
        state.epoch = epoch
        order = rng.permutation(len(dataset))
        for batch_index, start in enumerate(range(0, len(order), hyper.batch_size)):
            batch = [dataset[i] for i in order[start : start + hyper.batch_size]]
            ops, x, labels, adjacencies = _batch(batch)
            log_probs, cache = forward(ops, x, params, hyper, "train", rng)
            cls = loss_cls(log_probs, labels)
            edge = loss_edge(log_probs, adjacencies)
            total = loss_total(cls, edge, hyper.edge_balance)
            grads = backward(cache, labels, adjacencies, hyper.edge_balance, params)
            update_running_stats(params, cache, hyper)
            params, state = adam_step(params, grads, state, hyper)
            state.log.append(LossRecord(epoch, batch_index, cls, edge, total))
            logger.debug(
                "Batch done",
                extra={"epoch": epoch, "batch": batch_index, "loss_total": total},
            )
        means = state.epoch_means()
        logger.info("Epoch finished", extra={"epoch": epoch, "loss_total": means[-1]})
        if on_epoch is not None:
            on_epoch(epoch, params, state)

    params.validate()
    state.epoch = hyper.epochs
    return params, state


class Prediction(NamedTuple):
    log_probs: np.ndarray
    labels: np.ndarray


def predict(
    example: Union[GraphExample, Tuple[VideoGraph, object]],
    params: ModelParams,
    hyper: HyperParams = HyperParams(),
) -> Prediction:
    """Eval-mode log-probabilities and argmax labels of one graph.

    Ties go to the smaller class id.
    """
    if not isinstance(example, GraphExample):
        graph, features = example
        example = GraphExample.from_graph(graph, features)
    log_probs, _ = forward(example.operators, example.features, params, hyper, "eval")
    return Prediction(log_probs, np.argmax(log_probs, axis=1))


def node_accuracy(
    dataset: Sequence[GraphExample], params: ModelParams, hyper: HyperParams
) -> float:
    """Fraction of nodes whose predicted label equals their own label."""
    correct = total = 0
    for example in dataset:
        prediction = predict(example, params, hyper)
        correct += int((prediction.labels == example.labels).sum())
        total += example.num_nodes
    return correct / total if total else 0.0
