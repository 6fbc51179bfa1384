"""core/model.py

Two-layer directed graph convolutional classifier.

Forward model, for fused node features X and the two directed operators
M_out and M_in of each graph:

    Z0 = (M_out X W0_out + M_in X W0_in) / 2
    H0 = LeakyReLU(BatchNorm(Z0))
    Hd = dropout(H0)
    Z1 = (M_out Hd W1_out + M_in Hd W1_in) / 2
    out = LogSoftmax(Linear(dropout(Linear(Z1))))

Gradients are derived by hand; ``backward`` mirrors ``forward`` step by step
in reverse. A batch of graphs is one block-diagonal system: operators are
applied block by block and never mix nodes of different graphs, while batch
normalisation pools statistics over every node of the batch.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from typing_extensions import Literal

from .errors import ModelError, ShapeMismatch, StaleCache
from .graph import AdjacencyMatrix

logger = logging.getLogger(__name__)

EDGE_EPS = 1e-8

WEIGHT_NAMES = ("conv0_out", "conv0_in", "conv1_out", "conv1_in", "mlp0_weight", "mlp1_weight")
BIAS_NAMES = ("mlp0_bias", "mlp1_bias")
NORM_NAMES = ("bn_scale", "bn_shift")
BUFFER_NAMES = ("bn_running_mean", "bn_running_var")
TRAINABLE_NAMES = WEIGHT_NAMES + NORM_NAMES + BIAS_NAMES

Mode = Literal["train", "eval"]


@dataclass(frozen=True)
class HyperParams:
    """Training hyperparameters and layer widths."""

    learning_rate: float = 0.004
    weight_decay: float = 5e-4
    dropout: float = 0.5
    batch_size: int = 8
    epochs: int = 30
    edge_balance: float = 0.1
    leaky_slope: float = 0.01
    hidden: int = 512
    mlp_hidden: Optional[int] = None
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5
    dtype: str = "float64"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ModelError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.learning_rate <= 0 or self.weight_decay < 0 or self.edge_balance < 0:
            raise ModelError("learning rate must be positive, decay and balance non-negative")
        if min(self.batch_size, self.epochs, self.hidden) < 1:
            raise ModelError("batch size, epochs and hidden width must be at least 1")
        if self.dtype not in ("float32", "float64"):
            raise ModelError(f"dtype must be float32 or float64, got {self.dtype}")

    @property
    def mlp_width(self) -> int:
        return self.mlp_hidden or self.hidden


@dataclass(frozen=True)
class DgcOperators:
    """Out-degree and in-degree normalised operators of one graph."""

    m_out: np.ndarray
    m_in: np.ndarray

    @property
    def size(self) -> int:
        return int(self.m_out.shape[0])


def dgc_operators(adj: Union[AdjacencyMatrix, np.ndarray]) -> DgcOperators:
    """Directed convolution operators of an adjacency matrix.

    With Ã = A + I, S = Ã + Ãᵀ, out-degrees d_out = Ã·1 and in-degrees
    d_in = Ãᵀ·1:

        M_out = D_out^-1/2 S D_out^-1/2 / 2
        M_in  = D_in^-1/2  S D_in^-1/2  / 2

    Both are symmetric. Degrees are at least 1 (the added identity), so no
    division by zero can occur.
    """
    a = np.asarray(getattr(adj, "matrix", adj), dtype=np.float64)
    a_tilde = a + np.eye(a.shape[0])
    s = a_tilde + a_tilde.T
    out_scale = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    in_scale = 1.0 / np.sqrt(a_tilde.sum(axis=0))
    m_out = out_scale[:, None] * s * out_scale[None, :] / 2.0
    m_in = in_scale[:, None] * s * in_scale[None, :] / 2.0
    return DgcOperators(m_out, m_in)


@dataclass(frozen=True)
class BlockOperators:
    """Operators of a batch of graphs stacked along the node axis."""

    blocks: Tuple[DgcOperators, ...]

    @classmethod
    def of(cls, operators: Union[DgcOperators, Sequence[DgcOperators]]) -> "BlockOperators":
        if isinstance(operators, DgcOperators):
            operators = [operators]
        return cls(tuple(operators))

    @property
    def offsets(self) -> List[int]:
        offsets = [0]
        for block in self.blocks:
            offsets.append(offsets[-1] + block.size)
        return offsets

    @property
    def num_nodes(self) -> int:
        return self.offsets[-1]

    def _apply(self, attr: str, y: np.ndarray) -> np.ndarray:
        result = np.empty_like(y)
        offsets = self.offsets
        for block, start, stop in zip(self.blocks, offsets, offsets[1:]):
            result[start:stop] = getattr(block, attr).astype(y.dtype, copy=False) @ y[start:stop]
        return result

    def out(self, y: np.ndarray) -> np.ndarray:
        return self._apply("m_out", y)

    def inward(self, y: np.ndarray) -> np.ndarray:
        return self._apply("m_in", y)


@dataclass
class ModelParams:
    """Every tensor of the classifier.

    ``version`` changes whenever the trainable tensors change, which lets
    ``backward`` refuse a forward cache computed with older parameters.
    """

    conv0_out: np.ndarray
    conv0_in: np.ndarray
    bn_scale: np.ndarray
    bn_shift: np.ndarray
    bn_running_mean: np.ndarray
    bn_running_var: np.ndarray
    conv1_out: np.ndarray
    conv1_in: np.ndarray
    mlp0_weight: np.ndarray
    mlp0_bias: np.ndarray
    mlp1_weight: np.ndarray
    mlp1_bias: np.ndarray
    version: int = 0

    @property
    def input_dim(self) -> int:
        return int(self.conv0_out.shape[0])

    @property
    def num_classes(self) -> int:
        return int(self.mlp1_weight.shape[1])

    def tensors(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TRAINABLE_NAMES + BUFFER_NAMES}

    def trainable(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TRAINABLE_NAMES}

    def updated(self, **tensors: np.ndarray) -> "ModelParams":
        return replace(self, version=self.version + 1, **tensors)

    def copy(self) -> "ModelParams":
        return replace(self, **{name: t.copy() for name, t in self.tensors().items()})

    def validate(self) -> None:
        for name, tensor in self.tensors().items():
            if not np.all(np.isfinite(tensor)):
                raise ModelError(f"parameter {name} has non-finite entries")


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(
    input_dim: int, num_classes: int, hyper: HyperParams, rng: np.random.Generator
) -> ModelParams:
    """Glorot-uniform weights, zero biases, unit batch-norm scale."""
    h, m = hyper.hidden, hyper.mlp_width
    dtype = np.dtype(hyper.dtype)
    params = ModelParams(
        conv0_out=_glorot(rng, input_dim, h),
        conv0_in=_glorot(rng, input_dim, h),
        bn_scale=np.ones(h),
        bn_shift=np.zeros(h),
        bn_running_mean=np.zeros(h),
        bn_running_var=np.ones(h),
        conv1_out=_glorot(rng, h, h),
        conv1_in=_glorot(rng, h, h),
        mlp0_weight=_glorot(rng, h, m),
        mlp0_bias=np.zeros(m),
        mlp1_weight=_glorot(rng, m, num_classes),
        mlp1_bias=np.zeros(num_classes),
    )
    return replace(params, **{k: v.astype(dtype) for k, v in params.tensors().items()})


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


@dataclass
class ForwardCache:
    """Intermediates kept by ``forward`` for ``backward``."""

    operators: BlockOperators
    x: np.ndarray
    xhat: np.ndarray
    inv_std: np.ndarray
    bn_out: np.ndarray
    hidden_mask: Optional[np.ndarray]
    hidden_drop: np.ndarray
    z1: np.ndarray
    mlp_mask: Optional[np.ndarray]
    mlp_drop: np.ndarray
    log_probs: np.ndarray
    batch_mean: np.ndarray
    batch_var: np.ndarray
    training: bool
    version: int
    slope: float = field(default=0.01)


def _dropout_mask(rng, shape, rate: float, dtype) -> Optional[np.ndarray]:
    if rate <= 0.0:
        return None
    return ((rng.random(shape) >= rate) / (1.0 - rate)).astype(dtype)


def forward(
    ops: Union[DgcOperators, BlockOperators, Sequence[DgcOperators]],
    x: np.ndarray,
    params: ModelParams,
    hyper: HyperParams,
    mode: Mode = "eval",
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, ForwardCache]:
    """Log-probabilities of every node, shape N x C.

    In ``train`` mode batch normalisation uses the statistics of this batch
    and dropout draws its masks from ``rng``; in ``eval`` mode running
    statistics are used and dropout is the identity. Running statistics are
    not touched here (see ``update_running_stats``).

    Raises:
        ShapeMismatch: X does not match the operators or the parameters
    """
    if mode not in ("train", "eval"):
        raise ModelError(f"mode must be 'train' or 'eval', got {mode}")
    blocks = ops if isinstance(ops, BlockOperators) else BlockOperators.of(ops)
    dtype = np.dtype(hyper.dtype)
    x = np.asarray(x, dtype=dtype)
    if x.ndim != 2 or x.shape[0] != blocks.num_nodes:
        raise ShapeMismatch(
            f"features have shape {x.shape}, operators cover {blocks.num_nodes} nodes"
        )
    if x.shape[1] != params.input_dim:
        raise ShapeMismatch(f"features have {x.shape[1]} columns, model expects {params.input_dim}")
    training = mode == "train"
    if training and rng is None:
        rng = np.random.default_rng(hyper.seed)

    z0 = (blocks.out(x @ params.conv0_out) + blocks.inward(x @ params.conv0_in)) / 2.0
    if training:
        mean = z0.mean(axis=0)
        var = z0.var(axis=0)
    else:
        mean = params.bn_running_mean
        var = params.bn_running_var
    inv_std = 1.0 / np.sqrt(var + hyper.bn_eps)
    xhat = (z0 - mean) * inv_std
    bn_out = params.bn_scale * xhat + params.bn_shift
    h0 = np.where(bn_out > 0, bn_out, hyper.leaky_slope * bn_out)

    hidden_mask = _dropout_mask(rng, h0.shape, hyper.dropout, dtype) if training else None
    hidden_drop = h0 * hidden_mask if hidden_mask is not None else h0

    z1 = (
        blocks.out(hidden_drop @ params.conv1_out) + blocks.inward(hidden_drop @ params.conv1_in)
    ) / 2.0
    mlp0 = z1 @ params.mlp0_weight + params.mlp0_bias
    mlp_mask = _dropout_mask(rng, mlp0.shape, hyper.dropout, dtype) if training else None
    mlp_drop = mlp0 * mlp_mask if mlp_mask is not None else mlp0
    logits = mlp_drop @ params.mlp1_weight + params.mlp1_bias
    log_probs = log_softmax(logits)

    cache = ForwardCache(
        operators=blocks,
        x=x,
        xhat=xhat,
        inv_std=inv_std,
        bn_out=bn_out,
        hidden_mask=hidden_mask,
        hidden_drop=hidden_drop,
        z1=z1,
        mlp_mask=mlp_mask,
        mlp_drop=mlp_drop,
        log_probs=log_probs,
        batch_mean=mean,
        batch_var=var,
        training=training,
        version=params.version,
        slope=hyper.leaky_slope,
    )
    return log_probs, cache


def update_running_stats(params: ModelParams, cache: ForwardCache, hyper: HyperParams) -> None:
    """Fold the batch statistics of a train-mode forward into the running ones.

    The running variance uses the unbiased batch variance.
    """
    if not cache.training:
        return
    n = cache.x.shape[0]
    unbiased = cache.batch_var * n / (n - 1) if n > 1 else cache.batch_var
    m = hyper.bn_momentum
    params.bn_running_mean = (1 - m) * params.bn_running_mean + m * cache.batch_mean
    params.bn_running_var = (1 - m) * params.bn_running_var + m * unbiased


def _as_blocks(adjacencies) -> List[np.ndarray]:
    if isinstance(adjacencies, (AdjacencyMatrix, np.ndarray)):
        adjacencies = [adjacencies]
    return [np.asarray(getattr(a, "matrix", a), dtype=np.float64) for a in adjacencies]


def loss_cls(log_probs: np.ndarray, labels: Sequence[int]) -> float:
    """Mean negative log-likelihood of the true classes over all nodes."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != log_probs.shape[0]:
        raise ShapeMismatch(f"{labels.shape[0]} labels for {log_probs.shape[0]} nodes")
    return float(-log_probs[np.arange(len(labels)), labels].mean())


def _edge_block(log_probs: np.ndarray, adj: np.ndarray) -> Tuple[float, np.ndarray]:
    """Summed row KL(P || Q) of one graph and its gradient w.r.t. log-probs."""
    n = adj.shape[0]
    target = adj + np.eye(n)
    p_target = target / target.sum(axis=1, keepdims=True)
    probs = np.exp(log_probs.astype(np.float64))
    s = probs @ probs.T + EDGE_EPS
    row = s.sum(axis=1, keepdims=True)
    log_q = np.log(s) - np.log(row)
    support = p_target > 0
    log_p = np.log(np.where(support, p_target, 1.0))
    kl = float(np.where(support, p_target * (log_p - log_q), 0.0).sum())
    grad_s = -p_target / s + 1.0 / row
    grad_probs = (grad_s + grad_s.T) @ probs
    return kl, probs * grad_probs


def loss_edge(log_probs: np.ndarray, adjacencies) -> float:
    """Edge alignment loss.

    Target rows are the row-normalised A + I; predicted rows are the
    row-normalised label-agreement matrix S_ij = Σ_c p_i(c) p_j(c) + 1e-8.
    The loss is Σ_i KL(P_i || Q_i) / (2N) over the N nodes of all graphs.
    """
    blocks = _as_blocks(adjacencies)
    total, start = 0.0, 0
    for adj in blocks:
        stop = start + adj.shape[0]
        kl, _ = _edge_block(log_probs[start:stop], adj)
        total += kl
        start = stop
    if start != log_probs.shape[0]:
        raise ShapeMismatch(f"adjacencies cover {start} nodes, log-probs have {log_probs.shape[0]}")
    return total / (2.0 * start)


def loss_total(cls: float, edge: float, balance: float) -> float:
    return cls + balance * edge


def backward(
    cache: ForwardCache,
    labels: Sequence[int],
    adjacencies,
    balance: float,
    params: ModelParams,
) -> Dict[str, np.ndarray]:
    """Gradients of ``loss_total`` w.r.t. every trainable tensor.

    Dropout masks are reused from the forward pass; in train mode the
    gradient flows through the batch statistics of batch normalisation.

    Raises:
        StaleCache: ``cache`` was produced with different parameters
    """
    if cache.version != params.version:
        raise StaleCache(
            f"forward cache is from parameter version {cache.version}, current is {params.version}"
        )
    log_probs = cache.log_probs
    n = log_probs.shape[0]
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != n:
        raise ShapeMismatch(f"{labels.shape[0]} labels for {n} nodes")
    blocks = cache.operators
    probs = np.exp(log_probs)

    grad_logp = np.zeros_like(log_probs, dtype=np.float64)
    grad_logp[np.arange(n), labels] -= 1.0 / n
    if balance:
        start = 0
        for adj in _as_blocks(adjacencies):
            stop = start + adj.shape[0]
            _, g = _edge_block(log_probs[start:stop], adj)
            grad_logp[start:stop] += balance * g / (2.0 * n)
            start = stop
    grad_logp = grad_logp.astype(log_probs.dtype)
    d_logits = grad_logp - probs * grad_logp.sum(axis=1, keepdims=True)

    grads = {
        "mlp1_weight": cache.mlp_drop.T @ d_logits,
        "mlp1_bias": d_logits.sum(axis=0),
    }
    d_mlp0 = d_logits @ params.mlp1_weight.T
    if cache.mlp_mask is not None:
        d_mlp0 = d_mlp0 * cache.mlp_mask
    grads["mlp0_weight"] = cache.z1.T @ d_mlp0
    grads["mlp0_bias"] = d_mlp0.sum(axis=0)
    d_z1 = d_mlp0 @ params.mlp0_weight.T

    d_z1_out = blocks.out(d_z1) / 2.0
    d_z1_in = blocks.inward(d_z1) / 2.0
    grads["conv1_out"] = cache.hidden_drop.T @ d_z1_out
    grads["conv1_in"] = cache.hidden_drop.T @ d_z1_in
    d_hidden = d_z1_out @ params.conv1_out.T + d_z1_in @ params.conv1_in.T
    if cache.hidden_mask is not None:
        d_hidden = d_hidden * cache.hidden_mask

    d_bn = d_hidden * np.where(cache.bn_out > 0, 1.0, cache.slope)
    grads["bn_scale"] = (d_bn * cache.xhat).sum(axis=0)
    grads["bn_shift"] = d_bn.sum(axis=0)
    d_xhat = d_bn * params.bn_scale
    if cache.training:
        d_z0 = (
            cache.inv_std
            / n
            * (n * d_xhat - d_xhat.sum(axis=0) - cache.xhat * (d_xhat * cache.xhat).sum(axis=0))
        )
    else:
        d_z0 = d_xhat * cache.inv_std

    grads["conv0_out"] = cache.x.T @ (blocks.out(d_z0) / 2.0)
    grads["conv0_in"] = cache.x.T @ (blocks.inward(d_z0) / 2.0)
    return grads
