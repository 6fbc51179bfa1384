"""core/semantic.py

Prompt-based semantic node features and multi-modal fusion.

A node's semantic feature is the text embedding of its label written into a
sentence template. Which encoder produces the embedding is hidden behind
``SemanticEncoder``, a facade over the stub and table backends in
``adapters``; the rest of the package never talks to a backend directly.
"""

import enum
import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Union

import numpy as np
from typing_extensions import TypeAlias

from ..adapters.stub import StubEncoder
from ..adapters.table import TableEncoder
from .errors import DataError, EncoderError, RowCountMismatch
from .graph import FrameSequence, LabelMap

logger = logging.getLogger(__name__)

SEMANTIC_DIM = 512


class PromptTemplate(enum.Enum):
    """Sentence templates; RAW leaves the bare label token."""

    PREFIX = "prefix"
    CLOZE = "cloze"
    SUFFIX = "suffix"
    ENSEMBLE = "ensemble"
    RAW = "raw"


_PATTERNS = {
    PromptTemplate.PREFIX: "{}, a video of action",
    PromptTemplate.CLOZE: "this is {}, a video of action",
    PromptTemplate.SUFFIX: "human action of {}",
    PromptTemplate.RAW: "{}",
}
_ENSEMBLE_ORDER = (PromptTemplate.PREFIX, PromptTemplate.CLOZE, PromptTemplate.SUFFIX)


def prompt_fill(token: str, template: PromptTemplate) -> Union[str, List[str]]:
    """Write ``token`` into ``template``.

    ENSEMBLE returns the prefix, cloze and suffix sentences in that order.

    >>> prompt_fill("pour", PromptTemplate.SUFFIX)
    'human action of pour'
    """
    if not token:
        raise EncoderError("label token must not be empty")
    template = PromptTemplate(template)
    if template == PromptTemplate.ENSEMBLE:
        return [_PATTERNS[t].format(token) for t in _ENSEMBLE_ORDER]
    return _PATTERNS[template].format(token)


Backend: TypeAlias = Union[StubEncoder, TableEncoder]


class SemanticEncoder:
    """Facade turning label tokens into semantic vectors.

    With the stub backend the token is expanded by the prompt template and the
    sentences are encoded; an ensemble is the mean of the three sentence
    vectors scaled back to unit length. The table backend stores one vector
    per label and ignores the template.
    """

    def __init__(self, backend: Backend, template: PromptTemplate = PromptTemplate.ENSEMBLE):
        self._backend = backend
        self.template = PromptTemplate(template)
        self._cache: Dict[str, np.ndarray] = {}

        if isinstance(backend, TableEncoder):
            mode = "table"
        else:
            mode = "stub"
        self._mode = mode

    @property
    def dimension(self) -> int:
        return self._backend.dimension

    @property
    def mode(self) -> str:
        return self._mode

    def __str__(self) -> str:
        return f"SemanticEncoder(mode={self._mode}, template={self.template.value})"

    def encode(self, sentences: Union[str, Sequence[str]], token: str) -> np.ndarray:
        """Vector of ``token`` given its prompt sentence(s).

        Raises:
            MissingEmbedding: table backend without a vector for ``token``
        """
        if self._mode == "table":
            return self._backend.encode_label(token)
        if isinstance(sentences, str):
            return self._backend.encode_sentence(sentences)
        vectors = np.stack([self._backend.encode_sentence(s) for s in sentences])
        mean = vectors.mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            raise EncoderError(f"prompt ensemble of '{token}' has a zero mean vector")
        return mean / norm

    def encode_label(self, token: str) -> np.ndarray:
        if token not in self._cache:
            self._cache[token] = self.encode(prompt_fill(token, self.template), token)
        return self._cache[token].copy()


@dataclass(frozen=True)
class SemanticEmbedding:
    """Row t is the semantic embedding of node t's label."""

    matrix: np.ndarray


def embed_semantic(
    seq: FrameSequence, label_map: LabelMap, encoder: SemanticEncoder
) -> SemanticEmbedding:
    """Semantic feature of every frame of ``seq``.

    The labels of ``seq`` are used as given: for a pseudo-labelled test video
    these are the pseudo-labels. Frames with equal labels share one row.
    """
    label_map.validate(seq)
    classes = sorted(set(seq.labels))
    vectors = {c: encoder.encode_label(label_map.token_of(c)) for c in classes}
    matrix = np.stack([vectors[label] for label in seq.labels])
    return SemanticEmbedding(matrix)


def zero_semantic(num_nodes: int, dimension: int = SEMANTIC_DIM) -> SemanticEmbedding:
    """Semantic block for runs without semantic features."""
    return SemanticEmbedding(np.zeros((num_nodes, dimension), dtype=np.float64))


BLOCKS = ("vis", "str", "sem")


@dataclass(frozen=True)
class FeatureBundle:
    """Visual, structural and semantic blocks of one chunk and their fusion."""

    visual: np.ndarray
    structural: np.ndarray
    semantic: np.ndarray
    fused: np.ndarray

    @property
    def num_nodes(self) -> int:
        return int(self.fused.shape[0])

    def block(self, name: str) -> np.ndarray:
        return {"vis": self.visual, "str": self.structural, "sem": self.semantic}[name]

    def select(self, blocks: Sequence[str]) -> np.ndarray:
        """Fuse only ``blocks``, still in visual, structural, semantic order."""
        wanted = [name for name in BLOCKS if name in set(blocks)]
        if not wanted:
            raise DataError("at least one feature block must be selected")
        return np.concatenate([self.block(name) for name in wanted], axis=1)


def fuse_features(visual, structural, semantic) -> FeatureBundle:
    """Concatenate visual, structural and semantic blocks column-wise.

    Raises:
        RowCountMismatch: blocks disagree on the number of rows
    """
    blocks = [
        np.atleast_2d(np.asarray(getattr(b, "matrix", b))) for b in (visual, structural, semantic)
    ]
    rows = {b.shape[0] for b in blocks}
    if len(rows) != 1:
        counts = [b.shape[0] for b in blocks]
        raise RowCountMismatch(f"feature blocks have different row counts: {counts}")
    return FeatureBundle(blocks[0], blocks[1], blocks[2], np.concatenate(blocks, axis=1))
