"""adapters/table.py

Precomputed label embeddings (table backend).

The table is a JSON object mapping each label token to its vector, for
instance text-encoder outputs exported from another tool. Vectors are used as
they are; no normalisation is applied.
"""

import json
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np

from ..core.errors import EncoderError, FormatError, MissingEmbedding, MissingFile


class TableEncoder:
    """Look label tokens up in a precomputed embedding table."""

    kind = "table"

    def __init__(self, table: Mapping[str, Sequence[float]], path: Optional[str] = None):
        self.path = path
        self._table: Dict[str, np.ndarray] = {}
        dimensions = set()
        for token, vector in table.items():
            array = np.asarray(vector, dtype=np.float64)
            if array.ndim != 1:
                raise FormatError(f"embedding of '{token}' is not a flat vector")
            dimensions.add(array.shape[0])
            self._table[str(token)] = array
        if len(dimensions) > 1:
            raise FormatError(f"embedding table mixes dimensions {sorted(dimensions)}")
        self.dimension = dimensions.pop() if dimensions else 0

    def __repr__(self) -> str:
        return f"TableEncoder(path={self.path!r}, labels={len(self._table)})"

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "TableEncoder":
        path = Path(path)
        if not path.exists():
            raise MissingFile(f"embedding table not found: {path}", {"path": str(path)})
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise FormatError("embedding table file must contain a JSON object of vectors")
        return cls(raw, str(path))

    def __contains__(self, token: str) -> bool:
        return token in self._table

    def encode_label(self, token: str) -> np.ndarray:
        if not self._table:
            raise EncoderError("embedding table is empty")
        if token not in self._table:
            raise MissingEmbedding(token)
        return self._table[token].copy()
