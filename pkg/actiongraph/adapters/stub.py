"""adapters/stub.py

Deterministic stand-in for a text encoder.

Sentences are split into lowercase word tokens; each token is hashed with a
seeded 64-bit BLAKE2b digest into one of ``dimension`` buckets with a hashed
sign, once per salt. The signed one-hot vectors are summed and the sum is
scaled to unit length. Several salts per word keep two distinct words nearly
orthogonal even when one salted pair collides. Identical sentence and seed
give an identical vector on every platform.
"""

import hashlib
import re
from typing import List

import numpy as np

from ..core.errors import EncoderError

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

SALTS = 16


class StubEncoder:
    """Feature-hashing sentence encoder (stub backend)."""

    kind = "stub"

    def __init__(self, seed: int = 0, dimension: int = 512, salts: int = SALTS):
        if dimension < 1 or salts < 1:
            raise EncoderError(
                f"encoder dimension and salts must be positive, got {dimension} and {salts}"
            )
        self.seed = int(seed)
        self.dimension = int(dimension)
        self.salts = int(salts)
        self._key = str(self.seed).encode("utf-8")

    def __repr__(self) -> str:
        return f"StubEncoder(seed={self.seed}, dimension={self.dimension}, salts={self.salts})"

    @staticmethod
    def tokenize(sentence: str) -> List[str]:
        """Split on whitespace, punctuation and underscores."""
        return [token.lower() for token in _TOKEN.findall(sentence)]

    def _hash(self, token: str, salt: int) -> int:
        digest = hashlib.blake2b(
            token.encode("utf-8"),
            digest_size=8,
            key=self._key,
            salt=salt.to_bytes(8, "little"),
        ).digest()
        return int.from_bytes(digest, "little")

    def encode_sentence(self, sentence: str) -> np.ndarray:
        """Unit-length hashed bag-of-words vector of ``sentence``."""
        tokens = self.tokenize(sentence)
        if not tokens:
            raise EncoderError(f"sentence '{sentence}' has no encodable tokens")
        vector = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            for salt in range(self.salts):
                value = self._hash(token, salt)
                sign = -1.0 if value >> 63 else 1.0
                vector[value % self.dimension] += sign
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            # every salt cancelled out; fall back to the first salt of the first token
            value = self._hash(tokens[0], 0)
            vector[value % self.dimension] = -1.0 if value >> 63 else 1.0
            norm = 1.0
        return vector / norm
