"""Text embedding providers and cosine similarity.

The default provider is fully deterministic (hashed character trigrams), so
reward computation and curation are reproducible offline. A remote slot with
the same surface exists for fidelity runs against a real embedding service.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from hashlib import blake2b
from typing import Callable, Protocol, Sequence

import numpy as np

from .core import normalize_text
from .errors import RemoteUnavailable

DEFAULT_DIM = 256

KIND_DETERMINISTIC = "deterministic-ngram"
KIND_REMOTE = "remote"


class EmbeddingProvider(Protocol):
    dim: int
    kind: str

    def embed(self, text: str) -> np.ndarray: ...


@dataclass(frozen=True)
class TrigramEmbedder:
    """Hashed character trigrams over normalized text, signed buckets, L2-normalized.

    Nonempty normalized text embeds to a unit vector; text that normalizes to
    nothing embeds to the zero vector.
    """

    dim: int = DEFAULT_DIM
    kind: str = field(default=KIND_DETERMINISTIC, init=False)

    def embed(self, text: str) -> np.ndarray:
        s = normalize_text(text)
        vec = np.zeros(self.dim)
        if not s:
            return vec
        padded = f" {s} "  # boundary grams so one-char tokens still hash
        for i in range(len(padded) - 2):
            digest = blake2b(padded[i : i + 3].encode("utf-8"), digest_size=8).digest()
            h = int.from_bytes(digest, "big")
            vec[(h >> 1) % self.dim] += 1.0 if h & 1 else -1.0
        norm = np.linalg.norm(vec)
        return vec / norm if norm else vec


@dataclass(frozen=True)
class RemoteEmbedder:
    """Provider backed by an external fetch callable (HTTP client, SDK, cache).

    Any fetch failure or a wrong-shaped result surfaces as RemoteUnavailable.
    """

    fetch: Callable[[str], Sequence[float]]
    dim: int = DEFAULT_DIM
    kind: str = field(default=KIND_REMOTE, init=False)

    def embed(self, text: str) -> np.ndarray:
        try:
            values = self.fetch(text)
        except Exception as exc:
            raise RemoteUnavailable(f"embedding fetch failed: {exc}") from exc
        arr = np.asarray(values, dtype=float)
        if arr.shape != (self.dim,):
            raise RemoteUnavailable(
                f"remote embedding has shape {arr.shape}, expected ({self.dim},)"
            )
        return arr


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; zero whenever either vector is zero."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def semantic_similarity(provider: EmbeddingProvider, a: str, b: str) -> float:
    """Cosine of the two embeddings clamped to [0, 1], as dependency scoring expects."""
    return max(0.0, cosine(provider.embed(a), provider.embed(b)))
