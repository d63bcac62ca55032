"""Text embeddings behind a small provider abstraction.

The event score only needs two things from an embedding provider: a
deterministic `embed(text)` and a fixed dimension. Two providers ship here:

* `StubEmbedder` -- a dependency-free bag-of-tokens embedder. Tokens are
  case-folded, split on non-alphanumerics, hashed (sha1, so stable across
  processes and platforms) into one of 256 buckets, counted, and
  L2-normalized. Identical token multisets embed identically; overlapping
  texts score between 0 and 1. Good enough for offline tests and demos.
* `RemoteEmbedder` -- a thin HTTP client for any server speaking the
  one-endpoint contract: POST {"texts": [..]} -> {"vectors": [[..], ..]}.
  This is how a real sentence-embedding model is plugged in.

Both are safe for concurrent calls.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Protocol, Sequence

import requests


class DimensionMismatch(Exception):
    """Vectors of different dimensions were combined."""


class ZeroVector(Exception):
    """Cosine similarity is undefined for an all-zero vector."""


class ProviderUnavailable(Exception):
    """The remote embedding service could not produce vectors."""


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)


class EmbeddingProvider(Protocol):
    name: str
    dim: int

    def embed(self, text: str) -> EmbeddingVector: ...

    def embed_many(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a, b) / (|a| * |b|), clamped into [-1, 1] against rounding.

    Bitwise-identical vectors short-circuit to exactly 1.0 so that
    self-similarity is exact rather than 1 - epsilon.
    """
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} vs {b.dim}")
    if a.is_zero() or b.is_zero():
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    if a.values == b.values:
        return 1.0
    dot = sum(x * y for x, y in zip(a.values, b.values))
    norm = math.sqrt(sum(x * x for x in a.values)) * math.sqrt(sum(y * y for y in b.values))
    if norm == 0.0:  # squared components can underflow for subnormal values
        raise ZeroVector("vector norm underflowed to zero")
    return max(-1.0, min(1.0, dot / norm))


_TOKEN_RE = re.compile(r"[^0-9a-z]+")


class StubEmbedder:
    """Deterministic offline embedder; see module docstring for construction."""

    name = "stub"

    def __init__(self, dim: int = 256):
        self.dim = dim

    def embed(self, text: str) -> EmbeddingVector:
        tokens = [t for t in _TOKEN_RE.split(text.casefold()) if t]
        if not tokens:
            # Designated vector for empty (or token-free) text.
            return EmbeddingVector((1.0,) + (0.0,) * (self.dim - 1))
        counts = [0] * self.dim
        for token in tokens:
            digest = hashlib.sha1(token.encode("utf-8")).digest()
            counts[int.from_bytes(digest[:8], "big") % self.dim] += 1
        norm = math.sqrt(sum(c * c for c in counts))
        return EmbeddingVector(tuple(c / norm for c in counts))

    def embed_many(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [self.embed(t) for t in texts]


class RemoteEmbedder:
    """Client for an embedding HTTP service; batching is order-preserving."""

    name = "remote"

    def __init__(self, url: str, dim: int, timeout_s: float = 30.0):
        self.url = url
        self.dim = dim
        self.timeout_s = timeout_s

    def embed(self, text: str) -> EmbeddingVector:
        return self.embed_many([text])[0]

    def embed_many(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        try:
            response = requests.post(
                self.url, json={"texts": list(texts)}, timeout=self.timeout_s
            )
            response.raise_for_status()
            vectors = response.json()["vectors"]
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            raise ProviderUnavailable(f"embedding service at {self.url}: {exc}") from exc
        if len(vectors) != len(texts):
            raise ProviderUnavailable(
                f"embedding service returned {len(vectors)} vectors for {len(texts)} texts"
            )
        out = []
        for vec in vectors:
            if len(vec) != self.dim:
                raise ProviderUnavailable(
                    f"embedding service returned dim {len(vec)}, expected {self.dim}"
                )
            out.append(EmbeddingVector(tuple(float(v) for v in vec)))
        return out


def make_provider(kind: str, url: str | None = None, dim: int = 256) -> EmbeddingProvider:
    """Provider factory keyed by the `embedding.provider` config value."""
    if kind == "stub":
        return StubEmbedder(dim=dim)
    if kind == "remote":
        if not url:
            raise ValueError("remote embedding provider requires a url")
        return RemoteEmbedder(url=url, dim=dim)
    raise ValueError(f"unknown embedding provider {kind!r}")
