"""Word vectors, sentence vectors, precomputed sentence embeddings and cosine."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SIDES = ("candidate", "reference")


class MissingEmbeddingError(KeyError):
    def __init__(self, segment_id: str, side: str):
        self.segment_id = segment_id
        self.side = side
        super().__init__(f"no sentence embedding for segment {segment_id!r} ({side})")


def cosine(u, v) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"cosine of vectors with shapes {u.shape} and {v.shape}")
    nu = float(np.dot(u, u))
    nv = float(np.dot(v, v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    # sqrt(nu * nv) rather than sqrt(nu) * sqrt(nv): exact 1.0 for u == v
    r = float(np.dot(u, v)) / math.sqrt(nu * nv)
    return min(1.0, max(-1.0, r))


def bag_vector(items: Sequence[str]) -> Counter:
    return Counter(items)


def bag_cosine(a: Sequence[str], b: Sequence[str]) -> float:
    """Cosine of the count vectors of two item sequences over their joint vocabulary."""
    ca, cb = bag_vector(a), bag_vector(b)
    vocab = sorted(ca.keys() | cb.keys())
    return cosine([ca[w] for w in vocab], [cb[w] for w in vocab])


@dataclass(frozen=True)
class WordVectorStore:
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("word-vector dimension must be positive")
        for w, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise ValueError(f"vector for {w!r} has shape {vec.shape}, expected ({self.dim},)")

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)


def load_word_vectors(path) -> WordVectorStore:
    """Read the plain-text format: a ``count dim`` header, then ``word v1 ... vd``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: expected header 'count dim'")
        count, dim = int(header[0]), int(header[1])
        vectors = {}
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip().split(" ")
            if len(parts) == 1 and not parts[0]:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected word and {dim} values")
            vectors[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=np.float64)
    if len(vectors) != count:
        raise ValueError(f"{path}: header announces {count} vectors, found {len(vectors)}")
    return WordVectorStore(dim, vectors)


def sentence_vector(tokens: Sequence[str], store: WordVectorStore) -> np.ndarray:
    """Mean of the in-vocabulary word vectors; zeros if there are none."""
    known = [store.vectors[t] for t in tokens if t in store.vectors]
    if not known:
        return np.zeros(store.dim)
    return np.mean(known, axis=0)


@dataclass(frozen=True)
class SentenceEmbeddingProvider:
    """Precomputed sentence embeddings keyed by (segment_id, side).

    With ``fallback`` on, a missing key falls back to the mean word vector.
    """

    embeddings: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    fallback: bool = True

    def __post_init__(self):
        dims = {v.shape for v in self.embeddings.values()}
        if len(dims) > 1:
            raise ValueError(f"sentence embeddings have mixed shapes {sorted(dims)}")


def load_sentence_embeddings(path, fallback: bool = True) -> SentenceEmbeddingProvider:
    emb = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                side = obj["side"]
                if side not in SIDES:
                    raise ValueError(f"side must be one of {SIDES}, got {side!r}")
                emb[(obj["segment_id"], side)] = np.asarray(obj["vector"], dtype=np.float64)
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return SentenceEmbeddingProvider(emb, fallback)


def sentence_embedding(segment_id: str, side: str, provider: SentenceEmbeddingProvider,
                       store: WordVectorStore, tokens: Sequence[str] = ()) -> np.ndarray:
    vec = provider.embeddings.get((segment_id, side))
    if vec is not None:
        return vec
    if not provider.fallback:
        raise MissingEmbeddingError(segment_id, side)
    return sentence_vector(tokens, store)
