"""Two-stage hybrid candidate scoring.

Stage I embeds the query and every candidate's verbalization and keeps the
top-N by cosine similarity; Stage II reranks only the survivors and fuses
both scores with weight ``alpha``. Embedding and rerank providers are
pluggable; the built-in hash/overlap providers need no model and keep runs
deterministic.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np
import requests

from .kg import RelationRef, Triple, EntityRef, LiteralValue

Payload = Union[Triple, RelationRef]


class DimensionMismatch(ValueError):
    pass


class ZeroVector(ValueError):
    pass


class MissingStageScore(ValueError):
    """Fusion or selection asked for a score that was never computed."""


@dataclass
class ScoringConfig:
    alpha: float = 0.7  # rerank weight in the fusion
    top_n: int = 50     # Stage-I survivors handed to the reranker
    dimension: int = 256

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.top_n < 1:
            raise ValueError(f"top_n must be >= 1, got {self.top_n}")
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")


@dataclass
class ScoredCandidate:
    payload: Payload
    text: str
    cos: float | None = None
    rerank: float | None = None
    combined: float | None = None


def payload_id(payload: Payload) -> str:
    """Deterministic identifier used for tie-breaking."""
    if isinstance(payload, Triple):
        return payload.key()
    return payload.id


def verbalize(payload: Payload) -> str:
    """Plain-text form handed to embedding and rerank providers."""
    if isinstance(payload, RelationRef):
        return payload.label or payload.id
    return " ".join(_term_text(part) for part in (payload.subject, payload.relation, payload.object))


def _term_text(term) -> str:
    if isinstance(term, (EntityRef, RelationRef)):
        return term.label or term.id
    if isinstance(term, LiteralValue):
        return term.value
    return str(term)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine undefined for a zero vector")
    return float(np.dot(a, b) / (norm_a * norm_b))


def fuse(candidate: ScoredCandidate, cfg: ScoringConfig) -> ScoredCandidate:
    if candidate.cos is None or candidate.rerank is None:
        raise MissingStageScore("both cos and rerank must be set before fusion")
    combined = cfg.alpha * candidate.rerank + (1.0 - cfg.alpha) * candidate.cos
    return replace(candidate, combined=combined)


def top_n(candidates: Sequence[ScoredCandidate], n: int, key: str = "cos") -> list[ScoredCandidate]:
    """The n largest by ``key`` (cos|combined), descending; ties break on the
    payload identifier so output order never depends on input order."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if key not in ("cos", "combined"):
        raise ValueError(f"key must be 'cos' or 'combined', got {key!r}")
    for c in candidates:
        if getattr(c, key) is None:
            raise MissingStageScore(f"candidate {payload_id(c.payload)} has no {key} score")
    ranked = sorted(candidates, key=lambda c: (-getattr(c, key), payload_id(c.payload)))
    return ranked[:n]


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, float(value)))


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\w+")


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class EmbeddingProvider:
    dimension: int = 0

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        raise NotImplementedError


class HashEmbedding(EmbeddingProvider):
    """Deterministic token-hash bag-of-words embedding; no model required."""

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension

    def _index(self, token: str) -> int:
        digest = hashlib.sha1(token.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") % self.dimension

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        vectors = []
        for text in texts:
            vec = np.zeros(self.dimension, dtype=float)
            for token in _tokens(text):
                vec[self._index(token)] += 1.0
            vectors.append(vec)
        return vectors


class HttpEmbedding(EmbeddingProvider):
    """POST {texts} to an embedding endpoint, read {embeddings}."""

    def __init__(self, url: str, dimension: int, session=None, timeout: float = 60.0):
        if not url:
            raise ValueError("embedding_url must be set for the http provider")
        self.url = url
        self.dimension = dimension
        self._session = session if session is not None else requests.Session()
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        try:
            response = self._session.post(self.url, json={"texts": list(texts)}, timeout=self.timeout)
            rows = response.json()["embeddings"]
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            raise RuntimeError(f"embedding endpoint failed: {exc}") from exc
        vectors = [np.asarray(row, dtype=float) for row in rows]
        for vec in vectors:
            if vec.shape != (self.dimension,):
                raise DimensionMismatch(f"expected dimension {self.dimension}, got {vec.shape}")
        return vectors


class RerankProvider:
    def rerank(self, query: str, texts: Sequence[str]) -> list[float]:
        raise NotImplementedError


class OverlapRerank(RerankProvider):
    """Token-Jaccard rerank: deterministic, model-free, already in [0, 1]."""

    def rerank(self, query: str, texts: Sequence[str]) -> list[float]:
        query_tokens = set(_tokens(query))
        scores = []
        for text in texts:
            text_tokens = set(_tokens(text))
            union = query_tokens | text_tokens
            scores.append(len(query_tokens & text_tokens) / len(union) if union else 1.0)
        return scores


class ConstantRerank(RerankProvider):
    def __init__(self, value: float = 0.5):
        self.value = _clamp01(value)

    def rerank(self, query: str, texts: Sequence[str]) -> list[float]:
        return [self.value] * len(texts)


class HttpRerank(RerankProvider):
    """POST {query, texts} to a rerank endpoint, read {scores}."""

    def __init__(self, url: str, session=None, timeout: float = 60.0):
        if not url:
            raise ValueError("rerank_url must be set for the http provider")
        self.url = url
        self._session = session if session is not None else requests.Session()
        self.timeout = timeout

    def rerank(self, query: str, texts: Sequence[str]) -> list[float]:
        try:
            response = self._session.post(
                self.url, json={"query": query, "texts": list(texts)}, timeout=self.timeout
            )
            scores = response.json()["scores"]
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            raise RuntimeError(f"rerank endpoint failed: {exc}") from exc
        return [float(s) for s in scores]


# ---------------------------------------------------------------------------
# Pipeline entry point
# ---------------------------------------------------------------------------


def score_candidates(
    query_text: str,
    candidates: Sequence[Payload],
    cfg: ScoringConfig,
    embedder: EmbeddingProvider,
    reranker: RerankProvider,
) -> list[ScoredCandidate]:
    """Score candidates against the query and return them sorted by the fused
    score, descending.

    Candidates cut in Stage I are never shown to the reranker; with the
    default config that bounds every rerank call to 50 texts.
    """
    if not candidates:
        return []
    texts = [verbalize(c) for c in candidates]
    vectors = embedder.embed([query_text] + texts)
    query_vec = vectors[0]
    scored = [
        ScoredCandidate(payload=c, text=t, cos=cosine(query_vec, v))
        for c, t, v in zip(candidates, texts, vectors[1:])
    ]
    survivors = top_n(scored, cfg.top_n, key="cos")
    rerank_scores = reranker.rerank(query_text, [s.text for s in survivors])
    if len(rerank_scores) != len(survivors):
        raise MissingStageScore(
            f"reranker returned {len(rerank_scores)} scores for {len(survivors)} candidates"
        )
    fused = [
        fuse(replace(s, rerank=_clamp01(score)), cfg)
        for s, score in zip(survivors, rerank_scores)
    ]
    return sorted(fused, key=lambda c: (-c.combined, payload_id(c.payload)))
