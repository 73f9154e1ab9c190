"""Embedding vector types and clients.

Two vector shapes exist: a single dense vector per text (for standard RAG
over chunks and summaries) and a multi-vector set of token/patch embeddings
per page or query (for late-interaction retrieval). Clients are pluggable:
an HTTP client that speaks the embedding-service contract, and a seeded-hash
stub that is fully deterministic and needs no service.
"""

from __future__ import annotations

import base64
import hashlib
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Protocol

import httpx
import numpy as np

from .corpus import PageImage
from .errors import ConfigurationError, TransportError

logger = logging.getLogger(__name__)

MULTIVECTOR_DIM = 128
DEFAULT_DENSE_DIM = 768
DEFAULT_IMAGE_LONG_SIDE = 1300

DENSE_MODEL_TAG = "BAAI/bge-base-en-v1.5"


class RetrieverId(Enum):
    COLPALI = "colpali"
    COLQWEN = "colqwen"
    COLFLOR = "colflor"


RETRIEVER_MODEL_TAGS = {
    RetrieverId.COLPALI: "vidore/colpali-v1.3-merged",
    RetrieverId.COLQWEN: "vidore/colqwen2-v0.2",
    RetrieverId.COLFLOR: "ahmed-masry/ColFlor",
}


class ProtocolError(TransportError):
    """The embedding service answered with a body violating its contract."""


def _as_readonly(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DenseVector:
    """Fixed-length vector of finite reals."""

    values: np.ndarray

    def __post_init__(self):
        values = _as_readonly(np.asarray(self.values))
        if values.ndim != 1 or values.size == 0:
            raise ValueError("dense vector must be a non-empty 1-D array")
        if not np.all(np.isfinite(values)):
            raise ValueError("dense vector contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class MultiVector:
    """Non-empty set of token/patch vectors sharing one dimension."""

    tokens: np.ndarray

    def __post_init__(self):
        tokens = _as_readonly(np.asarray(self.tokens))
        if tokens.ndim != 2 or tokens.shape[0] == 0 or tokens.shape[1] == 0:
            raise ValueError("multi-vector must be a non-empty (n_tokens, dim) array")
        if not np.all(np.isfinite(tokens)):
            raise ValueError("multi-vector contains non-finite values")
        object.__setattr__(self, "tokens", tokens)

    @property
    def dim(self) -> int:
        return int(self.tokens.shape[1])

    @property
    def n_tokens(self) -> int:
        return int(self.tokens.shape[0])


class EmbeddingClient(Protocol):
    def embed_text(self, text: str) -> DenseVector: ...

    def embed_page(self, image: PageImage, retriever: RetrieverId) -> MultiVector: ...

    def embed_query(self, text: str, retriever: RetrieverId) -> MultiVector: ...


# ---------------------------------------------------------------------------
# Operations (precondition checks wrap the client calls)
# ---------------------------------------------------------------------------


def embed_text(text: str, client: EmbeddingClient) -> DenseVector:
    if not text.strip():
        raise ValueError("cannot embed empty text")
    return client.embed_text(text)


def embed_page(
    image: PageImage,
    retriever: RetrieverId,
    client: EmbeddingClient,
    *,
    image_long_side_cap: int = DEFAULT_IMAGE_LONG_SIDE,
) -> MultiVector:
    if image.long_side > image_long_side_cap:
        raise ValueError(
            f"page image long side {image.long_side}px exceeds cap {image_long_side_cap}px; "
            "normalize before embedding"
        )
    return client.embed_page(image, retriever)


def embed_query_multivector(
    text: str, retriever: RetrieverId, client: EmbeddingClient
) -> MultiVector:
    if not text.strip():
        raise ValueError("cannot embed empty query text")
    return client.embed_query(text, retriever)


# ---------------------------------------------------------------------------
# Deterministic stub backend
# ---------------------------------------------------------------------------


def _seeded_vector(seed_text: bytes, dim: int) -> np.ndarray:
    seed = int.from_bytes(hashlib.sha256(seed_text).digest()[:8], "big")
    rng = np.random.default_rng(seed)
    return rng.standard_normal(dim)


class StubEmbedder:
    """Seeded-hash embeddings: deterministic, service-free.

    Contract: dense vectors are seeded by the text; query multi-vectors have
    one token per whitespace word; page multi-vectors have a fixed number of
    patch vectors seeded by the image bytes.
    """

    def __init__(self, dense_dim: int = DEFAULT_DENSE_DIM, patch_tokens: int = 4):
        if dense_dim < 1 or patch_tokens < 1:
            raise ConfigurationError("stub embedder dims must be positive")
        self.dense_dim = dense_dim
        self.patch_tokens = patch_tokens

    def embed_text(self, text: str) -> DenseVector:
        return DenseVector(_seeded_vector(b"dense:" + text.encode("utf-8"), self.dense_dim))

    def embed_page(self, image: PageImage, retriever: RetrieverId) -> MultiVector:
        digest = hashlib.sha256(image.data).hexdigest()
        rows = [
            _seeded_vector(
                f"page:{retriever.value}:{i}:{digest}".encode(), MULTIVECTOR_DIM
            )
            for i in range(self.patch_tokens)
        ]
        return MultiVector(np.stack(rows))

    def embed_query(self, text: str, retriever: RetrieverId) -> MultiVector:
        words = text.split()
        if not words:
            raise ValueError("cannot embed empty query text")
        rows = [
            _seeded_vector(f"query:{retriever.value}:{i}:{word}".encode(), MULTIVECTOR_DIM)
            for i, word in enumerate(words)
        ]
        return MultiVector(np.stack(rows))


# ---------------------------------------------------------------------------
# HTTP client for the embedding-service contract
# ---------------------------------------------------------------------------


class HttpEmbeddingClient:
    """Client for the embedding service: POST /embed with kind-tagged requests.

    Kinds: text_dense (text -> one vector), page_multivector (image -> patch
    vectors), query_multivector (text + retriever -> token vectors).
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout_s: float = 60.0,
        dense_dim: int = DEFAULT_DENSE_DIM,
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {"api-key": api_key} if api_key else {}
        self.dense_dim = dense_dim
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers=headers,
            timeout=timeout_s,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _post(self, body: dict) -> dict:
        try:
            response = self._client.post("/embed", json=body)
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding service unreachable: {exc}") from exc
        if response.status_code != 200:
            raise TransportError(
                f"embedding service returned {response.status_code}: {response.text[:200]}",
                status=response.status_code,
            )
        return response.json()

    @staticmethod
    def _vectors(payload: dict) -> np.ndarray:
        vectors = payload.get("vectors")
        if not isinstance(vectors, list) or not vectors:
            raise ProtocolError("embedding response carries an empty token list")
        matrix = np.asarray(vectors, dtype=np.float64)
        declared = payload.get("dim")
        if declared is not None and matrix.shape[1] != int(declared):
            raise ProtocolError(
                f"embedding response dim mismatch: declared {declared}, got {matrix.shape[1]}"
            )
        return matrix

    def embed_text(self, text: str) -> DenseVector:
        payload = self._post({"kind": "text_dense", "text": text})
        matrix = self._vectors(payload)
        if matrix.shape[0] != 1:
            raise ProtocolError("text_dense must return exactly one vector")
        if matrix.shape[1] != self.dense_dim:
            raise ConfigurationError(
                f"dense dim mismatch: expected {self.dense_dim}, service returned {matrix.shape[1]}"
            )
        return DenseVector(matrix[0])

    def embed_page(self, image: PageImage, retriever: RetrieverId) -> MultiVector:
        payload = self._post(
            {
                "kind": "page_multivector",
                "retriever": retriever.value,
                "image_b64": base64.b64encode(image.data).decode("ascii"),
            }
        )
        return MultiVector(self._vectors(payload))

    def embed_query(self, text: str, retriever: RetrieverId) -> MultiVector:
        payload = self._post(
            {"kind": "query_multivector", "retriever": retriever.value, "text": text}
        )
        return MultiVector(self._vectors(payload))
