"""Embedding backends behind one interface.

The stub backend ships with the service: sha256-seeded vectors, fully
deterministic, no weights. Real retriever checkpoints plug in through the
same interface at deployment time; a backend that cannot load reports the
failure through BackendLoadError so the service can degrade explicitly.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

from .schemas import Retriever

MULTIVECTOR_DIM = 128

MODEL_TAGS = {
    Retriever.COLPALI: "vidore/colpali-v1.3-merged",
    Retriever.COLQWEN: "vidore/colqwen2-v0.2",
    Retriever.COLFLOR: "ahmed-masry/ColFlor",
}
DENSE_MODEL_TAG = "BAAI/bge-base-en-v1.5"


class BackendLoadError(RuntimeError):
    def __init__(self, model_tag: str, reason: str):
        super().__init__(f"failed to load {model_tag}: {reason}")
        self.model_tag = model_tag


class EmbeddingBackend(Protocol):
    dense_dim: int

    def dense_tag(self) -> str: ...

    def retriever_tag(self, retriever: Retriever) -> str: ...

    def embed_text(self, text: str) -> list[list[float]]: ...

    def embed_query(self, text: str, retriever: Retriever) -> list[list[float]]: ...

    def embed_pages(
        self, images: list[bytes], retriever: Retriever
    ) -> list[list[list[float]]]: ...


def _seeded_vector(seed_text: bytes, dim: int) -> list[float]:
    seed = int.from_bytes(hashlib.sha256(seed_text).digest()[:8], "big")
    return np.random.default_rng(seed).standard_normal(dim).tolist()


class StubBackend:
    """Deterministic seeded-hash embeddings matching the documented stub contract:
    dense vectors seeded by text, one query token per whitespace word, a fixed
    number of patch vectors per page seeded by the image bytes."""

    def __init__(self, dense_dim: int = 768, patch_tokens: int = 4, batch_size: int = 8):
        self.dense_dim = dense_dim
        self.patch_tokens = patch_tokens
        self.batch_size = batch_size

    def dense_tag(self) -> str:
        return f"stub:{DENSE_MODEL_TAG}"

    def retriever_tag(self, retriever: Retriever) -> str:
        return f"stub:{MODEL_TAGS[retriever]}"

    def embed_text(self, text: str) -> list[list[float]]:
        return [_seeded_vector(b"dense:" + text.encode("utf-8"), self.dense_dim)]

    def embed_query(self, text: str, retriever: Retriever) -> list[list[float]]:
        words = text.split()
        return [
            _seeded_vector(
                f"query:{retriever.value}:{i}:{word}".encode(), MULTIVECTOR_DIM
            )
            for i, word in enumerate(words)
        ]

    def _embed_page(self, image: bytes, retriever: Retriever) -> list[list[float]]:
        digest = hashlib.sha256(image).hexdigest()
        return [
            _seeded_vector(
                f"page:{retriever.value}:{i}:{digest}".encode(), MULTIVECTOR_DIM
            )
            for i in range(self.patch_tokens)
        ]

    def embed_pages(
        self, images: list[bytes], retriever: Retriever
    ) -> list[list[list[float]]]:
        results: list[list[list[float]]] = []
        for start in range(0, len(images), self.batch_size):
            batch = images[start : start + self.batch_size]
            results.extend(self._embed_page(image, retriever) for image in batch)
        return results


def load_backend(name: str, dense_dim: int, patch_tokens: int, batch_size: int) -> EmbeddingBackend:
    if name == "stub":
        return StubBackend(dense_dim=dense_dim, patch_tokens=patch_tokens, batch_size=batch_size)
    raise BackendLoadError(
        model_tag=name,
        reason="no such backend is installed; deploy retriever checkpoints behind "
        "the EmbeddingBackend interface or use the stub backend",
    )
