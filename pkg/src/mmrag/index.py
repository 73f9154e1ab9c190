"""Vector collections: configs, entries, MaxSim scoring, and the in-memory
exhaustive-scan engine that serves as the correctness reference for any
remote store backend.

Ranking is deterministic everywhere: descending score, ties broken by
ascending key. MaxSim accumulates in double precision regardless of how
vectors were stored.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol, Union

import numpy as np

from .embeddings import DenseVector, MultiVector
from .errors import ConfigurationError

logger = logging.getLogger(__name__)


class CollectionKind(Enum):
    DENSE = "dense"
    LATE_INTERACTION = "late_interaction"


class Metric(Enum):
    COSINE = "cosine"
    DOT = "dot"


@dataclass(frozen=True)
class CollectionConfig:
    name: str
    kind: CollectionKind
    dim: int
    metric: Metric

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigurationError(f"collection {self.name}: dim must be positive")
        if self.kind is CollectionKind.LATE_INTERACTION and self.metric is not Metric.DOT:
            raise ConfigurationError(
                f"collection {self.name}: late-interaction collections score MaxSim over dot products"
            )

    @classmethod
    def dense(cls, name: str, dim: int, metric: Metric = Metric.COSINE) -> "CollectionConfig":
        return cls(name=name, kind=CollectionKind.DENSE, dim=dim, metric=metric)

    @classmethod
    def late_interaction(cls, name: str, dim: int = 128) -> "CollectionConfig":
        return cls(name=name, kind=CollectionKind.LATE_INTERACTION, dim=dim, metric=Metric.DOT)


@dataclass(frozen=True)
class TextChunkRef:
    chunk_id: str


@dataclass(frozen=True)
class PageRef:
    doc_id: str
    page: int


@dataclass(frozen=True)
class AssetRef:
    asset_id: str


Payload = Union[TextChunkRef, PageRef, AssetRef]


def page_key(doc_id: str, page: int) -> str:
    return f"{doc_id}#{page}"


@dataclass(frozen=True, eq=False)
class IndexEntry:
    key: str
    payload: Payload
    embedding: DenseVector | MultiVector


def maxsim_score(query: MultiVector, doc: MultiVector) -> float:
    """Sum over query tokens of the max dot product against any doc token."""
    if query.dim != doc.dim:
        raise ValueError(f"dim mismatch: query {query.dim} vs doc {doc.dim}")
    sims = query.tokens @ doc.tokens.T
    return float(sims.max(axis=1).sum())


def _cosine_scores(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    # zero-norm vectors score 0 rather than dividing by zero
    norms = np.linalg.norm(matrix, axis=1)
    qnorm = np.linalg.norm(query)
    if qnorm == 0.0:
        return np.zeros(matrix.shape[0])
    scores = matrix @ query
    safe = norms > 0.0
    scores[safe] /= norms[safe] * qnorm
    scores[~safe] = 0.0
    return scores


class VectorCollection(Protocol):
    """Backend-agnostic collection surface shared by local and remote engines."""

    @property
    def config(self) -> CollectionConfig: ...

    def upsert(self, entries: Iterable[IndexEntry]) -> int: ...

    def search(self, query: DenseVector | MultiVector, k: int) -> list[tuple[str, float]]: ...

    def __len__(self) -> int: ...


class InMemoryIndex:
    """Exhaustive-scan collection; the reference engine for ranking semantics.

    Single-writer builds, wait-free reads against the committed state: upsert
    swaps in a fresh entry dict rather than mutating the one readers hold.
    """

    def __init__(self, config: CollectionConfig):
        self._config = config
        self._entries: dict[str, IndexEntry] = {}

    @property
    def config(self) -> CollectionConfig:
        return self._config

    def __len__(self) -> int:
        return len(self._entries)

    def keys(self) -> list[str]:
        return sorted(self._entries)

    def get(self, key: str) -> IndexEntry | None:
        return self._entries.get(key)

    def _check_entry(self, entry: IndexEntry) -> str | None:
        expected = DenseVector if self._config.kind is CollectionKind.DENSE else MultiVector
        if not isinstance(entry.embedding, expected):
            return entry.key
        if entry.embedding.dim != self._config.dim:
            return entry.key
        return None

    def upsert(self, entries: Iterable[IndexEntry]) -> int:
        batch = list(entries)
        keys = [e.key for e in batch]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValueError(f"duplicate keys within upsert batch: {dupes}")
        offending = [k for k in (self._check_entry(e) for e in batch) if k is not None]
        if offending:
            raise ConfigurationError(
                f"collection {self._config.name} ({self._config.kind.value}, dim {self._config.dim}): "
                f"embedding kind/dim mismatch for keys {sorted(offending)}"
            )
        staged = dict(self._entries)
        staged.update({e.key: e for e in batch})
        self._entries = staged
        return len(batch)

    def search(self, query: DenseVector | MultiVector, k: int) -> list[tuple[str, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        entries = self._entries
        if not entries:
            return []
        if self._config.kind is CollectionKind.DENSE:
            if not isinstance(query, DenseVector):
                raise ConfigurationError("dense collection requires a DenseVector query")
            if query.dim != self._config.dim:
                raise ConfigurationError(
                    f"query dim {query.dim} != collection dim {self._config.dim}"
                )
            keys = list(entries)
            matrix = np.stack([entries[key].embedding.values for key in keys])
            if self._config.metric is Metric.COSINE:
                scores = _cosine_scores(matrix, query.values)
            else:
                scores = matrix @ query.values
            scored = list(zip(keys, scores.tolist()))
        else:
            if not isinstance(query, MultiVector):
                raise ConfigurationError(
                    "late-interaction collection requires a MultiVector query"
                )
            if query.dim != self._config.dim:
                raise ConfigurationError(
                    f"query dim {query.dim} != collection dim {self._config.dim}"
                )
            scored = [
                (key, maxsim_score(query, entry.embedding))
                for key, entry in entries.items()
            ]
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return scored[: min(k, len(scored))]

    # -- persistence (arrays in one .npz, metadata in a JSON sidecar) --------

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        keys = self.keys()
        arrays: dict[str, np.ndarray] = {}
        meta_entries = []
        for i, key in enumerate(keys):
            entry = self._entries[key]
            if isinstance(entry.embedding, DenseVector):
                arrays[f"v{i}"] = entry.embedding.values
            else:
                arrays[f"v{i}"] = entry.embedding.tokens
            meta_entries.append({"key": key, "payload": _payload_to_record(entry.payload)})
        meta = {
            "config": {
                "name": self._config.name,
                "kind": self._config.kind.value,
                "dim": self._config.dim,
                "metric": self._config.metric.value,
            },
            "entries": meta_entries,
        }
        np.savez_compressed(directory / f"{self._config.name}.npz", **arrays)
        (directory / f"{self._config.name}.json").write_text(
            json.dumps(meta, sort_keys=True, separators=(",", ":")), encoding="utf-8"
        )

    @classmethod
    def load(cls, directory: str | Path, name: str) -> "InMemoryIndex":
        directory = Path(directory)
        meta = json.loads((directory / f"{name}.json").read_text(encoding="utf-8"))
        cfg = meta["config"]
        config = CollectionConfig(
            name=cfg["name"],
            kind=CollectionKind(cfg["kind"]),
            dim=int(cfg["dim"]),
            metric=Metric(cfg["metric"]),
        )
        index = cls(config)
        entries = []
        with np.load(directory / f"{name}.npz") as data:
            for i, record in enumerate(meta["entries"]):
                array = data[f"v{i}"]
                embedding: DenseVector | MultiVector
                if config.kind is CollectionKind.DENSE:
                    embedding = DenseVector(array)
                else:
                    embedding = MultiVector(array)
                entries.append(
                    IndexEntry(
                        key=record["key"],
                        payload=_payload_from_record(record["payload"]),
                        embedding=embedding,
                    )
                )
        index.upsert(entries)
        return index


def _payload_to_record(payload: Payload) -> dict:
    if isinstance(payload, TextChunkRef):
        return {"kind": "chunk", "chunk_id": payload.chunk_id}
    if isinstance(payload, PageRef):
        return {"kind": "page", "doc_id": payload.doc_id, "page": payload.page}
    return {"kind": "asset", "asset_id": payload.asset_id}


def _payload_from_record(record: dict) -> Payload:
    kind = record["kind"]
    if kind == "chunk":
        return TextChunkRef(chunk_id=record["chunk_id"])
    if kind == "page":
        return PageRef(doc_id=record["doc_id"], page=int(record["page"]))
    if kind == "asset":
        return AssetRef(asset_id=record["asset_id"])
    raise ValueError(f"unknown payload kind {kind!r}")


# ---------------------------------------------------------------------------
# Operation wrappers with spec-level kind checks
# ---------------------------------------------------------------------------


def upsert(entries: Iterable[IndexEntry], collection: VectorCollection) -> int:
    return collection.upsert(entries)


def search_dense(
    query: DenseVector, collection: VectorCollection, k: int
) -> list[tuple[str, float]]:
    if collection.config.kind is not CollectionKind.DENSE:
        raise ConfigurationError(
            f"search_dense requires a dense collection, got {collection.config.kind.value}"
        )
    return collection.search(query, k)


def search_late_interaction(
    query: MultiVector, collection: VectorCollection, k: int
) -> list[tuple[str, float]]:
    if collection.config.kind is not CollectionKind.LATE_INTERACTION:
        raise ConfigurationError(
            "search_late_interaction requires a late-interaction collection, "
            f"got {collection.config.kind.value}"
        )
    return collection.search(query, k)
