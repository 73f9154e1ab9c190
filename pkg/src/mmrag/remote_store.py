"""HTTP client for a remote vector store (Qdrant-compatible REST dialect).

Points are addressed by deterministic UUIDs derived from the entry key; the
original key and payload ride along in the point payload so search results
can be mapped back. Dense collections use one vector per point; late-
interaction collections use multi-vector points with a max_sim comparator.

The in-memory engine remains the ranking reference: equivalence tests cap
collection sizes because a real remote store may approximate.
"""

from __future__ import annotations

import logging
import uuid
from typing import Iterable

import httpx

from .embeddings import DenseVector, MultiVector
from .errors import ConfigurationError, TransportError
from .index import (
    CollectionConfig,
    CollectionKind,
    IndexEntry,
    Metric,
    _payload_from_record,
    _payload_to_record,
)

logger = logging.getLogger(__name__)

_POINT_NAMESPACE = uuid.UUID("8a6c1c85-8c2f-4f5e-9f7a-3f1d2b4c5d6e")


def point_id_for_key(key: str) -> str:
    return str(uuid.uuid5(_POINT_NAMESPACE, key))


class RemoteVectorStore:
    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout_s: float = 30.0,
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {"api-key": api_key} if api_key else {}
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers=headers,
            timeout=timeout_s,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def _request(self, method: str, path: str, body: dict | None = None) -> dict:
        try:
            response = self._client.request(method, path, json=body)
        except httpx.HTTPError as exc:
            raise TransportError(f"vector store unreachable: {exc}") from exc
        if response.status_code >= 400:
            raise TransportError(
                f"vector store {method} {path} returned {response.status_code}: "
                f"{response.text[:200]}",
                status=response.status_code,
            )
        return response.json()

    def create_collection(self, config: CollectionConfig, recreate: bool = False) -> "RemoteCollection":
        if recreate:
            try:
                self._request("DELETE", f"/collections/{config.name}")
            except TransportError:
                pass
        vectors: dict = {
            "size": config.dim,
            "distance": "Cosine" if config.metric is Metric.COSINE else "Dot",
        }
        if config.kind is CollectionKind.LATE_INTERACTION:
            vectors["multivector_config"] = {"comparator": "max_sim"}
        self._request("PUT", f"/collections/{config.name}", {"vectors": vectors})
        return RemoteCollection(self, config)

    def collection(self, config: CollectionConfig) -> "RemoteCollection":
        return RemoteCollection(self, config)


class RemoteCollection:
    """Handle implementing the VectorCollection protocol over the REST store."""

    def __init__(self, store: RemoteVectorStore, config: CollectionConfig):
        self._store = store
        self._config = config

    @property
    def config(self) -> CollectionConfig:
        return self._config

    def __len__(self) -> int:
        result = self._store._request(
            "POST", f"/collections/{self._config.name}/points/count", {"exact": True}
        )
        return int(result["result"]["count"])

    def upsert(self, entries: Iterable[IndexEntry]) -> int:
        batch = list(entries)
        keys = [e.key for e in batch]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValueError(f"duplicate keys within upsert batch: {dupes}")
        expected = DenseVector if self._config.kind is CollectionKind.DENSE else MultiVector
        offending = [
            e.key
            for e in batch
            if not isinstance(e.embedding, expected) or e.embedding.dim != self._config.dim
        ]
        if offending:
            raise ConfigurationError(
                f"collection {self._config.name}: embedding kind/dim mismatch for keys "
                f"{sorted(offending)}"
            )
        points = []
        for entry in batch:
            if isinstance(entry.embedding, DenseVector):
                vector = entry.embedding.values.tolist()
            else:
                vector = entry.embedding.tokens.tolist()
            points.append(
                {
                    "id": point_id_for_key(entry.key),
                    "vector": vector,
                    "payload": {"key": entry.key, "ref": _payload_to_record(entry.payload)},
                }
            )
        self._store._request(
            "PUT", f"/collections/{self._config.name}/points", {"points": points}
        )
        return len(points)

    def search(self, query: DenseVector | MultiVector, k: int) -> list[tuple[str, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        if self._config.kind is CollectionKind.DENSE:
            if not isinstance(query, DenseVector):
                raise ConfigurationError("dense collection requires a DenseVector query")
            vector = query.values.tolist()
        else:
            if not isinstance(query, MultiVector):
                raise ConfigurationError(
                    "late-interaction collection requires a MultiVector query"
                )
            vector = query.tokens.tolist()
        if query.dim != self._config.dim:
            raise ConfigurationError(
                f"query dim {query.dim} != collection dim {self._config.dim}"
            )
        result = self._store._request(
            "POST",
            f"/collections/{self._config.name}/points/query",
            {"query": vector, "limit": k, "with_payload": True},
        )
        points = result["result"]["points"]
        return [(p["payload"]["key"], float(p["score"])) for p in points]

    def payload_ref(self, key: str):
        """Resolve a key's stored payload reference (chunk/page/asset)."""
        result = self._store._request(
            "POST",
            f"/collections/{self._config.name}/points",
            {"ids": [point_id_for_key(key)], "with_payload": True},
        )
        points = result["result"]
        if not points:
            return None
        return _payload_from_record(points[0]["payload"]["ref"])
