"""Remote vector-store client against the in-process REST stand-in.

The stand-in scores with pure-Python double loops, so the equivalence tests
compare two genuinely independent scoring implementations.
"""

import numpy as np
import pytest

from mmrag.embeddings import DenseVector, MultiVector
from mmrag.errors import ConfigurationError, TransportError
from mmrag.index import (
    CollectionConfig,
    IndexEntry,
    InMemoryIndex,
    PageRef,
    TextChunkRef,
)
from mmrag.remote_store import RemoteVectorStore
from mmrag.testing import FakeVectorStoreServer


@pytest.fixture
def server():
    return FakeVectorStoreServer()


@pytest.fixture
def store(server):
    return RemoteVectorStore(
        "http://qdrant.local", api_key="k", transport=server.transport()
    )


def dense_entries(rng, n, dim):
    return [
        IndexEntry(
            key=f"chunk{i:03d}",
            payload=TextChunkRef(f"chunk{i:03d}"),
            embedding=DenseVector(rng.standard_normal(dim)),
        )
        for i in range(n)
    ]


def mv_entries(rng, n, dim):
    return [
        IndexEntry(
            key=f"doc#{i}",
            payload=PageRef("doc", i),
            embedding=MultiVector(rng.standard_normal((int(rng.integers(2, 7)), dim))),
        )
        for i in range(n)
    ]


def test_create_upsert_count(store):
    rng = np.random.default_rng(0)
    config = CollectionConfig.dense("chunks", dim=8)
    collection = store.create_collection(config)
    assert collection.upsert(dense_entries(rng, 10, 8)) == 10
    assert len(collection) == 10


def test_upsert_validates_before_sending(store):
    config = CollectionConfig.dense("chunks", dim=8)
    collection = store.create_collection(config)
    bad = IndexEntry(
        key="mv", payload=PageRef("d", 1), embedding=MultiVector(np.ones((2, 8)))
    )
    with pytest.raises(ConfigurationError):
        collection.upsert([bad])


def test_missing_collection_is_transport_error(store):
    config = CollectionConfig.dense("ghost", dim=4)
    collection = store.collection(config)
    with pytest.raises(TransportError) as excinfo:
        collection.search(DenseVector(np.ones(4)), 3)
    assert excinfo.value.status == 404


def test_dense_backend_equivalence(store):
    rng = np.random.default_rng(5)
    config = CollectionConfig.dense("chunks", dim=12)
    remote = store.create_collection(config)
    reference = InMemoryIndex(config)
    entries = dense_entries(rng, 200, 12)
    remote.upsert(entries)
    reference.upsert(entries)
    for _ in range(5):
        query = DenseVector(rng.standard_normal(12))
        remote_hits = remote.search(query, 10)
        reference_hits = reference.search(query, 10)
        assert [k for k, _ in remote_hits] == [k for k, _ in reference_hits]
        for (_, a), (_, b) in zip(remote_hits, reference_hits):
            assert a == pytest.approx(b, rel=1e-4)


def test_late_interaction_backend_equivalence(store):
    rng = np.random.default_rng(6)
    config = CollectionConfig.late_interaction("pages", dim=16)
    remote = store.create_collection(config)
    reference = InMemoryIndex(config)
    entries = mv_entries(rng, 60, 16)
    remote.upsert(entries)
    reference.upsert(entries)
    for _ in range(5):
        query = MultiVector(rng.standard_normal((3, 16)))
        remote_hits = remote.search(query, 8)
        reference_hits = reference.search(query, 8)
        assert [k for k, _ in remote_hits] == [k for k, _ in reference_hits]
        for (_, a), (_, b) in zip(remote_hits, reference_hits):
            assert a == pytest.approx(b, rel=1e-4)


def test_payload_round_trip(store):
    rng = np.random.default_rng(7)
    config = CollectionConfig.late_interaction("pages", dim=8)
    collection = store.create_collection(config)
    collection.upsert(mv_entries(rng, 3, 8))
    assert collection.payload_ref("doc#1") == PageRef("doc", 1)


def test_recreate_clears_points(store):
    rng = np.random.default_rng(8)
    config = CollectionConfig.dense("chunks", dim=4)
    collection = store.create_collection(config)
    collection.upsert(dense_entries(rng, 4, 4))
    collection = store.create_collection(config, recreate=True)
    assert len(collection) == 0
