import base64
import json
from pathlib import Path

import httpx
import numpy as np
import pytest

from mmrag.corpus import PageImage
from mmrag.embeddings import (
    DenseVector,
    HttpEmbeddingClient,
    MULTIVECTOR_DIM,
    MultiVector,
    ProtocolError,
    RetrieverId,
    embed_page,
    embed_query_multivector,
    embed_text,
)
from mmrag.errors import ConfigurationError, TransportError
from mmrag.testing import make_png

SHIM_FIXTURES = Path(__file__).parent / "fixtures" / "shim"


def test_dense_vector_validation():
    with pytest.raises(ValueError):
        DenseVector(np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        MultiVector(np.zeros((0, 4)))


def test_stub_dense_deterministic(stub_embedder):
    a = embed_text("igg glycans", stub_embedder)
    b = embed_text("igg glycans", stub_embedder)
    assert np.array_equal(a.values, b.values)
    assert a.dim == 64


def test_embed_text_rejects_empty(stub_embedder):
    with pytest.raises(ValueError):
        embed_text("   ", stub_embedder)


def test_stub_different_texts_not_parallel(stub_embedder):
    a = embed_text("alpha", stub_embedder).values
    b = embed_text("beta", stub_embedder).values
    cosine = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
    assert cosine < 1.0 - 1e-6


def test_stub_page_patches(stub_embedder):
    image = PageImage(width_px=40, height_px=40, data=make_png(1, 40, 40))
    mv = embed_page(image, RetrieverId.COLFLOR, stub_embedder)
    assert mv.n_tokens == 4
    assert mv.dim == MULTIVECTOR_DIM


def test_embed_page_rejects_oversized(stub_embedder):
    image = PageImage(width_px=2000, height_px=900, data=b"raw")
    with pytest.raises(ValueError, match="exceeds cap"):
        embed_page(image, RetrieverId.COLPALI, stub_embedder)


def test_stub_query_one_token_per_word(stub_embedder):
    mv = embed_query_multivector("igg glycans", RetrieverId.COLPALI, stub_embedder)
    assert mv.n_tokens == 2
    assert mv.dim == MULTIVECTOR_DIM


def test_embed_query_rejects_empty(stub_embedder):
    with pytest.raises(ValueError):
        embed_query_multivector("", RetrieverId.COLQWEN, stub_embedder)


# ---------------------------------------------------------------------------
# HTTP client against recorded embedding-service fixtures
# ---------------------------------------------------------------------------


def load_fixture(name: str) -> dict:
    return json.loads((SHIM_FIXTURES / name).read_text(encoding="utf-8"))


def fixture_transport(fixture: dict) -> httpx.MockTransport:
    def handler(request: httpx.Request) -> httpx.Response:
        assert request.url.path == "/embed"
        body = json.loads(request.content)
        assert body["kind"] == fixture["request"]["kind"]
        return httpx.Response(200, json=fixture["response"])

    return httpx.MockTransport(handler)


@pytest.mark.parametrize("retriever", list(RetrieverId))
def test_recorded_query_fixtures(retriever):
    fixture = load_fixture(f"query_{retriever.value}.json")
    client = HttpEmbeddingClient(
        "http://shim.local", transport=fixture_transport(fixture)
    )
    mv = client.embed_query("igg glycan age markers", retriever)
    assert mv.n_tokens == fixture["expect"]["n_vectors"]
    assert mv.dim == fixture["expect"]["dim"] == 128


@pytest.mark.parametrize("retriever", list(RetrieverId))
@pytest.mark.parametrize("page", [1, 2])
def test_recorded_page_fixtures(retriever, page):
    fixture = load_fixture(f"page_{retriever.value}_p{page}.json")
    client = HttpEmbeddingClient(
        "http://shim.local", transport=fixture_transport(fixture)
    )
    image = PageImage(
        width_px=fixture["meta"]["width_px"],
        height_px=fixture["meta"]["height_px"],
        data=base64.b64decode(fixture["request"]["image_b64"]),
    )
    mv = client.embed_page(image, retriever)
    assert mv.n_tokens == fixture["expect"]["n_vectors"]
    assert mv.dim == 128


def test_recorded_dense_fixture():
    fixture = load_fixture("text_dense.json")
    client = HttpEmbeddingClient(
        "http://shim.local",
        dense_dim=fixture["expect"]["dim"],
        transport=fixture_transport(fixture),
    )
    vector = client.embed_text("igg glycan age markers")
    assert vector.dim == fixture["expect"]["dim"]


def test_http_client_dense_dim_mismatch():
    fixture = load_fixture("text_dense.json")
    client = HttpEmbeddingClient(
        "http://shim.local", dense_dim=32, transport=fixture_transport(fixture)
    )
    with pytest.raises(ConfigurationError, match="dim mismatch"):
        client.embed_text("anything")


def test_http_client_empty_vectors_is_protocol_error():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"vectors": [], "dim": 128, "model_tag": "x"})

    client = HttpEmbeddingClient("http://shim.local", transport=httpx.MockTransport(handler))
    with pytest.raises(ProtocolError, match="empty token list"):
        client.embed_query("q", RetrieverId.COLPALI)


def test_http_client_surfaces_status():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(500, text="boom")

    client = HttpEmbeddingClient("http://shim.local", transport=httpx.MockTransport(handler))
    with pytest.raises(TransportError) as excinfo:
        client.embed_text("x")
    assert excinfo.value.status == 500


def test_http_client_sends_image_b64(stub_embedder):
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen.update(json.loads(request.content))
        return httpx.Response(
            200,
            json={"vectors": [[0.0] * 128] * 3, "dim": 128, "model_tag": "stub"},
        )

    client = HttpEmbeddingClient("http://shim.local", transport=httpx.MockTransport(handler))
    image = PageImage(width_px=16, height_px=16, data=make_png(7, 16, 16))
    client.embed_page(image, RetrieverId.COLQWEN)
    assert seen["retriever"] == "colqwen"
    assert base64.b64decode(seen["image_b64"]) == image.data
