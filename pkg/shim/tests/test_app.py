import base64
import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from embed_shim.app import create_app
from embed_shim.schemas import EmbedResponse, Retriever
from embed_shim.settings import ShimSettings

FIXTURE_DIR = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "shim"


@pytest.fixture
def client():
    return TestClient(create_app(ShimSettings()))


def png_b64() -> str:
    from record_fixtures import fixture_page_png

    return base64.b64encode(fixture_page_png(1)).decode("ascii")


def test_text_dense_deterministic(client):
    a = client.post("/embed", json={"kind": "text_dense", "text": "hello"}).json()
    b = client.post("/embed", json={"kind": "text_dense", "text": "hello"}).json()
    assert a == b
    assert len(a["vectors"]) == 1
    assert a["dim"] == 768
    assert len(a["vectors"][0]) == 768


def test_missing_image_names_field(client):
    response = client.post(
        "/embed", json={"kind": "page_multivector", "retriever": "colpali"}
    )
    assert response.status_code == 422
    assert "image_b64" in response.text


def test_missing_text_names_field(client):
    response = client.post(
        "/embed", json={"kind": "query_multivector", "retriever": "colflor"}
    )
    assert response.status_code == 422
    assert "text" in response.text


def test_query_colflor_dims_128(client):
    response = client.post(
        "/embed",
        json={"kind": "query_multivector", "retriever": "colflor", "text": "two words"},
    )
    assert response.status_code == 200
    payload = response.json()
    assert payload["dim"] == 128
    assert len(payload["vectors"]) == 2
    assert all(len(v) == 128 for v in payload["vectors"])


def test_page_embedding_dims(client):
    response = client.post(
        "/embed",
        json={
            "kind": "page_multivector",
            "retriever": "colqwen",
            "image_b64": png_b64(),
        },
    )
    assert response.status_code == 200
    payload = response.json()
    assert payload["dim"] == 128
    assert len(payload["vectors"]) == 4


def test_invalid_base64_rejected(client):
    response = client.post(
        "/embed",
        json={
            "kind": "page_multivector",
            "retriever": "colpali",
            "image_b64": "@@not-base64@@",
        },
    )
    assert response.status_code == 400
    assert "image_b64" in response.text


def test_health_all_loaded(client):
    payload = client.get("/health").json()
    assert payload["status"] == "ok"
    assert len(payload["models"]) == 4


def test_health_with_disabled_retriever():
    settings = ShimSettings(retrievers=(Retriever.COLPALI, Retriever.COLFLOR))
    client = TestClient(create_app(settings))
    payload = client.get("/health").json()
    assert payload["status"] == "ok"
    assert len(payload["models"]) == 3
    response = client.post(
        "/embed",
        json={"kind": "query_multivector", "retriever": "colqwen", "text": "x"},
    )
    assert response.status_code == 400
    assert "not enabled" in response.text


def test_backend_load_failure_degrades():
    client = TestClient(create_app(ShimSettings(backend="colpali-fp16-weights")))
    payload = client.get("/health").json()
    assert payload["status"] == "degraded"
    assert payload["models"] == []
    response = client.post("/embed", json={"kind": "text_dense", "text": "x"})
    assert response.status_code == 503
    assert "colpali-fp16-weights" in response.text


def test_api_key_enforced():
    client = TestClient(create_app(ShimSettings(api_key="shh")))
    denied = client.post("/embed", json={"kind": "text_dense", "text": "x"})
    assert denied.status_code == 401
    allowed = client.post(
        "/embed", json={"kind": "text_dense", "text": "x"}, headers={"api-key": "shh"}
    )
    assert allowed.status_code == 200


def test_batch_preserves_input_order(client):
    from record_fixtures import fixture_page_png

    images = [base64.b64encode(fixture_page_png(n)).decode("ascii") for n in (1, 2, 3)]
    batch = client.post(
        "/embed_batch", json={"retriever": "colflor", "images_b64": images}
    )
    assert batch.status_code == 200
    results = batch.json()["results"]
    assert len(results) == 3
    for image_b64, result in zip(images, results):
        single = client.post(
            "/embed",
            json={
                "kind": "page_multivector",
                "retriever": "colflor",
                "image_b64": image_b64,
            },
        ).json()
        assert result == single


def test_batch_respects_small_batch_size():
    client = TestClient(create_app(ShimSettings(batch_size=2)))
    from record_fixtures import fixture_page_png

    images = [base64.b64encode(fixture_page_png(n)).decode("ascii") for n in range(5)]
    batch = client.post(
        "/embed_batch", json={"retriever": "colpali", "images_b64": images}
    )
    assert batch.status_code == 200
    assert len(batch.json()["results"]) == 5


# ---------------------------------------------------------------------------
# Contract acceptance: the recorded fixtures are genuine service responses
# ---------------------------------------------------------------------------


def recorded_fixtures() -> list[Path]:
    return sorted(FIXTURE_DIR.glob("*.json"))


def test_recorded_fixtures_exist():
    names = {p.name for p in recorded_fixtures()}
    for retriever in ("colpali", "colqwen", "colflor"):
        assert f"query_{retriever}.json" in names
        assert f"page_{retriever}_p1.json" in names
        assert f"page_{retriever}_p2.json" in names
    assert "text_dense.json" in names


@pytest.mark.parametrize("path", recorded_fixtures(), ids=lambda p: p.name)
def test_recorded_responses_validate_against_schema(path):
    fixture = json.loads(path.read_text(encoding="utf-8"))
    response = EmbedResponse.model_validate(fixture["response"])
    assert len(response.vectors) == fixture["expect"]["n_vectors"]
    if fixture["request"]["kind"] in ("page_multivector", "query_multivector"):
        assert response.dim == 128


@pytest.mark.parametrize("path", recorded_fixtures(), ids=lambda p: p.name)
def test_recorded_responses_replay_verbatim(client, path):
    fixture = json.loads(path.read_text(encoding="utf-8"))
    live = client.post("/embed", json=fixture["request"])
    assert live.status_code == 200
    assert live.json() == fixture["response"]


def test_two_page_fixture_dims_128_all_retrievers():
    for retriever in ("colpali", "colqwen", "colflor"):
        for page in (1, 2):
            fixture = json.loads(
                (FIXTURE_DIR / f"page_{retriever}_p{page}.json").read_text()
            )
            response = EmbedResponse.model_validate(fixture["response"])
            assert response.dim == 128
            assert all(len(v) == 128 for v in response.vectors)
