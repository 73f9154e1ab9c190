import base64
import io
import json

import httpx
import pytest
from PIL import Image

from mmrag.corpus import (
    AssetKind,
    PageImage,
    Summary,
    VisualAsset,
    serialize_document,
)
from mmrag.errors import AuthenticationError, FormatError, TransportError
from mmrag.generation import ScriptedGenerator
from mmrag.ingestion import (
    FixtureParserClient,
    IngestError,
    IngestionConfig,
    ParserEndpoint,
    SUMMARY_TOKEN_LIMIT,
    chunk_document,
    ingest_document,
    normalize_page_image,
    parse_document,
    split_to_budget,
    summarize_asset,
)
from mmrag.testing import make_fixture_payload, make_png
from mmrag.tokens import count_tokens


def png_image(width, height, color=(10, 120, 200)):
    image = Image.new("RGB", (width, height), color)
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return PageImage(width_px=width, height_px=height, data=buffer.getvalue())


# ---------------------------------------------------------------------------
# parse_document
# ---------------------------------------------------------------------------


def test_fixture_round_trip(fixture_corpus_dir):
    client = FixtureParserClient(fixture_corpus_dir)
    doc = client.parse("fx001")
    assert [p.number for p in doc.pages] == [1, 2, 3, 4]
    assert doc.text_elements
    # identical fixture inputs serialize byte-identically
    assert serialize_document(doc) == serialize_document(client.parse("fx001"))


def test_fixture_assets_kinds(fixture_corpus_dir):
    doc = FixtureParserClient(fixture_corpus_dir).parse("fx002")
    assert len(doc.assets) == 2
    assert {asset.kind for asset in doc.assets} == {AssetKind.TABLE, AssetKind.FIGURE}


def test_parse_document_http_roundtrip():
    payload = make_fixture_payload("net01", n_pages=2, seed=9)

    def handler(request: httpx.Request) -> httpx.Response:
        assert request.headers["Authorization"] == "Bearer sekrit"
        return httpx.Response(200, json=payload)

    endpoint = ParserEndpoint(base_url="http://parser.local", api_key="sekrit")
    doc = parse_document(b"%PDF-1.4 fake", endpoint, transport=httpx.MockTransport(handler))
    assert doc.id == "net01"
    assert [p.number for p in doc.pages] == [1, 2]


def test_parse_document_401_redacts_key():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(401, text="unauthorized")

    endpoint = ParserEndpoint(base_url="http://parser.local", api_key="sekrit-key-123")
    with pytest.raises(AuthenticationError) as excinfo:
        parse_document(b"%PDF", endpoint, transport=httpx.MockTransport(handler))
    assert "sekrit-key-123" not in str(excinfo.value)
    assert "http://parser.local" in str(excinfo.value)


def test_parse_document_transport_error_carries_status():
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(503, text="down")

    endpoint = ParserEndpoint(base_url="http://parser.local")
    with pytest.raises(TransportError) as excinfo:
        parse_document(b"%PDF", endpoint, transport=httpx.MockTransport(handler))
    assert excinfo.value.status == 503


def test_parse_document_empty_parse():
    payload = {"id": "e1", "pages": [], "elements": [], "assets": []}

    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json=payload)

    endpoint = ParserEndpoint(base_url="http://parser.local")
    with pytest.raises(IngestError, match="no elements detected"):
        parse_document(b"%PDF", endpoint, transport=httpx.MockTransport(handler))


# ---------------------------------------------------------------------------
# chunk_document / split_to_budget
# ---------------------------------------------------------------------------


def test_one_chunk_per_element(fixture_documents, ingestion_config):
    doc = fixture_documents[0]
    chunks = chunk_document(doc, ingestion_config)
    assert len(chunks) == len(doc.text_elements)
    assert [c.page for c in chunks] == [e.page for e in doc.text_elements]


def test_empty_document_empty_chunks(fixture_documents, ingestion_config):
    from dataclasses import replace

    doc = replace(fixture_documents[0], text_elements=())
    assert chunk_document(doc, ingestion_config) == []


def test_over_budget_element_splits_into_three():
    budget = 100
    sentences = [f"Sentence number {i} has exactly seven tokens here." for i in range(25)]
    text = " ".join(sentences)
    assert 2 * budget < count_tokens(text) <= 3 * budget
    pieces = split_to_budget(text, budget)
    assert len(pieces) == 3
    assert all(count_tokens(piece) <= budget for piece in pieces)
    assert "".join(pieces) == text


def test_hard_split_when_no_sentence_boundary():
    text = "tok " * 50
    pieces = split_to_budget(text.strip(), 20)
    assert all(count_tokens(piece) <= 20 for piece in pieces)
    assert "".join(pieces) == text.strip()


def test_chunk_coverage_property(fixture_documents):
    cfg = IngestionConfig(token_budget=12)
    for doc in fixture_documents:
        chunks = chunk_document(doc, cfg)
        by_element: dict[str, list[str]] = {}
        for chunk in chunks:
            root = chunk.id.split(".")[0]
            by_element.setdefault(root, []).append(chunk.text)
        rebuilt = sorted("".join(parts) for parts in by_element.values())
        assert rebuilt == sorted(e.text for e in doc.text_elements)
        assert all(c.token_count <= cfg.token_budget for c in chunks)


# ---------------------------------------------------------------------------
# normalize_page_image
# ---------------------------------------------------------------------------


def test_normalize_noop_at_cap(ingestion_config):
    img = png_image(1300, 900)
    assert normalize_page_image(img, ingestion_config) is img


def test_normalize_exact_halving(ingestion_config):
    out = normalize_page_image(png_image(2600, 1800), ingestion_config)
    assert (out.width_px, out.height_px) == (1300, 900)


def test_normalize_rounding(ingestion_config):
    # 1000 * 1300 / 1301 = 999.23 -> 999
    out = normalize_page_image(png_image(1301, 1000), ingestion_config)
    assert (out.width_px, out.height_px) == (1300, 999)


def test_normalize_portrait(ingestion_config):
    out = normalize_page_image(png_image(1000, 1301), ingestion_config)
    assert (out.width_px, out.height_px) == (999, 1300)


def test_normalize_rejects_garbage(ingestion_config):
    img = PageImage(width_px=2000, height_px=2000, data=b"not an image")
    with pytest.raises(FormatError):
        normalize_page_image(img, ingestion_config)


def test_ingested_images_respect_cap(fixture_corpus_dir, tmp_path):
    payload = make_fixture_payload("big01", n_pages=2, seed=3)
    # blow up the first page image beyond the cap
    big = Image.new("RGB", (2600, 1800), (5, 5, 5))
    buffer = io.BytesIO()
    big.save(buffer, format="PNG")
    payload["pages"][0].update(
        width_px=2600,
        height_px=1800,
        image_b64=base64.b64encode(buffer.getvalue()).decode("ascii"),
    )
    path = tmp_path / "big01.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    doc = FixtureParserClient(tmp_path).parse("big01")
    cfg = IngestionConfig(summarize_assets=False)
    normalized, _chunks = ingest_document(doc, cfg)
    assert all(p.image.long_side <= cfg.image_long_side_px for p in normalized.pages)


# ---------------------------------------------------------------------------
# summarize_asset
# ---------------------------------------------------------------------------


def asset():
    return VisualAsset(
        id="a1",
        kind=AssetKind.TABLE,
        page=1,
        image=PageImage(width_px=16, height_px=16, data=make_png(5, 16, 16)),
    )


def test_summary_hard_cutoff():
    long_text = " ".join(f"word{i}" for i in range(400))
    summary = summarize_asset(asset(), ScriptedGenerator([long_text]))
    assert summary.token_count == SUMMARY_TOKEN_LIMIT


def test_summary_empty_marker():
    summary = summarize_asset(asset(), ScriptedGenerator(["''"]))
    assert summary == Summary(text="", token_count=0)


def test_summary_short_text_unmodified():
    text = "Ten short tokens exactly fill this tiny sentence now"
    summary = summarize_asset(asset(), ScriptedGenerator([text]))
    assert summary.text == text
    assert summary.token_count == count_tokens(text)


def test_summary_prompt_is_the_template():
    captured = {}

    class Spy:
        def generate(self, payload):
            captured["text"] = payload.text
            captured["images"] = payload.images
            return "ok", ScriptedGenerator(["x"]).generate(payload)[1]

    summarize_asset(asset(), Spy())
    from mmrag.prompts import ASSET_SUMMARY_PROMPT

    assert captured["text"] == ASSET_SUMMARY_PROMPT
    assert len(captured["images"]) == 1
