"""Deterministic fixtures: synthetic page images, recorded-parse corpora,
synthetic benchmarks, and an in-process stand-in for the remote vector store.

Everything here is seeded and service-free so the full pipeline can run in
tests and offline environments.
"""

from __future__ import annotations

import base64
import io
import json
import math
from pathlib import Path

import httpx
from PIL import Image, ImageDraw

from .corpus import BenchmarkItem, Difficulty, LETTERS

# ---------------------------------------------------------------------------
# Images and parser-response fixtures
# ---------------------------------------------------------------------------


def make_png(seed: int, width: int = 220, height: int = 280) -> bytes:
    """Small deterministic raster: colored bands derived from the seed."""
    image = Image.new("RGB", (width, height), (240, 240, 235))
    draw = ImageDraw.Draw(image)
    state = seed & 0xFFFFFFFF or 1
    for band in range(6):
        state = (1103515245 * state + 12345) % (1 << 31)
        color = (state % 200 + 30, (state >> 8) % 200 + 30, (state >> 16) % 200 + 30)
        top = band * height // 6
        bottom = max(top, top + height // 6 - 2)
        draw.rectangle([0, top, width, bottom], fill=color)
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


def _image_record(seed: int, width: int = 220, height: int = 280) -> dict:
    return {
        "width_px": width,
        "height_px": height,
        "encoding": "png",
        "image_b64": base64.b64encode(make_png(seed, width, height)).decode("ascii"),
    }


_TOPICS = (
    "immunoglobulin galactosylation in aging cohorts",
    "plasma protein glycan markers of inflammation",
    "sialylation shifts across disease phenotypes",
    "core fucosylation and receptor binding affinity",
    "high-branching glycans in metabolic syndrome",
    "bisecting GlcNAc abundance across tissues",
)


def make_fixture_payload(doc_id: str, n_pages: int, seed: int = 0) -> dict:
    """One recorded parser response: pages, elements, one table and one figure."""
    pages = [
        {"number": number, **_image_record(seed * 101 + number)}
        for number in range(1, n_pages + 1)
    ]
    elements = [
        {"kind": "heading", "text": f"Study {doc_id}: glycan profiling overview.", "page": 1}
    ]
    for number in range(1, n_pages + 1):
        topic = _TOPICS[(seed + number) % len(_TOPICS)]
        elements.append(
            {
                "kind": "paragraph",
                "text": (
                    f"Document {doc_id} page {number} reports on {topic}. "
                    f"The measured effect size for cohort {number} was "
                    f"{0.1 * number:.1f} with confidence bounds described in the text."
                ),
                "page": number,
            }
        )
    table_page = min(2, n_pages)
    figure_page = min(3, n_pages)
    elements.append(
        {
            "kind": "caption",
            "text": f"Table 1 of {doc_id}: glycan abundance by age group.",
            "page": table_page,
        }
    )
    assets = [
        {
            "id": f"{doc_id}-table-1",
            "kind": "table",
            "page": table_page,
            "caption": f"Glycan abundance by age group in {doc_id}.",
            **_image_record(seed * 101 + 71),
        },
        {
            "id": f"{doc_id}-figure-1",
            "kind": "figure",
            "page": figure_page,
            "caption": f"Pathway diagram for {doc_id}.",
            **_image_record(seed * 101 + 72),
        },
    ]
    return {
        "id": doc_id,
        "title": f"Fixture study {doc_id}",
        "pages": pages,
        "elements": elements,
        "assets": assets,
    }


def write_fixture_corpus(
    directory: str | Path, n_docs: int = 3, pages_each: tuple[int, ...] = (4, 5, 6)
) -> list[str]:
    """Write one recorded parser response per document; returns the doc ids."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    doc_ids = []
    for index in range(n_docs):
        doc_id = f"fx{index + 1:03d}"
        payload = make_fixture_payload(
            doc_id, n_pages=pages_each[index % len(pages_each)], seed=index + 1
        )
        (directory / f"{doc_id}.json").write_text(
            json.dumps(payload, sort_keys=True), encoding="utf-8"
        )
        doc_ids.append(doc_id)
    return doc_ids


# ---------------------------------------------------------------------------
# Synthetic benchmarks
# ---------------------------------------------------------------------------


def make_synthetic_benchmark(
    n_easy: int = 69,
    n_medium: int = 24,
    n_hard: int = 27,
    doc_ids: tuple[str, ...] = ("fx001", "fx002", "fx003"),
    gold_letters: str | None = None,
) -> list[BenchmarkItem]:
    """Benchmark template with the requested strata sizes.

    gold_letters: optional cycle of gold letters ("A" pins every gold to the
    first option; None cycles A,B,C,D).
    """
    items = []
    strata = (
        [Difficulty.EASY] * n_easy + [Difficulty.MEDIUM] * n_medium + [Difficulty.HARD] * n_hard
    )
    cycle = gold_letters or "ABCD"
    for index, difficulty in enumerate(strata):
        doc_id = doc_ids[index % len(doc_ids)]
        gold = cycle[index % len(cycle)]
        gold_position = LETTERS.index(gold)
        options = [
            f"distractor {index}-{slot}" for slot in range(4)
        ]
        options[gold_position] = f"finding {index} from {doc_id}"
        items.append(
            BenchmarkItem(
                id=f"q{index + 1:04d}",
                question=(
                    f"Which finding does document {doc_id} report for cohort "
                    f"{index % 5 + 1} in question {index + 1}?"
                ),
                options=tuple(options),
                gold=gold,
                difficulty=difficulty,
                source_doc=doc_id,
            )
        )
    return items


def answer_key(items: list[BenchmarkItem]) -> dict[str, str]:
    """Question text -> gold option text, as consumed by the oracle generator."""
    return {item.question: item.gold_text() for item in items}


# ---------------------------------------------------------------------------
# In-process remote vector store (REST dialect stand-in)
# ---------------------------------------------------------------------------


def _dot(a: list[float], b: list[float]) -> float:
    return sum(x * y for x, y in zip(a, b))


def _cosine(a: list[float], b: list[float]) -> float:
    na = math.sqrt(_dot(a, a))
    nb = math.sqrt(_dot(b, b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return _dot(a, b) / (na * nb)


def _max_sim(query: list[list[float]], doc: list[list[float]]) -> float:
    return sum(max(_dot(q, d) for d in doc) for q in query)


class FakeVectorStoreServer:
    """Handler for httpx.MockTransport that mimics the remote store REST API.

    Scoring is pure-Python double loops, deliberately independent of the
    numpy reference engine, so backend-equivalence tests compare two genuine
    implementations.
    """

    def __init__(self):
        self.collections: dict[str, dict] = {}

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handle)

    def handle(self, request: httpx.Request) -> httpx.Response:
        parts = request.url.path.strip("/").split("/")
        body = json.loads(request.content) if request.content else {}
        if parts[0] != "collections" or len(parts) < 2:
            return httpx.Response(404, json={"status": "not found"})
        name = parts[1]
        if len(parts) == 2:
            if request.method == "PUT":
                self.collections[name] = {"config": body.get("vectors", {}), "points": {}}
                return httpx.Response(200, json={"result": True, "status": "ok"})
            if request.method == "DELETE":
                self.collections.pop(name, None)
                return httpx.Response(200, json={"result": True, "status": "ok"})
            if request.method == "GET":
                if name not in self.collections:
                    return httpx.Response(404, json={"status": "not found"})
                return httpx.Response(
                     200, json={"result": {"config": self.collections[name]["config"]}}
                )
        collection = self.collections.get(name)
        if collection is None:
            return httpx.Response(404, json={"status": f"collection {name} not found"})
        action = parts[2]
        if action == "points" and len(parts) == 3:
            if request.method == "PUT":
                for point in body["points"]:
                    collection["points"][point["id"]] = point
                return httpx.Response(200, json={"result": {"status": "acknowledged"}})
            if request.method == "POST":  # retrieve by ids
                found = [
                    collection["points"][pid]
                    for pid in body.get("ids", [])
                    if pid in collection["points"]
                ]
                return httpx.Response(200, json={"result": found})
        if action == "points" and parts[3] == "count":
            return httpx.Response(
                200, json={"result": {"count": len(collection["points"])}}
            )
        if action == "points" and parts[3] == "query":
            query = body["query"]
            limit = int(body.get("limit", 10))
            multivector = "multivector_config" in collection["config"]
            distance = collection["config"].get("distance", "Cosine")
            scored = []
            for point in collection["points"].values():
                vector = point["vector"]
                if multivector:
                    score = _max_sim(query, vector)
                elif distance == "Cosine":
                    score = _cosine(query, vector)
                else:
                    score = _dot(query, vector)
                scored.append((point["payload"]["key"], score, point))
            scored.sort(key=lambda triple: (-triple[1], triple[0]))
            points = [
                {"id": point["id"], "score": score, "payload": point["payload"]}
                for _key, score, point in scored[:limit]
            ]
            return httpx.Response(200, json={"result": {"points": points}})
        return httpx.Response(404, json={"status": "unsupported route"})
