"""Record embedding-service responses for the client test fixtures.

Runs the service in-process with the stub backend and captures verbatim
request/response pairs: one dense text embedding, one query embedding per
retriever, and page embeddings for both pages of a 2-page fixture document.
Output lands in the consumer's tests/fixtures/shim/ directory.
"""

from __future__ import annotations

import base64
import io
import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient
from PIL import Image, ImageDraw

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from embed_shim.app import create_app
from embed_shim.settings import ShimSettings

OUT_DIR = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "shim"
QUERY_TEXT = "igg glycan age markers"
RETRIEVERS = ("colpali", "colqwen", "colflor")


def fixture_page_png(page_number: int, width: int = 220, height: int = 280) -> bytes:
    image = Image.new("RGB", (width, height), (245, 243, 238))
    draw = ImageDraw.Draw(image)
    for row in range(8):
        shade = 40 + (page_number * 37 + row * 23) % 180
        top = 10 + row * (height - 20) // 8
        draw.rectangle([12, top, width - 12, top + 14], fill=(shade, shade, 90))
    buffer = io.BytesIO()
    image.save(buffer, format="PNG")
    return buffer.getvalue()


def record(client: TestClient, name: str, request: dict, meta: dict | None = None) -> None:
    response = client.post("/embed", json=request)
    response.raise_for_status()
    payload = response.json()
    fixture = {
        "request": request,
        "response": payload,
        "expect": {"n_vectors": len(payload["vectors"]), "dim": payload["dim"]},
    }
    if meta:
        fixture["meta"] = meta
    (OUT_DIR / name).write_text(json.dumps(fixture), encoding="utf-8")
    print(f"recorded {name}: {fixture['expect']}")


def main() -> None:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    client = TestClient(create_app(ShimSettings()))

    record(client, "text_dense.json", {"kind": "text_dense", "text": QUERY_TEXT})
    pages = {
        number: (fixture_page_png(number), 220, 280) for number in (1, 2)
    }
    for retriever in RETRIEVERS:
        record(
            client,
            f"query_{retriever}.json",
            {"kind": "query_multivector", "retriever": retriever, "text": QUERY_TEXT},
        )
        for number, (png, width, height) in pages.items():
            record(
                client,
                f"page_{retriever}_p{number}.json",
                {
                    "kind": "page_multivector",
                    "retriever": retriever,
                    "image_b64": base64.b64encode(png).decode("ascii"),
                },
                meta={"width_px": width, "height_px": height, "page": number},
            )


if __name__ == "__main__":
    main()
