"""Ingestion: turn parser-service output (live or recorded fixtures) into
SourceDocuments, element chunks, capped page images, and visual-asset
summaries.

Fixture mode replays recorded parser responses from disk (one JSON payload
per document id), so the whole pipeline runs without any external service.
"""

from __future__ import annotations

import io
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import httpx
from PIL import Image, UnidentifiedImageError

from .corpus import (
    AssetKind,
    Chunk,
    DocElement,
    ElementKind,
    ImageEncoding,
    Page,
    PageImage,
    SourceDocument,
    Summary,
    VisualAsset,
    validate_document,
)
from .errors import AuthenticationError, ConfigurationError, FormatError, MmragError, TransportError
from .prompts import ASSET_SUMMARY_PROMPT
from .tokens import DEFAULT_TOKENIZER, Tokenizer, truncate_tokens

logger = logging.getLogger(__name__)

SUMMARY_TOKEN_LIMIT = 250


class IngestError(MmragError):
    pass


@dataclass(frozen=True)
class ParserEndpoint:
    base_url: str
    api_key: str = ""
    timeout_s: float = 120.0

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ConfigurationError("parser timeout_s must be positive")


@dataclass(frozen=True)
class IngestionConfig:
    token_budget: int = 16000
    image_long_side_px: int = 1300
    summarize_assets: bool = True

    def __post_init__(self):
        if self.token_budget < 1:
            raise ConfigurationError("token_budget must be >= 1")
        if self.image_long_side_px < 1:
            raise ConfigurationError("image_long_side_px must be >= 1")


# ---------------------------------------------------------------------------
# Parser service (HTTP) and fixture replay
# ---------------------------------------------------------------------------

import base64 as _base64


def _image_from_payload(record: dict) -> PageImage:
    return PageImage(
        width_px=int(record["width_px"]),
        height_px=int(record["height_px"]),
        data=_base64.b64decode(record["image_b64"]),
        encoding=ImageEncoding(record.get("encoding", "png")),
    )


def document_from_parse_payload(payload: dict) -> SourceDocument:
    """Build a SourceDocument from a parser-service response payload."""
    elements = tuple(
        DocElement(kind=ElementKind(e["kind"]), text=e["text"], page=int(e["page"]))
        for e in payload.get("elements", [])
    )
    if not elements:
        raise IngestError(f"document {payload.get('id', '?')}: no elements detected")
    doc = SourceDocument(
        id=str(payload["id"]),
        title=str(payload.get("title", "")),
        pages=tuple(
            Page(number=int(p["number"]), image=_image_from_payload(p))
            for p in payload.get("pages", [])
        ),
        assets=tuple(
            VisualAsset(
                id=str(a["id"]),
                kind=AssetKind(a["kind"]),
                page=int(a["page"]),
                image=_image_from_payload(a),
                caption=a.get("caption"),
            )
            for a in payload.get("assets", [])
        ),
        text_elements=elements,
    )
    violations = validate_document(doc)
    if violations:
        raise IngestError(f"document {doc.id}: " + "; ".join(violations))
    return doc


def parse_document(
    pdf: bytes,
    endpoint: ParserEndpoint,
    *,
    transport: httpx.BaseTransport | None = None,
) -> SourceDocument:
    """Send a PDF to the parser service and build the SourceDocument."""
    if not pdf:
        raise ValueError("pdf payload is empty")
    headers = {}
    if endpoint.api_key:
        headers["Authorization"] = f"Bearer {endpoint.api_key}"
    try:
        with httpx.Client(
            base_url=endpoint.base_url.rstrip("/"),
            timeout=endpoint.timeout_s,
            transport=transport,
        ) as client:
            response = client.post(
                "/parse", files={"file": ("document.pdf", pdf, "application/pdf")},
                headers=headers,
            )
    except httpx.HTTPError as exc:
        raise TransportError(f"parser service unreachable: {exc}") from exc
    if response.status_code in (401, 403):
        # never echo the key back; the endpoint URL is enough to localize the failure
        raise AuthenticationError(
            f"parser service at {endpoint.base_url} rejected credentials "
            f"(status {response.status_code})",
            status=response.status_code,
        )
    if response.status_code != 200:
        raise TransportError(
            f"parser service returned {response.status_code}: {response.text[:200]}",
            status=response.status_code,
        )
    return document_from_parse_payload(response.json())


class FixtureParserClient:
    """Replays recorded parser responses: one ``<doc_id>.json`` per document."""

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)

    def doc_ids(self) -> list[str]:
        return sorted(p.stem for p in self.fixture_dir.glob("*.json"))

    def parse(self, doc_id: str) -> SourceDocument:
        path = self.fixture_dir / f"{doc_id}.json"
        if not path.exists():
            raise IngestError(f"no recorded parse for document {doc_id!r} at {path}")
        payload = json.loads(path.read_text(encoding="utf-8"))
        return document_from_parse_payload(payload)


# ---------------------------------------------------------------------------
# Chunking: one chunk per element, sentence-split only above budget
# ---------------------------------------------------------------------------

_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+")


def _hard_split(text: str, budget: int, tokenizer: Tokenizer) -> list[str]:
    pieces = []
    rest = text
    while tokenizer.count(rest) > budget:
        spans = tokenizer.spans(rest)
        cut = spans[budget - 1][1]
        pieces.append(rest[:cut])
        rest = rest[cut:]
    pieces.append(rest)
    return pieces


def split_to_budget(text: str, budget: int, tokenizer: Tokenizer | None = None) -> list[str]:
    """Split text into the minimal ordered pieces each within the token budget.

    Cuts fall on sentence boundaries; a single over-budget sentence falls back
    to a hard token split. Concatenating the pieces reproduces the text.
    """
    tokenizer = tokenizer or DEFAULT_TOKENIZER
    if tokenizer.count(text) <= budget:
        return [text]
    cut_points = [0] + [m.end() for m in _SENTENCE_BREAK.finditer(text)] + [len(text)]
    segments = [
        text[cut_points[i] : cut_points[i + 1]] for i in range(len(cut_points) - 1)
    ]
    segments = [s for s in segments if s]
    pieces: list[str] = []
    start = 0
    while start < len(segments):
        end = start + 1
        # grow the group while the concatenated slice stays under budget
        while end < len(segments) and tokenizer.count("".join(segments[start : end + 1])) <= budget:
            end += 1
        group = "".join(segments[start:end])
        if tokenizer.count(group) > budget:
            pieces.extend(_hard_split(group, budget, tokenizer))
        else:
            pieces.append(group)
        start = end
    return pieces


def chunk_document(
    doc: SourceDocument,
    cfg: IngestionConfig,
    tokenizer: Tokenizer | None = None,
) -> list[Chunk]:
    """One chunk per element in document order; over-budget elements split."""
    tokenizer = tokenizer or DEFAULT_TOKENIZER
    chunks: list[Chunk] = []
    for index, element in enumerate(doc.text_elements):
        pieces = split_to_budget(element.text, cfg.token_budget, tokenizer)
        for part, piece in enumerate(pieces):
            chunk_id = f"{doc.id}::e{index:04d}"
            if len(pieces) > 1:
                chunk_id += f".{part}"
            chunks.append(
                Chunk(
                    id=chunk_id,
                    doc_id=doc.id,
                    element_kind=element.kind,
                    text=piece,
                    page=element.page,
                    token_count=tokenizer.count(piece),
                )
            )
    return chunks


# ---------------------------------------------------------------------------
# Page image normalization (cap the long side, keep aspect ratio)
# ---------------------------------------------------------------------------


def normalize_page_image(img: PageImage, cfg: IngestionConfig) -> PageImage:
    """Downscale so the longer side equals the cap; under-cap images pass through."""
    cap = cfg.image_long_side_px
    if img.long_side <= cap:
        return img
    try:
        with Image.open(io.BytesIO(img.data)) as raster:
            raster.load()
            if img.width_px >= img.height_px:
                new_w = cap
                new_h = max(1, round(img.height_px * cap / img.width_px))
            else:
                new_h = cap
                new_w = max(1, round(img.width_px * cap / img.height_px))
            resized = raster.resize((new_w, new_h), resample=Image.Resampling.BOX)
            buffer = io.BytesIO()
            resized.save(buffer, format=img.encoding.value.upper())
    except UnidentifiedImageError as exc:
        raise FormatError(f"page image payload is not decodable: {exc}") from exc
    return PageImage(
        width_px=new_w, height_px=new_h, data=buffer.getvalue(), encoding=img.encoding
    )


# ---------------------------------------------------------------------------
# Visual-asset summarization
# ---------------------------------------------------------------------------


def summarize_asset(asset: VisualAsset, generator, tokenizer: Tokenizer | None = None) -> Summary:
    """Generate an asset summary; the response is hard-truncated to 250 tokens.

    ``generator`` follows the Generator protocol from the generation module.
    A response of '' (quoted or truly empty) means no relevant data and yields
    an empty summary.
    """
    from .augmentation import PromptPayload

    tokenizer = tokenizer or DEFAULT_TOKENIZER
    payload = PromptPayload(
        text=ASSET_SUMMARY_PROMPT,
        images=(asset.image,),
        option_order=(0, 1, 2, 3),
    )
    try:
        raw, _record = generator.generate(payload)
    except MmragError as exc:
        raise IngestError(f"summarization failed for asset {asset.id}: {exc}") from exc
    text = raw.strip()
    if text in ("", "''", '""'):
        return Summary(text="", token_count=0)
    truncated = truncate_tokens(text, SUMMARY_TOKEN_LIMIT, tokenizer)
    return Summary(text=truncated, token_count=tokenizer.count(truncated))


# ---------------------------------------------------------------------------
# Whole-document pipeline used by the CLI
# ---------------------------------------------------------------------------


def ingest_document(
    doc: SourceDocument,
    cfg: IngestionConfig,
    summarizer=None,
    tokenizer: Tokenizer | None = None,
) -> tuple[SourceDocument, list[Chunk]]:
    """Normalize page/asset images, summarize assets, and chunk the elements."""
    pages = tuple(
        Page(number=p.number, image=normalize_page_image(p.image, cfg)) for p in doc.pages
    )
    assets = []
    for asset in doc.assets:
        image = normalize_page_image(asset.image, cfg)
        summary = asset.summary
        if summary is None and cfg.summarize_assets and summarizer is not None:
            summary = summarize_asset(
                VisualAsset(
                    id=asset.id, kind=asset.kind, page=asset.page,
                    image=image, caption=asset.caption,
                ),
                summarizer,
                tokenizer,
            )
        assets.append(
            VisualAsset(
                id=asset.id,
                kind=asset.kind,
                page=asset.page,
                image=image,
                caption=asset.caption,
                summary=summary,
            )
        )
    normalized = SourceDocument(
        id=doc.id,
        title=doc.title,
        pages=pages,
        assets=tuple(assets),
        text_elements=doc.text_elements,
    )
    return normalized, chunk_document(normalized, cfg, tokenizer)
