"""Domain types shared by all modules: benchmark items, documents, chunks,
visual assets, page images, plus the line-delimited benchmark file format.

All types are immutable after construction and safe to share across
concurrent readers. Invariant checks are split in two styles:

* ``validate_item`` returns violations as data (an empty list means valid),
  so that malformed records can be inspected rather than raised.
* loaders raise ``BenchmarkFormatError`` naming the record index and the
  violated field, because a benchmark file is an all-or-nothing input.
"""

from __future__ import annotations

import base64
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import FormatError, MmragError
from .tokens import Tokenizer, count_tokens

logger = logging.getLogger(__name__)

LETTERS = ("A", "B", "C", "D")


class Difficulty(Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


class ElementKind(Enum):
    HEADING = "heading"
    PARAGRAPH = "paragraph"
    CAPTION = "caption"
    TABLE = "table"
    FIGURE = "figure"


class AssetKind(Enum):
    TABLE = "table"
    FIGURE = "figure"


class ImageEncoding(Enum):
    PNG = "png"
    JPEG = "jpeg"


class BenchmarkFormatError(MmragError):
    """A benchmark file record is malformed; message names record and field."""


@dataclass(frozen=True)
class BenchmarkItem:
    """One MCQ: four options, a gold letter, a difficulty stratum, a source doc."""

    id: str
    question: str
    options: tuple[str, ...]
    gold: str
    difficulty: Difficulty
    source_doc: str

    def gold_index(self) -> int:
        return LETTERS.index(self.gold)

    def gold_text(self) -> str:
        return self.options[self.gold_index()]


def validate_item(item: BenchmarkItem) -> list[str]:
    """Every violated invariant of a BenchmarkItem; empty when valid."""
    violations = []
    if not item.id:
        violations.append("id empty")
    if not item.question.strip():
        violations.append("question empty")
    if len(item.options) != 4:
        violations.append(f"options: expected exactly 4, got {len(item.options)}")
    if len(set(item.options)) != len(item.options):
        violations.append("options not distinct")
    if item.gold not in LETTERS:
        violations.append("gold not in {A,B,C,D}")
    elif len(item.options) == 4 and not item.options[LETTERS.index(item.gold)]:
        violations.append("gold option text empty")
    if not isinstance(item.difficulty, Difficulty):
        violations.append("difficulty not one of easy/medium/hard")
    if not item.source_doc:
        violations.append("source_doc empty")
    return violations


@dataclass(frozen=True)
class PageImage:
    """Opaque encoded raster plus its pixel dimensions."""

    width_px: int
    height_px: int
    data: bytes
    encoding: ImageEncoding = ImageEncoding.PNG

    def __post_init__(self):
        if self.width_px < 1 or self.height_px < 1:
            raise FormatError("page image dimensions must be positive")

    @property
    def long_side(self) -> int:
        return max(self.width_px, self.height_px)


@dataclass(frozen=True)
class Page:
    number: int
    image: PageImage


@dataclass(frozen=True)
class Summary:
    text: str
    token_count: int


@dataclass(frozen=True)
class VisualAsset:
    id: str
    kind: AssetKind
    page: int
    image: PageImage
    caption: str | None = None
    summary: Summary | None = None


@dataclass(frozen=True)
class DocElement:
    kind: ElementKind
    text: str
    page: int


@dataclass(frozen=True)
class SourceDocument:
    id: str
    title: str
    pages: tuple[Page, ...]
    assets: tuple[VisualAsset, ...] = ()
    text_elements: tuple[DocElement, ...] = ()

    def page_image(self, number: int) -> PageImage:
        for page in self.pages:
            if page.number == number:
                return page.image
        raise KeyError(f"document {self.id} has no page {number}")


def validate_document(doc: SourceDocument) -> list[str]:
    violations = []
    numbers = [p.number for p in doc.pages]
    if numbers != list(range(1, len(numbers) + 1)):
        violations.append("page numbers not 1-based contiguous")
    valid = set(numbers)
    for asset in doc.assets:
        if asset.page not in valid:
            violations.append(f"asset {asset.id} references missing page {asset.page}")
    for element in doc.text_elements:
        if element.page not in valid:
            violations.append(f"element on missing page {element.page}")
    return violations


@dataclass(frozen=True)
class Chunk:
    """One chunk per parsed document element (split only when over budget)."""

    id: str
    doc_id: str
    element_kind: ElementKind
    text: str
    page: int
    token_count: int


# ---------------------------------------------------------------------------
# Benchmark file IO (UTF-8, one JSON record per line)
# ---------------------------------------------------------------------------

_REQUIRED_FIELDS = ("id", "question", "options", "gold", "difficulty", "source_doc")


def _item_from_record(record: dict, index: int) -> BenchmarkItem:
    for name in _REQUIRED_FIELDS:
        if name not in record:
            raise BenchmarkFormatError(f"record {index}: missing field '{name}'")
    try:
        difficulty = Difficulty(str(record["difficulty"]).lower())
    except ValueError:
        raise BenchmarkFormatError(
            f"record {index}: field 'difficulty' must be easy/medium/hard, "
            f"got {record['difficulty']!r}"
        ) from None
    options = record["options"]
    if not isinstance(options, list):
        raise BenchmarkFormatError(f"record {index}: field 'options' must be a list")
    item = BenchmarkItem(
        id=str(record["id"]),
        question=str(record["question"]),
        options=tuple(str(o) for o in options),
        gold=str(record["gold"]),
        difficulty=difficulty,
        source_doc=str(record["source_doc"]),
    )
    violations = validate_item(item)
    if violations:
        field_name = violations[0].split(":")[0].split()[0]
        raise BenchmarkFormatError(
            f"record {index}: field '{field_name}' invalid ({'; '.join(violations)})"
        )
    return item


def load_benchmark(path: str | Path) -> list[BenchmarkItem]:
    """Load a line-delimited benchmark file, rejecting malformed or duplicate records."""
    items: list[BenchmarkItem] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for index, line in enumerate(handle):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BenchmarkFormatError(f"record {index}: not valid JSON ({exc})") from None
            item = _item_from_record(record, index)
            if item.id in seen:
                raise BenchmarkFormatError(f"record {index}: duplicate id '{item.id}'")
            seen.add(item.id)
            items.append(item)
    counts = strata_counts(items)
    logger.info(
        "loaded %d benchmark items (easy=%d medium=%d hard=%d)",
        len(items),
        counts[Difficulty.EASY],
        counts[Difficulty.MEDIUM],
        counts[Difficulty.HARD],
    )
    return items


def item_to_record(item: BenchmarkItem) -> dict:
    return {
        "id": item.id,
        "question": item.question,
        "options": list(item.options),
        "gold": item.gold,
        "difficulty": item.difficulty.value,
        "source_doc": item.source_doc,
    }


def save_benchmark(items: list[BenchmarkItem], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for item in items:
            handle.write(json.dumps(item_to_record(item), ensure_ascii=False) + "\n")


def strata_counts(items: list[BenchmarkItem]) -> dict[Difficulty, int]:
    counts = Counter(item.difficulty for item in items)
    return {d: counts.get(d, 0) for d in Difficulty}


# ---------------------------------------------------------------------------
# Document serialization (canonical JSON; byte-identical for identical inputs)
# ---------------------------------------------------------------------------


def _image_to_record(image: PageImage) -> dict:
    return {
        "width_px": image.width_px,
        "height_px": image.height_px,
        "encoding": image.encoding.value,
        "data_b64": base64.b64encode(image.data).decode("ascii"),
    }


def _image_from_record(record: dict) -> PageImage:
    return PageImage(
        width_px=int(record["width_px"]),
        height_px=int(record["height_px"]),
        data=base64.b64decode(record["data_b64"]),
        encoding=ImageEncoding(record["encoding"]),
    )


def document_to_record(doc: SourceDocument) -> dict:
    return {
        "id": doc.id,
        "title": doc.title,
        "pages": [
            {"number": p.number, "image": _image_to_record(p.image)} for p in doc.pages
        ],
        "assets": [
            {
                "id": a.id,
                "kind": a.kind.value,
                "page": a.page,
                "image": _image_to_record(a.image),
                "caption": a.caption,
                "summary": None
                if a.summary is None
                else {"text": a.summary.text, "token_count": a.summary.token_count},
            }
            for a in doc.assets
        ],
        "elements": [
            {"kind": e.kind.value, "text": e.text, "page": e.page}
            for e in doc.text_elements
        ],
    }


def document_from_record(record: dict) -> SourceDocument:
    return SourceDocument(
        id=record["id"],
        title=record.get("title", ""),
        pages=tuple(
            Page(number=int(p["number"]), image=_image_from_record(p["image"]))
            for p in record["pages"]
        ),
        assets=tuple(
            VisualAsset(
                id=a["id"],
                kind=AssetKind(a["kind"]),
                page=int(a["page"]),
                image=_image_from_record(a["image"]),
                caption=a.get("caption"),
                summary=None
                if a.get("summary") is None
                else Summary(
                    text=a["summary"]["text"],
                    token_count=int(a["summary"]["token_count"]),
                ),
            )
            for a in record.get("assets", [])
        ),
        text_elements=tuple(
            DocElement(kind=ElementKind(e["kind"]), text=e["text"], page=int(e["page"]))
            for e in record.get("elements", [])
        ),
    )


def serialize_document(doc: SourceDocument) -> bytes:
    """Canonical byte serialization: identical documents serialize identically."""
    return json.dumps(
        document_to_record(doc), sort_keys=True, separators=(",", ":"), ensure_ascii=True
    ).encode("ascii")


def deserialize_document(data: bytes) -> SourceDocument:
    return document_from_record(json.loads(data.decode("ascii")))


# ---------------------------------------------------------------------------
# Catalog: lookup surface over ingested documents and chunks
# ---------------------------------------------------------------------------


@dataclass
class Catalog:
    """Resolves retrieval keys back to chunk texts, assets, and page images."""

    documents: dict[str, SourceDocument] = field(default_factory=dict)
    chunks: dict[str, Chunk] = field(default_factory=dict)

    def add_document(self, doc: SourceDocument, chunks: list[Chunk]) -> None:
        self.documents[doc.id] = doc
        for chunk in chunks:
            self.chunks[chunk.id] = chunk

    def chunk(self, chunk_id: str) -> Chunk | None:
        return self.chunks.get(chunk_id)

    def asset(self, asset_id: str) -> VisualAsset | None:
        for doc in self.documents.values():
            for asset in doc.assets:
                if asset.id == asset_id:
                    return asset
        return None

    def page_image(self, doc_id: str, page: int) -> PageImage:
        return self.documents[doc_id].page_image(page)

    def page_keys(self, doc_id: str) -> set[str]:
        doc = self.documents[doc_id]
        return {f"{doc_id}#{p.number}" for p in doc.pages}


def chunk_token_count(text: str, tokenizer: Tokenizer | None = None) -> int:
    return count_tokens(text, tokenizer)
