"""Work-directory persistence for ingested documents, chunks, and manifests."""

from __future__ import annotations

import json
import logging
from pathlib import Path

from .corpus import (
    Catalog,
    Chunk,
    ElementKind,
    SourceDocument,
    deserialize_document,
    serialize_document,
)
from .errors import ConfigurationError

logger = logging.getLogger(__name__)


class IngestStore:
    """Documents under documents/, chunks under chunks/, counts in manifest.json."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.documents_dir = self.root / "documents"
        self.chunks_dir = self.root / "chunks"
        self.manifest_path = self.root / "manifest.json"

    def save_document(self, doc: SourceDocument, chunks: list[Chunk]) -> None:
        self.documents_dir.mkdir(parents=True, exist_ok=True)
        self.chunks_dir.mkdir(parents=True, exist_ok=True)
        (self.documents_dir / f"{doc.id}.json").write_bytes(serialize_document(doc))
        with open(self.chunks_dir / f"{doc.id}.jsonl", "w", encoding="utf-8") as handle:
            for chunk in chunks:
                handle.write(
                    json.dumps(
                        {
                            "id": chunk.id,
                            "doc_id": chunk.doc_id,
                            "element_kind": chunk.element_kind.value,
                            "text": chunk.text,
                            "page": chunk.page,
                            "token_count": chunk.token_count,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )

    def doc_ids(self) -> list[str]:
        if not self.documents_dir.exists():
            return []
        return sorted(path.stem for path in self.documents_dir.glob("*.json"))

    def load_document(self, doc_id: str) -> SourceDocument:
        return deserialize_document((self.documents_dir / f"{doc_id}.json").read_bytes())

    def load_chunks(self, doc_id: str) -> list[Chunk]:
        chunks = []
        with open(self.chunks_dir / f"{doc_id}.jsonl", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                chunks.append(
                    Chunk(
                        id=record["id"],
                        doc_id=record["doc_id"],
                        element_kind=ElementKind(record["element_kind"]),
                        text=record["text"],
                        page=int(record["page"]),
                        token_count=int(record["token_count"]),
                    )
                )
        return chunks

    def load_catalog(self) -> Catalog:
        doc_ids = self.doc_ids()
        if not doc_ids:
            raise ConfigurationError(
                f"ingest store at {self.root} is empty; run the ingest command first"
            )
        catalog = Catalog()
        for doc_id in doc_ids:
            catalog.add_document(self.load_document(doc_id), self.load_chunks(doc_id))
        return catalog

    def write_manifest(self, per_document: dict[str, dict]) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest_path.write_text(
            json.dumps({"documents": per_document}, sort_keys=True, indent=2),
            encoding="utf-8",
        )

    def load_manifest(self) -> dict:
        if not self.manifest_path.exists():
            raise ConfigurationError(
                f"no ingestion manifest at {self.manifest_path}; run the ingest command first"
            )
        return json.loads(self.manifest_path.read_text(encoding="utf-8"))

    def page_counts(self) -> dict[str, int]:
        manifest = self.load_manifest()
        return {
            doc_id: int(entry["pages"])
            for doc_id, entry in manifest["documents"].items()
        }
