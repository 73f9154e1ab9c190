"""Wire schemas for the embedding service."""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, model_validator


class EmbedKind(str, Enum):
    TEXT_DENSE = "text_dense"
    PAGE_MULTIVECTOR = "page_multivector"
    QUERY_MULTIVECTOR = "query_multivector"


class Retriever(str, Enum):
    COLPALI = "colpali"
    COLQWEN = "colqwen"
    COLFLOR = "colflor"


class EmbedRequest(BaseModel):
    kind: EmbedKind
    retriever: Retriever | None = None
    text: str | None = None
    image_b64: str | None = None

    @model_validator(mode="after")
    def check_kind_fields(self) -> "EmbedRequest":
        if self.kind is EmbedKind.TEXT_DENSE and not self.text:
            raise ValueError("text_dense requires field 'text'")
        if self.kind is EmbedKind.PAGE_MULTIVECTOR:
            if not self.image_b64:
                raise ValueError("page_multivector requires field 'image_b64'")
            if self.retriever is None:
                raise ValueError("page_multivector requires field 'retriever'")
        if self.kind is EmbedKind.QUERY_MULTIVECTOR:
            if not self.text:
                raise ValueError("query_multivector requires field 'text'")
            if self.retriever is None:
                raise ValueError("query_multivector requires field 'retriever'")
        return self


class EmbedBatchRequest(BaseModel):
    """Batched page embedding; output order matches input order."""

    retriever: Retriever
    images_b64: list[str]

    @model_validator(mode="after")
    def check_non_empty(self) -> "EmbedBatchRequest":
        if not self.images_b64:
            raise ValueError("images_b64 must not be empty")
        return self


class EmbedResponse(BaseModel):
    vectors: list[list[float]]
    dim: int
    model_tag: str

    @model_validator(mode="after")
    def check_shape(self) -> "EmbedResponse":
        if not self.vectors:
            raise ValueError("vectors must not be empty")
        if any(len(v) != self.dim for v in self.vectors):
            raise ValueError("all vectors must share the declared dim")
        return self


class EmbedBatchResponse(BaseModel):
    results: list[EmbedResponse]


class HealthResponse(BaseModel):
    status: str
    models: list[str]
