"""FastAPI service exposing dense text embeddings and multi-vector page/query
embeddings behind one POST endpoint plus a health probe."""

from __future__ import annotations

import base64
import binascii
import logging

from fastapi import Depends, FastAPI, Header, HTTPException

from .backends import BackendLoadError, load_backend
from .schemas import (
    EmbedBatchRequest,
    EmbedBatchResponse,
    EmbedKind,
    EmbedRequest,
    EmbedResponse,
    HealthResponse,
    Retriever,
)
from .settings import ShimSettings

logger = logging.getLogger(__name__)


def create_app(settings: ShimSettings | None = None) -> FastAPI:
    settings = settings or ShimSettings.from_env()
    app = FastAPI(title="embed-shim", version="0.1.0")

    backend = None
    load_error: BackendLoadError | None = None
    try:
        backend = load_backend(
            settings.backend,
            dense_dim=settings.dense_dim,
            patch_tokens=settings.patch_tokens,
            batch_size=settings.batch_size,
        )
    except BackendLoadError as exc:
        load_error = exc
        logger.error("backend unavailable: %s", exc)

    def require_api_key(api_key: str | None = Header(default=None, alias="api-key")) -> None:
        if settings.api_key and api_key != settings.api_key:
            raise HTTPException(status_code=401, detail="invalid or missing api-key header")

    def require_backend():
        if backend is None:
            raise HTTPException(
                status_code=503,
                detail=f"model backend unavailable: {load_error.model_tag}",
            )
        return backend

    def require_retriever(retriever: Retriever) -> None:
        if retriever not in settings.retrievers:
            raise HTTPException(
                status_code=400, detail=f"retriever {retriever.value} is not enabled"
            )

    def decode_image(image_b64: str) -> bytes:
        try:
            return base64.b64decode(image_b64, validate=True)
        except (binascii.Error, ValueError):
            raise HTTPException(
                status_code=400, detail="field 'image_b64' is not valid base64"
            ) from None

    @app.post("/embed", response_model=EmbedResponse, dependencies=[Depends(require_api_key)])
    def embed(request: EmbedRequest) -> EmbedResponse:
        active = require_backend()
        if request.kind is EmbedKind.TEXT_DENSE:
            vectors = active.embed_text(request.text)
            return EmbedResponse(
                vectors=vectors, dim=active.dense_dim, model_tag=active.dense_tag()
            )
        require_retriever(request.retriever)
        if request.kind is EmbedKind.QUERY_MULTIVECTOR:
            vectors = active.embed_query(request.text, request.retriever)
            if not vectors:
                raise HTTPException(
                    status_code=400, detail="field 'text' yields no query tokens"
                )
        else:
            image = decode_image(request.image_b64)
            vectors = active.embed_pages([image], request.retriever)[0]
        return EmbedResponse(
            vectors=vectors,
            dim=len(vectors[0]),
            model_tag=active.retriever_tag(request.retriever),
        )

    @app.post(
        "/embed_batch",
        response_model=EmbedBatchResponse,
        dependencies=[Depends(require_api_key)],
    )
    def embed_batch(request: EmbedBatchRequest) -> EmbedBatchResponse:
        active = require_backend()
        require_retriever(request.retriever)
        images = [decode_image(image) for image in request.images_b64]
        tag = active.retriever_tag(request.retriever)
        results = [
            EmbedResponse(vectors=vectors, dim=len(vectors[0]), model_tag=tag)
            for vectors in active.embed_pages(images, request.retriever)
        ]
        return EmbedBatchResponse(results=results)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        if backend is None:
            return HealthResponse(status="degraded", models=[])
        models = [backend.dense_tag()] + [
            backend.retriever_tag(r) for r in settings.retrievers
        ]
        return HealthResponse(status="ok", models=models)

    return app


app = create_app()
