"""Environment-driven service settings (matching the env-style deployment
configuration of the other services in the stack)."""

from __future__ import annotations

import os
from dataclasses import dataclass

from .schemas import Retriever


@dataclass
class ShimSettings:
    backend: str = "stub"
    dense_dim: int = 768
    patch_tokens: int = 4
    batch_size: int = 8
    retrievers: tuple[Retriever, ...] = tuple(Retriever)
    api_key: str | None = None

    @classmethod
    def from_env(cls) -> "ShimSettings":
        retrievers = os.environ.get("EMBED_SHIM_RETRIEVERS")
        return cls(
            backend=os.environ.get("EMBED_SHIM_BACKEND", "stub"),
            dense_dim=int(os.environ.get("EMBED_SHIM_DENSE_DIM", "768")),
            patch_tokens=int(os.environ.get("EMBED_SHIM_PATCH_TOKENS", "4")),
            batch_size=int(os.environ.get("EMBED_SHIM_BATCH_SIZE", "8")),
            retrievers=tuple(
                Retriever(name.strip()) for name in retrievers.split(",") if name.strip()
            )
            if retrievers
            else tuple(Retriever),
            api_key=os.environ.get("EMBED_SHIM_API_KEY") or None,
        )
