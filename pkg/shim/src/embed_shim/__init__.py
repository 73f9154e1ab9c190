"""HTTP embedding service: dense text vectors plus multi-vector page and
query embeddings (ColPali/ColQwen/ColFlor style) behind one fixed contract."""

__version__ = "0.1.0"

from .app import create_app
from .schemas import EmbedRequest, EmbedResponse, Retriever
from .settings import ShimSettings
