"""Evidence assembly: build the context bundle for a question under one of
the four augmentation strategies and render the final prompt payload.

Everything here is a pure function over immutable inputs. Per-strategy
emptiness invariants are enforced on every built bundle:

* none: all lists empty
* text: images and summaries empty
* visual pages: snippets and summaries empty
* multimodal: snippets plus, for each retrieved asset, its raw image AND its summary
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

from .corpus import LETTERS, BenchmarkItem, Catalog, PageImage, Summary
from .embeddings import (
    EmbeddingClient,
    RetrieverId,
    embed_query_multivector,
    embed_text,
)
from .errors import ConfigurationError, MmragError
from .index import VectorCollection, search_dense, search_late_interaction
from .prompts import MCQ_PROMPT_TEMPLATE
from .tokens import Tokenizer, count_tokens

logger = logging.getLogger(__name__)

DEFAULT_CONTEXT_TOKEN_CEILING = 16000
DEFAULT_MAX_IMAGES = 8

OptionOrder = tuple[int, int, int, int]
IDENTITY_ORDER: OptionOrder = (0, 1, 2, 3)


class StrategyKind(Enum):
    NONE = "none"
    TEXT = "text"
    MULTIMODAL = "multimodal"
    VISUAL_PAGES = "visual_pages"


@dataclass(frozen=True)
class AugmentationStrategy:
    kind: StrategyKind
    retriever: RetrieverId | None = None

    def __post_init__(self):
        if self.kind is StrategyKind.VISUAL_PAGES and self.retriever is None:
            raise ConfigurationError("visual-pages strategy requires a retriever id")
        if self.kind is not StrategyKind.VISUAL_PAGES and self.retriever is not None:
            raise ConfigurationError(f"{self.kind.value} strategy does not take a retriever")

    @classmethod
    def none(cls) -> "AugmentationStrategy":
        return cls(StrategyKind.NONE)

    @classmethod
    def text(cls) -> "AugmentationStrategy":
        return cls(StrategyKind.TEXT)

    @classmethod
    def multimodal(cls) -> "AugmentationStrategy":
        return cls(StrategyKind.MULTIMODAL)

    @classmethod
    def visual_pages(cls, retriever: RetrieverId) -> "AugmentationStrategy":
        return cls(StrategyKind.VISUAL_PAGES, retriever)

    @property
    def label(self) -> str:
        if self.kind is StrategyKind.VISUAL_PAGES:
            return f"visual:{self.retriever.value}"
        return self.kind.value

    @classmethod
    def parse(cls, label: str) -> "AugmentationStrategy":
        label = label.strip().lower()
        if label.startswith("visual:"):
            return cls.visual_pages(RetrieverId(label.split(":", 1)[1]))
        try:
            return cls(StrategyKind(label))
        except ValueError:
            raise ConfigurationError(f"unknown augmentation strategy {label!r}") from None


@dataclass(frozen=True)
class ContextBundle:
    text_snippets: tuple[tuple[str, str], ...] = ()
    images: tuple[tuple[str, PageImage], ...] = ()
    summaries: tuple[tuple[str, Summary], ...] = ()
    retrieval_trace: tuple[tuple[str, float], ...] = ()

    @property
    def is_empty(self) -> bool:
        return not (self.text_snippets or self.images or self.summaries)


EMPTY_BUNDLE = ContextBundle()


@dataclass(frozen=True)
class PromptPayload:
    text: str
    images: tuple[PageImage, ...] = ()
    option_order: OptionOrder = IDENTITY_ORDER
    truncated: bool = False


@dataclass
class IndexSet:
    """The retrieval surfaces a run needs, plus the catalog to resolve hits."""

    embedder: EmbeddingClient
    catalog: Catalog
    dense: VectorCollection | None = None
    multimodal: VectorCollection | None = None
    pages: dict[RetrieverId, VectorCollection] = field(default_factory=dict)


@dataclass(frozen=True)
class ContextLimits:
    token_ceiling: int = DEFAULT_CONTEXT_TOKEN_CEILING
    max_images: int = DEFAULT_MAX_IMAGES


def validate_bundle(strategy: AugmentationStrategy, bundle: ContextBundle) -> list[str]:
    """Violated per-strategy emptiness invariants; empty list when consistent."""
    violations = []
    kind = strategy.kind
    if kind is StrategyKind.NONE:
        if not bundle.is_empty or bundle.retrieval_trace:
            violations.append("none strategy requires an empty bundle")
    elif kind is StrategyKind.TEXT:
        if bundle.images:
            violations.append("text strategy must not carry images")
        if bundle.summaries:
            violations.append("text strategy must not carry summaries")
    elif kind is StrategyKind.VISUAL_PAGES:
        if bundle.text_snippets:
            violations.append("visual-pages strategy must not carry text snippets")
        if bundle.summaries:
            violations.append("visual-pages strategy must not carry summaries")
    return violations


def _fit_to_ceiling(
    item: BenchmarkItem,
    snippets: list[tuple[str, str]],
    summaries: list[tuple[str, Summary]],
    ceiling: int,
    tokenizer: Tokenizer | None,
) -> tuple[list[tuple[str, str]], list[tuple[str, Summary]], bool]:
    def estimate() -> int:
        total = count_tokens(item.question, tokenizer)
        total += sum(count_tokens(o, tokenizer) for o in item.options)
        total += sum(count_tokens(t, tokenizer) for _, t in snippets)
        total += sum(s.token_count for _, s in summaries)
        return total

    dropped = False
    # lowest-ranked evidence goes first: snippet tails, then summary tails
    while estimate() > ceiling and snippets:
        snippets.pop()
        dropped = True
    while estimate() > ceiling and summaries:
        summaries.pop()
        dropped = True
    return snippets, summaries, dropped


def build_context(
    item: BenchmarkItem,
    strategy: AugmentationStrategy,
    indexes: IndexSet,
    k: int,
    limits: ContextLimits = ContextLimits(),
    tokenizer: Tokenizer | None = None,
) -> ContextBundle:
    """Retrieve top-k evidence for the item under the given strategy."""
    if k < 1:
        raise ValueError("k must be >= 1")
    kind = strategy.kind
    if kind is StrategyKind.NONE:
        return EMPTY_BUNDLE

    if kind is StrategyKind.TEXT:
        if indexes.dense is None:
            raise ConfigurationError("text strategy requires the dense chunk index")
        query = embed_text(item.question, indexes.embedder)
        hits = search_dense(query, indexes.dense, k)
        snippets = []
        for key, _score in hits:
            chunk = indexes.catalog.chunk(key)
            if chunk is None:
                raise MmragError(f"retrieved chunk {key!r} not present in catalog")
            snippets.append((key, chunk.text))
        snippets, _, _ = _fit_to_ceiling(item, snippets, [], limits.token_ceiling, tokenizer)
        bundle = ContextBundle(
            text_snippets=tuple(snippets), retrieval_trace=tuple(hits)
        )

    elif kind is StrategyKind.MULTIMODAL:
        if indexes.multimodal is None:
            raise ConfigurationError(
                "multimodal strategy requires the chunk+summary dense index"
            )
        query = embed_text(item.question, indexes.embedder)
        hits = search_dense(query, indexes.multimodal, k)
        snippets = []
        images = []
        summaries = []
        for key, _score in hits:
            chunk = indexes.catalog.chunk(key)
            if chunk is not None:
                snippets.append((key, chunk.text))
                continue
            asset = indexes.catalog.asset(key)
            if asset is None:
                raise MmragError(f"retrieved key {key!r} resolves to neither chunk nor asset")
            images.append((asset.id, asset.image))
            summaries.append((asset.id, asset.summary or Summary("", 0)))
        snippets, summaries, dropped_summaries = _fit_to_ceiling(
            item, snippets, summaries, limits.token_ceiling, tokenizer
        )
        if dropped_summaries:
            kept = {key for key, _ in summaries}
            images = [(key, img) for key, img in images if key in kept]
        images = images[: limits.max_images]
        bundle = ContextBundle(
            text_snippets=tuple(snippets),
            images=tuple(images),
            summaries=tuple(summaries),
            retrieval_trace=tuple(hits),
        )

    else:  # VISUAL_PAGES
        index = indexes.pages.get(strategy.retriever)
        if index is None:
            raise ConfigurationError(
                f"visual-pages strategy requires the {strategy.retriever.value} page index"
            )
        query = embed_query_multivector(item.question, strategy.retriever, indexes.embedder)
        hits = search_late_interaction(query, index, k)
        images = []
        for key, _score in hits[: limits.max_images]:
            doc_id, _, page = key.partition("#")
            images.append((key, indexes.catalog.page_image(doc_id, int(page))))
        bundle = ContextBundle(images=tuple(images), retrieval_trace=tuple(hits))

    violations = validate_bundle(strategy, bundle)
    if violations:
        raise MmragError("; ".join(violations))
    return bundle


# ---------------------------------------------------------------------------
# Option-order permutations and gold-letter bookkeeping
# ---------------------------------------------------------------------------


def remap_gold(gold: str, order: OptionOrder) -> str:
    """The letter whose displayed position holds the original gold option."""
    original = LETTERS.index(gold)
    return LETTERS[order.index(original)]


def inverse_order(order: OptionOrder) -> OptionOrder:
    inverse = [0, 0, 0, 0]
    for position, original in enumerate(order):
        inverse[original] = position
    return tuple(inverse)  # type: ignore[return-value]


def apply_option_order(item: BenchmarkItem, order: OptionOrder) -> BenchmarkItem:
    """Reorder options by ``order`` (display position -> original index)."""
    if sorted(order) != [0, 1, 2, 3]:
        raise ValueError(f"not a permutation of option positions: {order}")
    return replace(
        item,
        options=tuple(item.options[i] for i in order),
        gold=remap_gold(item.gold, order),
    )


# ---------------------------------------------------------------------------
# Prompt assembly
# ---------------------------------------------------------------------------


def format_question_string(options: tuple[str, ...]) -> str:
    return "\n".join(f"{letter}: {text}" for letter, text in zip(LETTERS, options))


def assemble_prompt(
    item: BenchmarkItem,
    bundle: ContextBundle,
    order: OptionOrder = IDENTITY_ORDER,
    limits: ContextLimits = ContextLimits(),
    tokenizer: Tokenizer | None = None,
) -> PromptPayload:
    """Instantiate the MCQ template with permuted options and the evidence context.

    The context section lists snippets first, then summaries, each in trace
    order. When the estimated prompt exceeds the token ceiling, the lowest-
    ranked snippets are dropped first, then summaries; an empty prompt that is
    still over the ceiling is an error.
    """
    if sorted(order) != [0, 1, 2, 3]:
        raise ValueError(f"not a permutation of option positions: {order}")
    permuted = tuple(item.options[i] for i in order)
    snippets = list(bundle.text_snippets)
    summaries = list(bundle.summaries)

    def render(current_snippets, current_summaries) -> str:
        parts = [text for _, text in current_snippets]
        parts += [s.text for _, s in current_summaries if s.text]
        context = "\n\n".join(parts)
        return MCQ_PROMPT_TEMPLATE.format(
            question=item.question,
            question_string=format_question_string(permuted),
            context=context,
        )

    truncated = False
    text = render(snippets, summaries)
    while count_tokens(text, tokenizer) > limits.token_ceiling and snippets:
        snippets.pop()
        truncated = True
        text = render(snippets, summaries)
    while count_tokens(text, tokenizer) > limits.token_ceiling and summaries:
        summaries.pop()
        truncated = True
        text = render(snippets, summaries)
    if count_tokens(text, tokenizer) > limits.token_ceiling:
        raise MmragError(
            "prompt exceeds the context token ceiling even with all evidence dropped"
        )
    images = tuple(image for _, image in bundle.images[: limits.max_images])
    return PromptPayload(text=text, images=images, option_order=order, truncated=truncated)
