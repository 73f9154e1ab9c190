"""Token counting for chunk budgets, prompt ceilings, and summary cutoffs.

The default tokenizer is a whitespace+punctuation approximation: one token
per word or punctuation mark. Exact model tokenizers can be plugged in by
implementing the Tokenizer protocol.
"""

from __future__ import annotations

import re
from typing import Protocol

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


class Tokenizer(Protocol):
    def count(self, text: str) -> int: ...

    def spans(self, text: str) -> list[tuple[int, int]]:
        """Character span (start, end) of each token, in order."""
        ...


class ApproxTokenizer:
    """Counts words and punctuation marks as one token each."""

    def count(self, text: str) -> int:
        return sum(1 for _ in _TOKEN_RE.finditer(text))

    def spans(self, text: str) -> list[tuple[int, int]]:
        return [m.span() for m in _TOKEN_RE.finditer(text)]


DEFAULT_TOKENIZER = ApproxTokenizer()


def count_tokens(text: str, tokenizer: Tokenizer | None = None) -> int:
    return (tokenizer or DEFAULT_TOKENIZER).count(text)


def truncate_tokens(text: str, limit: int, tokenizer: Tokenizer | None = None) -> str:
    """Hard cutoff after the limit-th token; returns text unchanged when under."""
    if limit <= 0:
        return ""
    spans = (tokenizer or DEFAULT_TOKENIZER).spans(text)
    if len(spans) <= limit:
        return text
    return text[: spans[limit - 1][1]]
