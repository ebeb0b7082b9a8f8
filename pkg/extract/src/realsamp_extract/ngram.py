"""A count-based language-model family for offline measurement checks.

Models of increasing n-gram order form a legitimate "family" for the
measurement pipeline: they share one tokenizer, their parameter counts grow
with order, and on their training corpus higher-order models are sharper,
reproducing the entropy-decays-with-size effect without downloading
anything. Each order-o model interpolates the add-alpha o-gram conditional
with the next lower order, bottoming out at add-alpha unigrams.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class WordTokenizer:
    """Lowercased word/punctuation tokenizer with a corpus-built vocab."""

    def __init__(self, documents: Sequence[str]):
        vocab: dict[str, int] = {}
        for doc in documents:
            for tok in _TOKEN_RE.findall(doc.lower()):
                vocab.setdefault(tok, len(vocab))
        if not vocab:
            raise ValueError("corpus produced an empty vocabulary")
        self.vocab = vocab

    def encode(self, text: str) -> list[int]:
        return [self.vocab[t] for t in _TOKEN_RE.findall(text.lower()) if t in self.vocab]

    @property
    def size(self) -> int:
        return len(self.vocab)


@dataclass
class NGramModel:
    """Interpolated add-alpha n-gram model over token ids."""

    name: str
    order: int
    vocab_size: int
    alpha: float = 0.1

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        self._context_counts: list[dict[tuple[int, ...], Counter]] = [
            {} for _ in range(self.order)
        ]
        self._params = 0

    def fit(self, documents: dict[str, Sequence[int]]) -> "NGramModel":
        for tokens in documents.values():
            tokens = list(tokens)
            for t in range(1, len(tokens)):
                for o in range(1, self.order + 1):
                    if t - o < 0:
                        break
                    ctx = tuple(tokens[t - o : t])
                    table = self._context_counts[o - 1].setdefault(ctx, Counter())
                    if tokens[t] not in table:
                        self._params += 1
                    table[tokens[t]] += 1
        return self

    @property
    def log_size(self) -> float:
        # stored (context, token) count entries play the role of parameters
        return math.log(max(self._params, 1))

    def _probs(self, context: tuple[int, ...], order: int) -> np.ndarray:
        if order == 0:
            return np.full(self.vocab_size, 1.0 / self.vocab_size)
        table = self._context_counts[order - 1].get(context[len(context) - order :])
        lower = self._probs(context, order - 1)
        if table is None:
            return lower
        counts = np.zeros(self.vocab_size)
        for token, c in table.items():
            counts[token] = c
        total = counts.sum()
        return (counts + self.alpha * lower) / (total + self.alpha)

    def next_token_logits(self, token_ids: Sequence[int], window: int) -> np.ndarray:
        tokens = list(token_ids)
        rows = np.empty((len(tokens) - 1, self.vocab_size))
        for t in range(1, len(tokens)):
            start = max(0, t - min(window, self.order))
            probs = self._probs(tuple(tokens[start:t]), min(self.order, t - start))
            rows[t - 1] = np.log(np.maximum(probs, 1e-300))
        return rows


def build_family(
    orders: Sequence[int], documents: dict[str, Sequence[int]], vocab_size: int, alpha: float = 0.1
) -> list[NGramModel]:
    """Train one model per order on the given documents (ascending orders)."""
    models = []
    for order in orders:
        models.append(
            NGramModel(f"ngram-{order}", order, vocab_size, alpha).fit(documents)
        )
    return models


__all__ = ["WordTokenizer", "NGramModel", "build_family"]
