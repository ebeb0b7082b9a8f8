"""Model-agnostic entropy/surprisal measurement over a tokenized corpus.

A "scored model" is anything exposing a log parameter count and a causal
scoring function: given a document's token ids it returns one logit row per
position, where row t scores the token at position t+1. The family runner
executes each model sequentially over the whole corpus (bounding memory to
one model at a time) and merges the per-size passes by document and
position into record rows.

Entropies and surprisals are in nats; model sizes are natural logs of
non-embedding parameter counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

DEFAULT_WINDOW = 1024


class ExtractionError(ValueError):
    """Raised for inconsistent model families or unusable corpora."""


class ScoredModel(Protocol):
    name: str

    @property
    def log_size(self) -> float:
        """Natural log of the non-embedding parameter count."""
        ...

    def next_token_logits(self, token_ids: Sequence[int], window: int) -> np.ndarray:
        """Logit rows of shape (len(token_ids) - 1, vocab); row t scores
        token t+1 given at most ``window`` preceding tokens."""
        ...


@dataclass(frozen=True)
class ExtractionJob:
    """One measurement run: a model family (smallest to largest), a corpus
    of documents, and the context window cap."""

    models: tuple[str, ...]
    corpus_path: str
    output_path: str
    window: int = DEFAULT_WINDOW
    device: str = "cpu"
    max_docs: int | None = None

    def __post_init__(self):
        if len(self.models) < 3:
            raise ExtractionError("a model family needs at least 3 sizes")
        if self.window < 2:
            raise ExtractionError("window must be >= 2")


@dataclass
class PositionRecord:
    context_id: str
    position: int
    entropies: list[float] = field(default_factory=list)
    surprisals: list[float] = field(default_factory=list)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    w = np.exp(shifted)
    return w / w.sum(axis=-1, keepdims=True)


def entropy_and_surprisal(
    logits: np.ndarray, next_tokens: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row Shannon entropy of softmax(logits) and -log p of the realized
    next token."""
    probs = softmax_rows(np.asarray(logits, dtype=np.float64))
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(probs > 0, probs * np.log(probs), 0.0)
    entropies = -plogp.sum(axis=-1)
    picked = probs[np.arange(probs.shape[0]), np.asarray(next_tokens, dtype=np.int64)]
    surprisals = -np.log(np.maximum(picked, 1e-300))
    return entropies, surprisals


def measure_model(
    model: ScoredModel, documents: dict[str, Sequence[int]], window: int
) -> dict[tuple[str, int], tuple[float, float]]:
    """One model's (entropy, surprisal) per (context_id, position).

    Positions index the predicted token within its document, starting at 1
    (position 0 has no context to condition on).
    """
    out: dict[tuple[str, int], tuple[float, float]] = {}
    for context_id, tokens in documents.items():
        tokens = list(tokens)
        if len(tokens) < 2:
            continue
        logits = np.asarray(model.next_token_logits(tokens, window), dtype=np.float64)
        if logits.shape[0] != len(tokens) - 1:
            raise ExtractionError(
                f"{model.name}: expected {len(tokens) - 1} logit rows for "
                f"{context_id!r}, got {logits.shape[0]}"
            )
        ents, sups = entropy_and_surprisal(logits, np.asarray(tokens[1:]))
        for pos in range(1, len(tokens)):
            out[(context_id, pos)] = (float(ents[pos - 1]), float(sups[pos - 1]))
    return out


def measure_family(
    models: Sequence[ScoredModel], documents: dict[str, Sequence[int]], window: int = DEFAULT_WINDOW
) -> tuple[list[float], list[PositionRecord]]:
    """Run every model over the corpus and merge passes into record rows.

    Returns (log sizes ascending, records sorted by document and position).
    Models must arrive smallest to largest; duplicate or shrinking sizes
    indicate a mis-specified family.
    """
    if not models:
        raise ExtractionError("no models given")
    sizes = [float(m.log_size) for m in models]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ExtractionError(f"model sizes must be strictly increasing, got {sizes}")

    passes = [measure_model(m, documents, window) for m in models]
    keys = sorted(passes[0])
    for model, one_pass in zip(models[1:], passes[1:]):
        if sorted(one_pass) != keys:
            raise ExtractionError(f"{model.name}: pass covers different positions")

    records = []
    for context_id, position in keys:
        rec = PositionRecord(context_id, position)
        for one_pass in passes:
            ent, sup = one_pass[(context_id, position)]
            rec.entropies.append(ent)
            rec.surprisals.append(sup)
        records.append(rec)
    return sizes, records


def write_records(
    path,
    sizes: Sequence[float],
    records: Sequence[PositionRecord],
    labels: Sequence[str] | None = None,
    corpus_name: str = "",
    window_hint: int = 40,
) -> None:
    """Emit the record-file format consumed by the curve-fitting toolkit:
    a JSON header line with the family, then one profile per line."""
    header = {
        "family": {"sizes": list(sizes), "labels": list(labels) if labels else None},
        "corpus_name": corpus_name,
        "window_hint": window_hint,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "context_id": rec.context_id,
                        "position": rec.position,
                        "entropies": rec.entropies,
                        "surprisals": rec.surprisals,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )


def size_decay_summary(sizes: Sequence[float], records: Sequence[PositionRecord]) -> dict:
    """Average entropy per size plus the share of positions where the
    smallest model is more uncertain than the largest."""
    if not records:
        raise ExtractionError("no records to summarize")
    matrix = np.asarray([r.entropies for r in records])
    mean_by_size = matrix.mean(axis=0)
    small_above_large = float(np.mean(matrix[:, 0] > matrix[:, -1]))
    return {
        "sizes": list(sizes),
        "mean_entropy_by_size": [float(v) for v in mean_by_size],
        "strictly_decreasing_mean": bool(np.all(np.diff(mean_by_size) < 0)),
        "share_smallest_above_largest": small_above_large,
        "positions": len(records),
    }


__all__ = [
    "DEFAULT_WINDOW",
    "ExtractionError",
    "ScoredModel",
    "ExtractionJob",
    "PositionRecord",
    "softmax_rows",
    "entropy_and_surprisal",
    "measure_model",
    "measure_family",
    "write_records",
    "size_decay_summary",
]
