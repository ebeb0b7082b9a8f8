"""Hugging Face causal-LM backend.

Loads each family member sequentially (one model in memory at a time),
checks that every member shares the tokenizer, and reports sizes as natural
logs of non-embedding parameter counts (output embeddings are excluded too
when they are not tied to the input embeddings).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import ExtractionError, ScoredModel


def non_embedding_parameters(model) -> int:
    total = sum(p.numel() for p in model.parameters())
    seen = set()
    embed_in = model.get_input_embeddings()
    if embed_in is not None:
        total -= embed_in.weight.numel()
        seen.add(id(embed_in.weight))
    embed_out = model.get_output_embeddings()
    if embed_out is not None and id(embed_out.weight) not in seen:
        total -= embed_out.weight.numel()
    return int(total)


class HFModel:
    """One loaded causal LM exposing the scoring protocol."""

    def __init__(self, name: str, model, device: str = "cpu"):
        import torch

        self.name = name
        self._model = model.to(device).eval()
        self._device = device
        self._torch = torch
        self._log_size = math.log(non_embedding_parameters(model))

    @property
    def log_size(self) -> float:
        return self._log_size

    def next_token_logits(self, token_ids: Sequence[int], window: int) -> np.ndarray:
        """Score every position with at most ``window`` tokens per forward
        pass. Long documents are processed in overlapping chunks (stride
        window/2) so each scored position keeps at least half a window of
        context."""
        torch = self._torch
        tokens = list(token_ids)
        n = len(tokens)
        stride = max(1, window // 2)
        outs = []
        pos = 0  # rows produced so far; row t scores tokens[t + 1]
        with torch.no_grad():
            while pos < n - 1:
                start = max(0, pos + 1 - (window - stride)) if pos else 0
                end = min(n, start + window)
                ids = torch.tensor([tokens[start:end]], dtype=torch.long, device=self._device)
                logits = self._model(ids).logits[0].double().cpu().numpy()
                outs.append(logits[pos - start : end - start - 1])
                pos = end - 1
        return np.concatenate(outs, axis=0)


def _load(name: str, device: str):
    try:
        from transformers import AutoModelForCausalLM, AutoTokenizer
    except ImportError as exc:
        raise ExtractionError(f"transformers is required for hub models: {exc}") from None
    tokenizer = AutoTokenizer.from_pretrained(name)
    try:
        model = AutoModelForCausalLM.from_pretrained(name)
    except Exception as exc:  # noqa: BLE001 - OOM/network surfaced with advice
        if "out of memory" in str(exc).lower():
            raise ExtractionError(
                f"{name}: out of memory; try a smaller family member or --window"
            ) from exc
        raise
    return tokenizer, HFModel(name, model, device)


def load_family(names: Sequence[str], device: str = "cpu"):
    """Load tokenizer + models for a family, enforcing a shared tokenizer.

    Returns (tokenizer, models sorted by ascending non-embedding size).
    """
    if not names:
        raise ExtractionError("no model names given")
    tokenizer = None
    models = []
    reference_vocab = None
    for name in names:
        tok, model = _load(name, device)
        vocab = tok.get_vocab()
        if reference_vocab is None:
            tokenizer, reference_vocab = tok, vocab
        elif vocab != reference_vocab:
            raise ExtractionError(
                f"{name}: tokenizer differs from {names[0]}; the family must share one tokenizer"
            )
        models.append(model)
    models.sort(key=lambda m: m.log_size)
    return tokenizer, models


def tokenize_documents(tokenizer, documents: dict[str, str]) -> dict[str, list[int]]:
    """Tokenize with the family tokenizer, prepending a space to each
    document (tokenizers treat leading words differently otherwise)."""
    return {
        context_id: tokenizer(" " + text)["input_ids"]
        for context_id, text in documents.items()
    }


__all__ = ["HFModel", "load_family", "non_embedding_parameters", "tokenize_documents"]
