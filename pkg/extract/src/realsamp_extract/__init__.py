"""Measure per-token next-token entropies and surprisals across a language
model family and emit record files for the curve-fitting toolkit."""

from .core import (
    DEFAULT_WINDOW,
    ExtractionError,
    ExtractionJob,
    PositionRecord,
    entropy_and_surprisal,
    measure_family,
    measure_model,
    size_decay_summary,
    write_records,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_WINDOW",
    "ExtractionError",
    "ExtractionJob",
    "PositionRecord",
    "entropy_and_surprisal",
    "measure_family",
    "measure_model",
    "size_decay_summary",
    "write_records",
    "__version__",
]
