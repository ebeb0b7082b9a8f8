"""Generation-diversity metrics, regression metrics, and max-min score
aggregation.

Diversity works on corpora of token-index sequences grouped by prompt:
distinct-n pools the n-grams of all continuations of one prompt before
taking the unique/total ratio (cross-generation diversity), while the
repetition ratio flags continuations that repeat an n-gram internally
(within-generation degeneracy). Aggregation max-min normalizes each raw
metric within its (model, prompt_type) group and combines the four standard
columns into one factuality and one diversity score per method.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import DataError, MetricError, ParameterError, ShapeError

#: canonical metric column names used by the aggregate step
ENTAIL_R = "entail_r"
NE_ER = "ne_er"
DIST_2 = "dist_2"
REP = "rep"


@dataclass(frozen=True)
class Corpus:
    """Token-index generations grouped by prompt id."""

    generations: dict[str, list[tuple[int, ...]]]

    def __post_init__(self):
        groups = {
            str(pid): [tuple(int(t) for t in seq) for seq in seqs]
            for pid, seqs in self.generations.items()
        }
        object.__setattr__(self, "generations", groups)
        if not groups:
            raise DataError("corpus has no prompts")
        for pid, seqs in groups.items():
            if not seqs or any(len(s) == 0 for s in seqs):
                raise DataError(f"prompt {pid!r} has an empty generation")

    def all_sequences(self) -> list[tuple[int, ...]]:
        return [seq for seqs in self.generations.values() for seq in seqs]


def _ngrams(seq: tuple[int, ...], n: int):
    return (seq[i : i + n] for i in range(len(seq) - n + 1))


def distinct_n(corpus: Corpus, n: int) -> float:
    """Unique/total n-gram ratio pooled across the generations of each
    prompt, averaged over prompts that contribute at least one n-gram."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    ratios = []
    for seqs in corpus.generations.values():
        grams = [g for seq in seqs for g in _ngrams(seq, n)]
        if grams:
            ratios.append(len(set(grams)) / len(grams))
    if not ratios:
        raise MetricError(f"no sequence is long enough for {n}-grams")
    return float(np.mean(ratios))


def repetition_ratio(corpus: Corpus, n: int = 4) -> float:
    """Fraction of generations containing some n-gram at least twice."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    seqs = corpus.all_sequences()
    repetitive = sum(
        1 for seq in seqs if any(c >= 2 for c in Counter(_ngrams(seq, n)).values())
    )
    return repetitive / len(seqs)


# ---------------------------------------------------------------------------
# Regression metrics


@dataclass(frozen=True)
class RegressionReport:
    """pearson_r and r2 are None when the actuals have zero variance."""

    pearson_r: float | None
    r2: float | None
    mse: float
    mean_l1: float


def regression_report(predicted, actual) -> RegressionReport:
    """Standard regression metrics of predictions against actuals."""
    pred = np.asarray(predicted, dtype=np.float64)
    act = np.asarray(actual, dtype=np.float64)
    if pred.shape != act.shape or pred.ndim != 1 or pred.size == 0:
        raise ShapeError("predicted and actual must be equal-length non-empty vectors")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(act))):
        raise DataError("regression inputs must be finite")

    diff = pred - act
    mse = float(np.mean(diff * diff))
    mean_l1 = float(np.mean(np.abs(diff)))

    ss_tot = float(np.sum((act - act.mean()) ** 2))
    if ss_tot == 0.0:
        return RegressionReport(None, None, mse, mean_l1)
    r2 = 1.0 - float(np.sum(diff * diff)) / ss_tot

    pred_var = float(np.sum((pred - pred.mean()) ** 2))
    if pred_var == 0.0:
        pearson = None
    else:
        cov = float(np.sum((pred - pred.mean()) * (act - act.mean())))
        pearson = cov / math.sqrt(pred_var * ss_tot)
    return RegressionReport(pearson, r2, mse, mean_l1)


# ---------------------------------------------------------------------------
# Max-min aggregation


@dataclass(frozen=True)
class ScoreRow:
    """One raw metric observation."""

    method: str
    model: str
    prompt_type: str
    metric: str
    value: float


@dataclass(frozen=True)
class AggregateScores:
    agg_factuality: float | None
    agg_diversity: float | None
    normalized: dict[str, float]


def _normalize_group(values: dict[str, float]) -> dict[str, float]:
    lo, hi = min(values.values()), max(values.values())
    if hi == lo:
        # no range to normalize against; every method sits mid-scale
        return {m: 0.5 for m in values}
    return {m: (v - lo) / (hi - lo) for m, v in values.items()}


def minmax_aggregate(rows: list[ScoreRow]) -> dict[str, AggregateScores]:
    """Max-min normalize each metric within its (model, prompt_type) group,
    average the normalized values over groups per method, and combine:

        agg_factuality = entail_r_n - ne_er_n
        agg_diversity  = dist_2_n  - rep_n

    Requires at least 2 methods and complete groups (every method present
    in every (model, prompt_type, metric) cell it competes in).
    """
    if not rows:
        raise DataError("no score rows")
    methods = sorted({r.method for r in rows})
    if len(methods) < 2:
        raise DataError("max-min normalization needs at least 2 methods")

    groups: dict[tuple[str, str, str], dict[str, float]] = {}
    for r in rows:
        cell = groups.setdefault((r.model, r.prompt_type, r.metric), {})
        if r.method in cell:
            raise DataError(
                f"duplicate value for {r.method}/{r.model}/{r.prompt_type}/{r.metric}"
            )
        cell[r.method] = float(r.value)

    for key, cell in groups.items():
        missing = set(methods) - set(cell)
        if missing:
            raise DataError(f"group {key} is missing methods {sorted(missing)}")

    # normalize per group, then average each method's metric over groups
    sums: dict[str, dict[str, float]] = {m: {} for m in methods}
    counts: dict[str, dict[str, int]] = {m: {} for m in methods}
    for (model, ptype, metric), cell in groups.items():
        for method, v in _normalize_group(cell).items():
            sums[method][metric] = sums[method].get(metric, 0.0) + v
            counts[method][metric] = counts[method].get(metric, 0) + 1

    out: dict[str, AggregateScores] = {}
    for method in methods:
        normalized = {
            metric: sums[method][metric] / counts[method][metric]
            for metric in sums[method]
        }
        fact = (
            normalized[ENTAIL_R] - normalized[NE_ER]
            if ENTAIL_R in normalized and NE_ER in normalized
            else None
        )
        div = (
            normalized[DIST_2] - normalized[REP]
            if DIST_2 in normalized and REP in normalized
            else None
        )
        out[method] = AggregateScores(fact, div, normalized)
    return out


__all__ = [
    "ENTAIL_R",
    "NE_ER",
    "DIST_2",
    "REP",
    "Corpus",
    "distinct_n",
    "repetition_ratio",
    "RegressionReport",
    "regression_report",
    "ScoreRow",
    "AggregateScores",
    "minmax_aggregate",
]
