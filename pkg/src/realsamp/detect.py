"""Unsupervised hallucination-detection features over labeled token spans,
plus precision-recall scoring of individual feature columns.

Eight features per span, each reduced over the span's tokens: perplexity and
entropy of the largest and smallest family members, the geometric-mean
heuristic sqrt(large * max(0, small - large)) on both scales, and the two
curve-derived signals (mean residual entropy, mean asymptote). Perplexity is
exp(mean surprisal), with surprisals in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decay import DecayCurve, EntropyProfile, ModelFamilySpec, asymptote, residual_entropy
from .errors import DataError, ParameterError, ShapeError

FACTUAL = "factual"
NONFACTUAL = "nonfactual"

FEATURE_NAMES = (
    "large_per",
    "large_ent",
    "small_per",
    "small_ent",
    "heur_per",
    "heur_ent",
    "re",
    "ae",
)


@dataclass(frozen=True)
class LabeledSpan:
    """A contiguous token span with a factual/nonfactual label and one
    entropy profile per token."""

    context_id: str
    label: str
    profiles: list[EntropyProfile]

    def __post_init__(self):
        if self.label not in (FACTUAL, NONFACTUAL):
            raise ParameterError(f"label must be factual or nonfactual, got {self.label!r}")
        if not self.profiles:
            raise ShapeError("span must cover at least one token")


@dataclass(frozen=True)
class DetectionFeatureVector:
    """Perplexity features are None when the span has no surprisals."""

    large_per: float | None
    large_ent: float
    small_per: float | None
    small_ent: float
    heur_per: float | None
    heur_ent: float
    re: float
    ae: float

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}


def _heuristic(large: float, small: float) -> float:
    return math.sqrt(large * max(0.0, small - large))


def extract_features(
    span: LabeledSpan,
    curves: list[DecayCurve],
    family: ModelFamilySpec,
    aggregation: str = "mean",
) -> DetectionFeatureVector:
    """Compute the span's feature vector from its per-token profiles and the
    per-token fitted curves.

    ``aggregation`` is "mean" (reduce over all tokens) or "first_token"
    (use only the first token, which works better for short phrases).
    """
    if aggregation not in ("mean", "first_token"):
        raise ParameterError(f"unknown aggregation {aggregation!r}")
    if len(curves) != len(span.profiles):
        raise ShapeError("need one fitted curve per span token")
    profiles = span.profiles if aggregation == "mean" else span.profiles[:1]
    used_curves = curves if aggregation == "mean" else curves[:1]
    for p in profiles:
        if p.entropies.size != family.count:
            raise ShapeError(f"profile {p.context_id!r}@{p.position} does not match the family")

    large_ent = float(np.mean([p.entropies[-1] for p in profiles]))
    small_ent = float(np.mean([p.entropies[0] for p in profiles]))

    if all(p.surprisals is not None for p in profiles):
        large_per = math.exp(float(np.mean([p.surprisals[-1] for p in profiles])))
        small_per = math.exp(float(np.mean([p.surprisals[0] for p in profiles])))
        heur_per = _heuristic(large_per, small_per)
    else:
        large_per = small_per = heur_per = None

    s_n = family.largest
    re = float(np.mean([residual_entropy(c, s_n) for c in used_curves]))
    ae = float(np.mean([asymptote(c) for c in used_curves]))

    return DetectionFeatureVector(
        large_per=large_per,
        large_ent=large_ent,
        small_per=small_per,
        small_ent=small_ent,
        heur_per=heur_per,
        heur_ent=_heuristic(large_ent, small_ent),
        re=re,
        ae=ae,
    )


# ---------------------------------------------------------------------------
# Feature scoring


def pr_auc(scores, labels) -> float:
    """Area under the precision-recall curve (average-precision form),
    treating 1-labels as positives and higher scores as more positive.

    Tied scores cross the decision threshold together, so the curve is
    evaluated once per distinct score value.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order].astype(np.float64)
    positives = float(y.sum())
    if positives == 0 or positives == y.size:
        raise DataError("PR-AUC needs both classes present")
    # indices of the last element of each tie group
    last_in_group = np.flatnonzero(np.diff(s) != 0)
    boundaries = np.concatenate([last_in_group, [y.size - 1]])
    tp = np.cumsum(y)[boundaries]
    precision = tp / (boundaries + 1.0)
    recall = tp / positives
    d_recall = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(precision * d_recall))


def best_threshold_accuracy(scores, labels) -> float:
    """Accuracy of the best single-threshold classifier score >= t -> 1."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(np.int64)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise ShapeError("scores and labels must be equal-length vectors")
    best = max(np.mean(y == 0), np.mean(y == 1))  # all-negative / all-positive
    for t in np.unique(s):
        best = max(best, float(np.mean((s >= t).astype(np.int64) == y)))
    return float(best)


def group_pick_accuracy(values, labels, group_ids, higher_is_nonfactual: bool = True) -> float:
    """Accuracy of picking the single factual span out of each group.

    For benchmark sets that bundle one factual continuation with several
    nonfactual ones, the feature's pick is the group's lowest hazard score
    (ties: first index). Every group must contain exactly one factual span.
    """
    v = np.asarray(values, dtype=np.float64)
    y = np.asarray([1 if l == NONFACTUAL else 0 if l == FACTUAL else int(l) for l in labels])
    g = np.asarray(group_ids)
    if not (v.shape == y.shape == g.shape) or v.ndim != 1 or v.size == 0:
        raise ShapeError("values, labels and group_ids must be equal-length vectors")
    scores = v if higher_is_nonfactual else -v
    hits = total = 0
    for gid in np.unique(g):
        idx = np.flatnonzero(g == gid)
        if int(y[idx].sum()) != idx.size - 1:
            raise DataError(f"group {gid!r} must contain exactly one factual span")
        picked = idx[int(np.argmin(scores[idx]))]
        hits += int(y[picked] == 0)
        total += 1
    return hits / total


def score_feature(values, labels, higher_is_nonfactual: bool = True) -> dict:
    """Score one feature column against nonfactual-positive labels.

    ``labels`` may be 0/1 ints or the strings "factual"/"nonfactual".
    Returns {"auc": float | None, "accuracy": float}; auc is None when only
    one class is present.
    """
    v = np.asarray(values, dtype=np.float64)
    y = np.asarray(
        [1 if l == NONFACTUAL else 0 if l == FACTUAL else int(l) for l in labels],
        dtype=np.int64,
    )
    if v.shape != y.shape or v.ndim != 1 or v.size == 0:
        raise ShapeError("values and labels must be equal-length vectors")
    if not np.all(np.isfinite(v)):
        raise DataError("feature values must be finite")
    scores = v if higher_is_nonfactual else -v
    try:
        auc = pr_auc(scores, y)
    except DataError:
        auc = None
    return {"auc": auc, "accuracy": best_threshold_accuracy(scores, y)}


__all__ = [
    "FACTUAL",
    "NONFACTUAL",
    "FEATURE_NAMES",
    "LabeledSpan",
    "DetectionFeatureVector",
    "extract_features",
    "pr_auc",
    "best_threshold_accuracy",
    "group_pick_accuracy",
    "score_feature",
]
