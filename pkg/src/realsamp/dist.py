"""Probability-distribution primitives: normalization, entropy, truncation,
temperature, and sampling.

All entropies are in nats. Every operation here is a pure function; the only
mutable object in the module's API is the random generator passed to
:func:`sample`, which is owned by exactly one caller at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, InvalidDistributionError, ParameterError, ShapeError

# Tolerance for "sums to 1"; also reused when comparing cumulative masses
# against a truncation threshold so that exact-boundary tokens are kept.
SUM_TOL = 1e-9


@dataclass(frozen=True)
class TokenDistribution:
    """A normalized probability vector over a vocabulary of size V.

    Token identities are implicit indices 0..V-1. Entries must be
    non-negative and sum to 1 within ``SUM_TOL``.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.size == 0:
            raise InvalidDistributionError("probs must be a non-empty 1-D vector")
        if not np.all(np.isfinite(probs)):
            raise InvalidDistributionError("probs contains non-finite entries")
        if np.any(probs < 0):
            raise InvalidDistributionError("probs contains negative entries")
        total = float(probs.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidDistributionError(f"probs sum to {total!r}, not 1")

    @property
    def size(self) -> int:
        return int(self.probs.size)


@dataclass(frozen=True)
class DecisionTrace:
    """Bookkeeping attached to a truncation decision."""

    method: str
    raw_threshold: float
    d_re: float = 0.0


@dataclass(frozen=True)
class ThresholdDecision:
    """Outcome of one truncation step.

    ``dist`` is full-length with zeros outside the kept set, so downstream
    re-scoring (e.g. contrastive adjustment) can keep working with plain
    token indices. ``kept`` holds the kept indices in ascending order.
    """

    effective_threshold: float
    kept: np.ndarray
    dist: TokenDistribution
    trace: DecisionTrace

    @property
    def kept_count(self) -> int:
        return int(self.kept.size)


def normalize(weights) -> TokenDistribution:
    """Scale a vector of non-negative weights into a TokenDistribution.

    Raises InvalidDistributionError if the weights are all zero, negative,
    or non-finite.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidDistributionError("weights must be a non-empty 1-D vector")
    if not np.all(np.isfinite(w)):
        raise InvalidDistributionError("weights contain non-finite entries")
    if np.any(w < 0):
        raise InvalidDistributionError("weights contain negative entries")
    total = w.sum()
    if total <= 0:
        raise InvalidDistributionError("weights are all zero")
    return TokenDistribution(w / total)


def entropy(dist: TokenDistribution) -> float:
    """Shannon entropy in nats, with 0*log(0) taken as 0."""
    p = dist.probs
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def as_logits(logits) -> np.ndarray:
    """Validate a logit vector: 1-D, non-empty, all entries finite."""
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ShapeError("logits must be a non-empty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise DataError("logits contain non-finite entries")
    return x


def _sorted_order(probs: np.ndarray) -> np.ndarray:
    # Descending probability, ties broken by ascending token index
    # (stable sort on the negated vector).
    return np.argsort(-probs, kind="stable")


def decision_from_kept(
    probs: np.ndarray,
    kept: np.ndarray,
    effective_threshold: float,
    trace: DecisionTrace,
) -> ThresholdDecision:
    kept = np.sort(kept)
    out = np.zeros_like(probs)
    out[kept] = probs[kept]
    return ThresholdDecision(
        effective_threshold=effective_threshold,
        kept=kept,
        dist=normalize(out),
        trace=trace,
    )


def truncate_top_p(
    dist: TokenDistribution,
    threshold: float,
    trace: DecisionTrace | None = None,
) -> ThresholdDecision:
    """Nucleus truncation: keep the largest prefix (by descending probability)
    whose cumulative mass stays within ``threshold``, but never fewer than the
    single most probable token. The kept set is renormalized.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ParameterError(f"top-p threshold must be in [0, 1], got {threshold!r}")
    order = _sorted_order(dist.probs)
    cum = np.cumsum(dist.probs[order])
    j = int(np.searchsorted(cum, threshold + SUM_TOL, side="right"))
    j = max(j, 1)
    if trace is None:
        trace = DecisionTrace(method="top_p", raw_threshold=threshold)
    return decision_from_kept(dist.probs, order[:j], threshold, trace)


def truncate_top_k(
    dist: TokenDistribution,
    k: float,
    trace: DecisionTrace | None = None,
) -> ThresholdDecision:
    """Keep the k most probable tokens (ties broken by lower index) and
    renormalize. Fractional k is rounded half-up with a floor of 1.
    """
    k_eff = max(1, int(np.floor(k + 0.5)))
    k_eff = min(k_eff, dist.size)
    order = _sorted_order(dist.probs)
    if trace is None:
        trace = DecisionTrace(method="top_k", raw_threshold=float(k))
    return decision_from_kept(dist.probs, order[:k_eff], float(k_eff), trace)


def apply_temperature(logits, tau: float) -> TokenDistribution:
    """softmax(logits / tau). tau=1 is the plain softmax; tau must be > 0."""
    if not tau > 0:
        raise ParameterError(f"temperature must be > 0, got {tau!r}")
    x = as_logits(logits) / tau
    x -= x.max()
    w = np.exp(x)
    return TokenDistribution(w / w.sum())


def sample(dist: TokenDistribution, rng: np.random.Generator, size: int | None = None):
    """Draw token indices from the distribution via inverse CDF.

    Returns an int when ``size`` is None, otherwise an int array. The draw is
    deterministic given the generator state.
    """
    cum = np.cumsum(dist.probs)
    cum[-1] = 1.0
    u = rng.random() if size is None else rng.random(size)
    idx = np.searchsorted(cum, u, side="right")
    return int(idx) if size is None else idx.astype(np.int64)


__all__ = [
    "SUM_TOL",
    "TokenDistribution",
    "DecisionTrace",
    "ThresholdDecision",
    "normalize",
    "entropy",
    "as_logits",
    "decision_from_kept",
    "apply_temperature",
    "truncate_top_p",
    "truncate_top_k",
    "sample",
]
