"""Truncation samplers and their compositions.

Implements the fixed-threshold baselines (top-p, top-k, temperature, eta,
typical), the sentence-position heuristic (factual), plain contrastive
decoding, and the residual-entropy-adaptive variants: the base adaptive
nucleus sampler plus its compositions with contrastive decoding, top-k, and
the factual heuristic. The adaptive threshold is

    t = exp(-d_re / T)

where ``d_re`` is the residual entropy predicted by a decay curve at the
largest family size and ``T`` trades factuality against diversity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import dist as d
from .decay import DecayCurve, ModelFamilySpec, residual_entropy
from .dist import DecisionTrace, ThresholdDecision, TokenDistribution
from .errors import ConfigurationError, ParameterError, ShapeError

METHODS = (
    "top_p",
    "top_k",
    "temperature",
    "eta",
    "typical",
    "factual",
    "real",
    "real_cd",
    "real_top_k",
    "real_f",
    "cd",
)

_NEEDS_CURVE = {"real", "real_cd", "real_top_k", "real_f"}
_NEEDS_AMATEUR = {"real_cd", "cd"}


@dataclass(frozen=True)
class SamplerConfig:
    """Method selector plus hyperparameters; only fields used by the chosen
    method matter. tau is the softmax temperature applied to expert logits
    before any truncation and is independent of the adaptive T."""

    method: str
    t_p: float = 0.9
    t_k: float = 40.0
    T: float = 1.0
    tau: float = 1.0
    eta: float = 0.0009
    typical_mass: float = 0.95
    cd_alpha: float = 0.3
    f_lambda: float = 0.9
    f_upper: float = 0.9
    f_lower: float = 0.3

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown sampling method {self.method!r}")
        if not 0.0 <= self.t_p <= 1.0:
            raise ParameterError("t_p must be in [0, 1]")
        if self.t_k < 1:
            raise ParameterError("t_k must be >= 1")
        if not self.T > 0:
            raise ParameterError("T must be > 0")
        if not self.tau > 0:
            raise ParameterError("tau must be > 0")
        if not 0.0 < self.eta < 1.0:
            raise ParameterError("eta must be in (0, 1)")
        if not 0.0 < self.typical_mass <= 1.0:
            raise ParameterError("typical_mass must be in (0, 1]")
        if not 0.0 <= self.cd_alpha <= 1.0:
            raise ParameterError("cd_alpha must be in [0, 1]")
        if not 0.0 < self.f_lambda < 1.0:
            raise ParameterError("f_lambda must be in (0, 1)")


@dataclass
class DecodeState:
    """Per-session mutable state: the sentence-position counter for the
    factual heuristic and the session's random generator.

    ``tokens_since_period`` is 1 for the first token after a sentence
    terminal. ``sentence_terminals`` must be supplied by the caller for the
    factual methods; with the default empty set the counter never resets.
    """

    rng: np.random.Generator
    tokens_since_period: int = 1
    sentence_terminals: frozenset[int] = frozenset()

    def advanced(self, token: int) -> "DecodeState":
        count = 1 if token in self.sentence_terminals else self.tokens_since_period + 1
        return DecodeState(
            rng=self.rng,
            tokens_since_period=count,
            sentence_terminals=self.sentence_terminals,
        )


# ---------------------------------------------------------------------------
# Threshold formulas


def real_threshold(d_re: float, T: float) -> float:
    """exp(-d_re / T): 1 exactly when the residual entropy vanishes,
    decaying toward 0 as the hazard grows."""
    if d_re < 0:
        raise ParameterError("residual entropy must be >= 0")
    if not T > 0:
        raise ParameterError("T must be > 0")
    return math.exp(-d_re / T)


def factual_threshold(
    state: DecodeState,
    f_upper: float = 0.9,
    f_lambda: float = 0.9,
    f_lower: float = 0.3,
) -> float:
    """Nucleus threshold decaying with distance x from the last sentence
    terminal: max(f_lower, f_upper * f_lambda**(x-1))."""
    x = state.tokens_since_period
    return max(f_lower, f_upper * f_lambda ** (x - 1))


def real_f_threshold(
    state: DecodeState,
    d_re: float,
    T: float,
    f_lambda: float = 0.9,
    f_lower: float = 0.3,
) -> float:
    """Sentence-position decay combined with the adaptive threshold:
    max(f_lower, f_lambda**(x-1)) * exp(-d_re / T).

    Note the position factor starts at 1 (no leading f_upper multiplier),
    so the combination reduces to the plain adaptive threshold at x=1.
    """
    x = state.tokens_since_period
    return max(f_lower, f_lambda ** (x - 1)) * real_threshold(d_re, T)


def real_top_k_threshold(t_k: float, d_re: float) -> float:
    """Adaptive top-k budget t_k * exp(-d_re); no temperature knob here.
    The result may be fractional; truncate_top_k rounds half-up, floor 1."""
    if d_re < 0:
        raise ParameterError("residual entropy must be >= 0")
    return t_k * math.exp(-d_re)


# ---------------------------------------------------------------------------
# Baseline truncations not derived from cumulative mass


def eta_truncate(dist: TokenDistribution, eta: float) -> ThresholdDecision:
    """Keep tokens with p >= min(eta, sqrt(eta) * exp(-entropy)), at least
    the argmax, then renormalize."""
    if not 0.0 < eta < 1.0:
        raise ParameterError("eta must be in (0, 1)")
    cutoff = min(eta, math.sqrt(eta) * math.exp(-d.entropy(dist)))
    kept = np.flatnonzero(dist.probs >= cutoff)
    if kept.size == 0:
        kept = np.array([int(np.argmax(dist.probs))])
    trace = DecisionTrace(method="eta", raw_threshold=cutoff)
    return d.decision_from_kept(dist.probs, kept, cutoff, trace)


def typical_truncate(dist: TokenDistribution, typical_mass: float) -> ThresholdDecision:
    """Keep the tokens whose surprisal is closest to the distribution's
    entropy: sort by |−log p − H| ascending (ties: higher probability, then
    lower index) and take the smallest prefix reaching ``typical_mass``."""
    if not 0.0 < typical_mass <= 1.0:
        raise ParameterError("typical_mass must be in (0, 1]")
    p = dist.probs
    h = d.entropy(dist)
    with np.errstate(divide="ignore"):
        scores = np.abs(-np.log(p) - h)  # zero-prob tokens score +inf
    # lexsort: last key is primary
    order = np.lexsort((np.arange(p.size), -p, scores))
    cum = np.cumsum(p[order])
    j = int(np.searchsorted(cum, typical_mass - d.SUM_TOL, side="left")) + 1
    j = min(max(j, 1), p.size)
    trace = DecisionTrace(method="typical", raw_threshold=typical_mass)
    return d.decision_from_kept(p, order[:j], typical_mass, trace)


# ---------------------------------------------------------------------------
# Contrastive decoding


def cd_plausibility_set(expert_dist: TokenDistribution, alpha: float) -> np.ndarray:
    """Indices with p >= alpha * max(p) (restricted to the support).
    Never empty: the argmax always qualifies."""
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError("alpha must be in [0, 1]")
    p = expert_dist.probs
    cutoff = alpha * p.max()
    return np.flatnonzero((p >= cutoff) & (p > 0))


def contrastive_adjust(
    expert_logits, amateur_logits, kept: np.ndarray
) -> TokenDistribution:
    """softmax of (expert - amateur) logits over the kept set; tokens
    outside it get probability 0."""
    expert = d.as_logits(expert_logits)
    amateur = d.as_logits(amateur_logits)
    if expert.shape != amateur.shape:
        raise ShapeError("expert and amateur logits must have the same length")
    kept = np.asarray(kept, dtype=np.int64)
    if kept.size == 0:
        raise ShapeError("kept set must be non-empty")
    diff = expert[kept] - amateur[kept]
    diff -= diff.max()
    w = np.exp(diff)
    probs = np.zeros_like(expert)
    probs[kept] = w / w.sum()
    return TokenDistribution(probs)


# ---------------------------------------------------------------------------
# One decoding step


def _threshold_decision(
    config: SamplerConfig,
    expert_dist: TokenDistribution,
    d_re: float,
    state: DecodeState,
) -> ThresholdDecision:
    m = config.method
    if m in ("top_p", "factual", "real", "real_cd", "real_f"):
        if m == "top_p":
            raw = config.t_p
        elif m == "factual":
            raw = factual_threshold(state, config.f_upper, config.f_lambda, config.f_lower)
        elif m == "real_f":
            raw = real_f_threshold(state, d_re, config.T, config.f_lambda, config.f_lower)
        else:
            raw = real_threshold(d_re, config.T)
        trace = DecisionTrace(method=m, raw_threshold=raw, d_re=d_re)
        return d.truncate_top_p(expert_dist, raw, trace)
    if m in ("top_k", "real_top_k"):
        raw = config.t_k if m == "top_k" else real_top_k_threshold(config.t_k, d_re)
        trace = DecisionTrace(method=m, raw_threshold=raw, d_re=d_re)
        return d.truncate_top_k(expert_dist, raw, trace)
    if m == "eta":
        return eta_truncate(expert_dist, config.eta)
    if m == "typical":
        return typical_truncate(expert_dist, config.typical_mass)
    if m == "cd":
        kept = cd_plausibility_set(expert_dist, config.cd_alpha)
        trace = DecisionTrace(method=m, raw_threshold=config.cd_alpha)
        return d.decision_from_kept(expert_dist.probs, kept, config.cd_alpha, trace)
    # temperature: the softmax rescale already happened; keep everything
    trace = DecisionTrace(method=m, raw_threshold=1.0)
    return d.truncate_top_p(expert_dist, 1.0, trace)


def decode_step(
    config: SamplerConfig,
    expert_logits,
    amateur_logits=None,
    curve: DecayCurve | None = None,
    family: ModelFamilySpec | None = None,
    state: DecodeState | None = None,
) -> tuple[int, ThresholdDecision, DecodeState]:
    """Run one decoding step: threshold, truncate, optionally re-score the
    kept set contrastively, sample, and advance the sentence counter.

    The adaptive methods need ``curve`` and ``family`` (for the largest
    size); the contrastive methods need ``amateur_logits``.
    """
    if state is None:
        state = DecodeState(rng=np.random.default_rng())
    m = config.method
    if m in _NEEDS_CURVE and (curve is None or family is None):
        raise ConfigurationError(f"method {m!r} requires a decay curve and a model family")
    if m in _NEEDS_AMATEUR and amateur_logits is None:
        raise ConfigurationError(f"method {m!r} requires amateur logits")

    expert = d.as_logits(expert_logits)
    expert_dist = d.apply_temperature(expert, config.tau)
    d_re = residual_entropy(curve, family.largest) if m in _NEEDS_CURVE else 0.0

    decision = _threshold_decision(config, expert_dist, d_re, state)
    if m in _NEEDS_AMATEUR:
        adjusted = contrastive_adjust(expert, d.as_logits(amateur_logits), decision.kept)
        decision = replace(decision, dist=adjusted)

    token = d.sample(decision.dist, state.rng)
    return token, decision, state.advanced(token)


__all__ = [
    "METHODS",
    "SamplerConfig",
    "DecodeState",
    "real_threshold",
    "factual_threshold",
    "real_f_threshold",
    "real_top_k_threshold",
    "eta_truncate",
    "typical_truncate",
    "cd_plausibility_set",
    "contrastive_adjust",
    "decode_step",
]
