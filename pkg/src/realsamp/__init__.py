"""Entropy-decay extrapolation and residual-entropy-driven sampling.

The package fits non-increasing entropy-vs-log-size curves across a family
of language-model sizes, extrapolates each context's asymptotic entropy, and
uses the residual entropy (predicted largest-model entropy minus asymptote)
to adapt truncation-sampling thresholds. It also ships the baseline
samplers, synthetic oracles that make the threshold guarantee and the
extrapolation machine-checkable, generation-diversity and regression
metrics, and unsupervised hallucination-detection features.
"""

from .decay import (
    DecayCurve,
    EntropyProfile,
    FitConfig,
    ModelFamilySpec,
    asymptote,
    eval_curve,
    fit_curve,
    residual_entropy,
    smooth_profiles,
)
from .dist import (
    ThresholdDecision,
    TokenDistribution,
    apply_temperature,
    entropy,
    normalize,
    sample,
    truncate_top_k,
    truncate_top_p,
)
from .sampler import DecodeState, SamplerConfig, decode_step, real_threshold

__version__ = "0.1.0"

__all__ = [
    "DecayCurve",
    "EntropyProfile",
    "FitConfig",
    "ModelFamilySpec",
    "asymptote",
    "eval_curve",
    "fit_curve",
    "residual_entropy",
    "smooth_profiles",
    "ThresholdDecision",
    "TokenDistribution",
    "apply_temperature",
    "entropy",
    "normalize",
    "sample",
    "truncate_top_k",
    "truncate_top_p",
    "DecodeState",
    "SamplerConfig",
    "decode_step",
    "real_threshold",
    "__version__",
]
