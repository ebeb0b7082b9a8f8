"""Synthetic ground truth for validating the rest of the package.

Two generators live here:

* a model-family simulator whose per-context entropy curve has an
  analytically known asymptote (a uniform/ideal mixture whose uniform share
  shrinks with model size), used to score the extrapolating fitter; and

* separable next-token distributions built from an explicit factual head and
  hallucination tail split at an ideal mass threshold g, for which the
  residual entropy is exact. These make the adaptive-threshold guarantee
  (threshold <= g**(1/T)) machine-checkable by brute force.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .decay import EntropyProfile, ModelFamilySpec
from .dist import TokenDistribution, entropy, normalize
from .errors import ParameterError, SeparabilityError

# Log non-embedding parameter counts of a typical public decoder family
# spanning 70M..6.9B total parameters; used as the default size grid.
DEFAULT_FAMILY_SIZES = (16.755, 18.259, 19.527, 20.507, 20.913, 21.646, 22.586)


def default_family() -> ModelFamilySpec:
    return ModelFamilySpec(np.array(DEFAULT_FAMILY_SIZES))


def uniform_ideal(vocab: int) -> TokenDistribution:
    """Uniform distribution over ``vocab`` tokens (a convenient placeholder
    ideal; generators draw fresh ideals per context)."""
    if vocab < 1:
        raise ParameterError("vocab must be >= 1")
    return TokenDistribution(np.full(vocab, 1.0 / vocab))


@dataclass(frozen=True)
class MixtureFamily:
    """A simulated model family: at log-size s the predicted distribution is
    lambda(s) * Uniform + (1 - lambda(s)) * ideal, with
    lambda(s) = exp(-mix_rate * (s - s_ref)) clamped to [0, 1].

    Smaller models mix in more uniform mass, so entropy decays with size and
    tends to entropy(ideal) — the family's exact asymptote.
    """

    ideal: TokenDistribution
    mix_rate: float
    s_ref: float
    sizes: ModelFamilySpec

    def __post_init__(self):
        if not self.mix_rate > 0:
            raise ParameterError("mix_rate must be > 0")

    def uniform_share(self, s) -> np.ndarray:
        lam = np.exp(-self.mix_rate * (np.asarray(s, dtype=np.float64) - self.s_ref))
        return np.clip(lam, 0.0, 1.0)

    @property
    def true_asymptote(self) -> float:
        return entropy(self.ideal)


def family_entropy(fam: MixtureFamily, s: float) -> float:
    """Exact entropy of the mixture distribution at log-size s."""
    lam = float(fam.uniform_share(s))
    v = fam.ideal.size
    mixed = lam / v + (1.0 - lam) * fam.ideal.probs
    return entropy(TokenDistribution(mixed))


@dataclass(frozen=True)
class OracleContext:
    """One generated context: its (possibly noisy) profile plus the exact
    values the fitter is later scored against."""

    profile: EntropyProfile
    true_asymptote: float
    true_entropies: np.ndarray


def _random_ideal(rng: np.random.Generator, vocab: int, max_support: int | None = None) -> TokenDistribution:
    support = int(rng.integers(1, (max_support or vocab) + 1))
    probs = np.zeros(vocab)
    probs[:support] = rng.dirichlet(np.ones(support))
    return TokenDistribution(probs)


def generate_profiles(
    fam: MixtureFamily,
    contexts: int,
    noise_sd: float = 0.0,
    seed: int = 0,
) -> list[OracleContext]:
    """Simulate ``contexts`` independent contexts over ``fam.sizes``.

    Each context draws a fresh ideal distribution (flat Dirichlet over a
    random support size), measures the exact mixture entropies, and adds
    Gaussian noise floored at 0. Deterministic given ``seed``.
    """
    if contexts < 1:
        raise ParameterError("contexts must be >= 1")
    if noise_sd < 0:
        raise ParameterError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    vocab = fam.ideal.size
    sizes = fam.sizes.sizes
    out = []
    for i in range(contexts):
        ctx_fam = replace(fam, ideal=_random_ideal(rng, vocab))
        true = np.array([family_entropy(ctx_fam, s) for s in sizes])
        noisy = true if noise_sd == 0 else np.maximum(0.0, true + rng.normal(0.0, noise_sd, size=true.shape))
        profile = EntropyProfile(context_id=f"ctx{i:05d}", position=0, entropies=noisy)
        out.append(OracleContext(profile, ctx_fam.true_asymptote, true))
    return out


# ---------------------------------------------------------------------------
# Separable distributions and the threshold bound


@dataclass(frozen=True)
class SeparableCase:
    """A next-token distribution assembled as g * factual + (1-g) * tail,
    with every factual token at least as probable as every tail token, so
    nucleus truncation at mass g recovers the factual head exactly.

    ``d_re_exact`` is the exact residual entropy
    entropy(composite) - entropy(factual)."""

    g: float
    factual: TokenDistribution
    tail: TokenDistribution
    composite: TokenDistribution
    d_re_exact: float


def make_separable_case(g: float, factual: TokenDistribution, tail: TokenDistribution) -> SeparableCase:
    """Build the composite distribution, checking the separability condition
    g * min(factual) >= (1-g) * max(tail)."""
    if not 0.0 < g <= 1.0:
        raise ParameterError("g must be in (0, 1]")
    lhs = g * float(factual.probs.min())
    rhs = (1.0 - g) * float(tail.probs.max())
    if lhs < rhs:
        raise SeparabilityError(
            f"g*min(factual)={lhs:.3g} < (1-g)*max(tail)={rhs:.3g}; resample"
        )
    composite = normalize(np.concatenate([g * factual.probs, (1.0 - g) * tail.probs]))
    d_re = entropy(composite) - entropy(factual)
    return SeparableCase(g, factual, tail, composite, d_re)


def check_theorem_bound(case: SeparableCase, T: float) -> float:
    """Margin g**(1/T) - exp(-d_re_exact / T); guaranteed non-negative when
    the split is separable and the residual entropy is exact."""
    if not T > 0:
        raise ParameterError("T must be > 0")
    return case.g ** (1.0 / T) - np.exp(-case.d_re_exact / T)


def random_separable_case(rng: np.random.Generator) -> SeparableCase:
    """Rejection-sample a separable case: g ~ U(0.3, 0.99), factual head a
    flat Dirichlet over 1-16 tokens, tail over 1-64 tokens."""
    while True:
        g = float(rng.uniform(0.3, 0.99))
        factual = TokenDistribution(rng.dirichlet(np.ones(int(rng.integers(1, 17)))))
        tail = TokenDistribution(rng.dirichlet(np.ones(int(rng.integers(1, 65)))))
        try:
            return make_separable_case(g, factual, tail)
        except SeparabilityError:
            continue


def theorem_sweep(cases: int, temps, seed: int = 0) -> tuple[int, float]:
    """Run ``cases`` random separable cases against every temperature and
    return (violations, worst_margin), counting margins below -1e-9."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    violations = 0
    temps = [float(t) for t in temps]
    for _ in range(cases):
        case = random_separable_case(rng)
        for t in temps:
            margin = check_theorem_bound(case, t)
            worst = min(worst, margin)
            if margin < -1e-9:
                violations += 1
    return violations, float(worst)


__all__ = [
    "DEFAULT_FAMILY_SIZES",
    "default_family",
    "MixtureFamily",
    "OracleContext",
    "family_entropy",
    "generate_profiles",
    "SeparableCase",
    "make_separable_case",
    "check_theorem_bound",
    "random_separable_case",
    "theorem_sweep",
]
