"""Entropy-decay curves over log model size: representation, evaluation,
per-context nonlinear least-squares fitting, and residual entropy.

A decay curve maps the log of a model's (non-embedding) parameter count to a
predicted next-token entropy. Three parameterizations are supported, all
non-increasing in size with non-negative parameters and sharing the same
floor ``z`` (the asymptote, i.e. the entropy attributed to an arbitrarily
large model):

  fractional_polynomial:  z + b * (a_half / x^0.5 + sum_k a_k / x^k)
                          with x = max(1, q * (s - g))
  exponential:            z + b * exp(-max(0, q * (s - g)))
  logistic:               z + b / (1 + exp(max(0, q * (s - g))))

The residual entropy of a curve at the largest family size is the predicted
excess of that model's entropy over the asymptote; it is the per-token
hallucination-hazard score consumed by the samplers.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from .errors import DataError, ParameterError, ShapeError

KINDS = ("fractional_polynomial", "exponential", "logistic")

# Unconstrained search runs in u-space with parameter = exp(u); these bound
# exp(u) away from overflow while keeping 0 reachable in the limit.
_U_MIN = -30.0
DEFAULT_PARAMETER_BOUND = 1e4


@dataclass(frozen=True)
class ModelFamilySpec:
    """Ordered log-scale sizes of a model family (natural log of the
    non-embedding parameter count). At least 3 sizes, strictly increasing."""

    sizes: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.float64)
        object.__setattr__(self, "sizes", sizes)
        if sizes.ndim != 1 or sizes.size < 3:
            raise ShapeError("a model family needs at least 3 sizes")
        if not np.all(np.isfinite(sizes)):
            raise DataError("family sizes must be finite")
        if np.any(np.diff(sizes) <= 0):
            raise DataError("family sizes must be strictly increasing")
        if self.labels is not None:
            labels = tuple(self.labels)
            object.__setattr__(self, "labels", labels)
            if len(labels) != sizes.size:
                raise ShapeError("labels length must match sizes length")

    @property
    def count(self) -> int:
        return int(self.sizes.size)

    @property
    def largest(self) -> float:
        return float(self.sizes[-1])


@dataclass(frozen=True)
class EntropyProfile:
    """Measured per-size entropies (and optional realized-token surprisals)
    for one context position, aligned to a ModelFamilySpec."""

    context_id: str
    position: int
    entropies: np.ndarray
    surprisals: np.ndarray | None = None

    def __post_init__(self):
        ent = np.asarray(self.entropies, dtype=np.float64)
        object.__setattr__(self, "entropies", ent)
        if ent.ndim != 1 or ent.size == 0:
            raise ShapeError("entropies must be a non-empty 1-D vector")
        if not np.all(np.isfinite(ent)) or np.any(ent < 0):
            raise DataError(
                f"entropies for {self.context_id!r}@{self.position} must be finite and >= 0"
            )
        if self.surprisals is not None:
            sup = np.asarray(self.surprisals, dtype=np.float64)
            object.__setattr__(self, "surprisals", sup)
            if sup.shape != ent.shape:
                raise ShapeError("surprisals must align with entropies")
            if not np.all(np.isfinite(sup)) or np.any(sup < 0):
                raise DataError(
                    f"surprisals for {self.context_id!r}@{self.position} must be finite and >= 0"
                )


@dataclass(frozen=True)
class DecayCurve:
    """Parameter set of one non-increasing entropy-vs-log-size curve.

    All parameters are non-negative; that alone guarantees eval_curve is
    non-increasing in s and bounded below by ``z``. ``a_half``/``a`` are only
    meaningful for the fractional_polynomial kind and stay empty otherwise.
    """

    kind: str
    z: float
    b: float
    q: float
    g: float
    a_half: float = 0.0
    a: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown curve kind {self.kind!r}")
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        params = (self.z, self.b, self.q, self.g, self.a_half, *self.a)
        if not all(np.isfinite(params)):
            raise DataError("curve parameters must be finite")
        if any(p < 0 for p in params):
            raise ParameterError("curve parameters must be non-negative")
        if self.kind != "fractional_polynomial" and self.a:
            raise ParameterError(f"{self.kind} curves take no polynomial terms")

    @property
    def K(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the multi-start least-squares fit."""

    max_iterations: int = 500
    loss_tolerance: float = 1e-8
    num_restarts: int = 8
    rng_seed: int = 0
    parameter_bound: float = DEFAULT_PARAMETER_BOUND

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ParameterError("max_iterations must be >= 1")
        if not self.loss_tolerance > 0:
            raise ParameterError("loss_tolerance must be > 0")
        if self.num_restarts < 1:
            raise ParameterError("num_restarts must be >= 1")
        if not self.parameter_bound > 0:
            raise ParameterError("parameter_bound must be > 0")


def eval_curve(curve: DecayCurve, s) -> float | np.ndarray:
    """Predicted entropy at log-size ``s`` (scalar or array).

    Powers of the normalized size are accumulated by repeated multiplication:
    every elementary operation involved is monotone under IEEE rounding, so
    eval_curve(s1) >= eval_curve(s2) >= z holds exactly in floating point
    for s1 <= s2, not just up to rounding error.
    """
    s_arr = np.asarray(s, dtype=np.float64)
    shifted = curve.q * (s_arr - curve.g)
    if curve.kind == "fractional_polynomial":
        x = np.maximum(1.0, shifted)
        t = 1.0 / x
        acc = curve.a_half * np.sqrt(t)
        t_pow = np.ones_like(t)
        for a_k in curve.a:
            t_pow = t_pow * t
            acc = acc + a_k * t_pow
        value = curve.z + curve.b * acc
    elif curve.kind == "exponential":
        value = curve.z + curve.b * np.exp(-np.maximum(0.0, shifted))
    else:  # logistic; cap the exponent so huge q*g products stay finite
        m = np.minimum(np.maximum(0.0, shifted), 700.0)
        value = curve.z + curve.b / (1.0 + np.exp(m))
    return float(value) if np.isscalar(s) or s_arr.ndim == 0 else value


def asymptote(curve: DecayCurve) -> float:
    """The curve's floor ``z``: the entropy attributed to an arbitrarily
    large model."""
    return float(curve.z)


def residual_entropy(curve: DecayCurve, s_n: float) -> float:
    """Predicted entropy excess over the asymptote at log-size ``s_n``.

    Non-negative for every valid curve; this is the hallucination-hazard
    score driving the adaptive samplers.
    """
    return float(eval_curve(curve, s_n)) - asymptote(curve)


# ---------------------------------------------------------------------------
# Fitting


def _param_names(kind: str, K: int) -> list[str]:
    if kind == "fractional_polynomial":
        return ["z", "b", "q", "g", "a_half"] + [f"a_{k}" for k in range(1, K + 1)]
    return ["z", "b", "q", "g"]


def _curve_from_params(kind: str, params: np.ndarray) -> DecayCurve:
    z, b, q, g = (float(v) for v in params[:4])
    if kind == "fractional_polynomial":
        return DecayCurve(kind, z, b, q, g, a_half=float(params[4]), a=tuple(params[5:]))
    return DecayCurve(kind, z, b, q, g)


def _model_jacobian(kind: str, params: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """d eval / d params at each size, with the clamped branch treated as
    having zero slope (subgradient at the kink)."""
    n = sizes.size
    jac = np.zeros((n, params.size))
    z, b, q, g = params[:4]
    shifted = q * (sizes - g)
    jac[:, 0] = 1.0  # z
    if kind == "fractional_polynomial":
        a_half, a = params[4], params[5:]
        active = shifted > 1.0
        x = np.maximum(1.0, shifted)
        t = 1.0 / x
        # value and x-derivative of the polynomial part
        poly = a_half * np.sqrt(t)
        dpoly_dx = -0.5 * a_half * t ** 1.5
        t_pow = t.copy()
        jac[:, 4] = b * np.sqrt(t)  # a_half
        for k, a_k in enumerate(a, start=1):
            jac[:, 4 + k] = b * t_pow  # a_k
            poly += a_k * t_pow
            dpoly_dx += -k * a_k * t_pow * t
            t_pow = t_pow * t
        jac[:, 1] = poly  # b
        jac[:, 2] = np.where(active, b * dpoly_dx * (sizes - g), 0.0)  # q
        jac[:, 3] = np.where(active, b * dpoly_dx * (-q), 0.0)  # g
    elif kind == "exponential":
        active = shifted > 0.0
        decay = np.exp(-np.maximum(0.0, shifted))
        jac[:, 1] = decay
        jac[:, 2] = np.where(active, -b * decay * (sizes - g), 0.0)
        jac[:, 3] = np.where(active, -b * decay * (-q), 0.0)
    else:  # logistic
        active = shifted > 0.0
        m = np.minimum(np.maximum(0.0, shifted), 700.0)
        sig = 1.0 / (1.0 + np.exp(m))
        dm = -b * sig * (1.0 - sig)  # == -b * exp(m) / (1 + exp(m))^2, overflow-free
        jac[:, 1] = sig
        jac[:, 2] = np.where(active, dm * (sizes - g), 0.0)
        jac[:, 3] = np.where(active, dm * (-q), 0.0)
    return jac


def rms_loss(curve: DecayCurve, sizes: np.ndarray, entropies: np.ndarray) -> float:
    """Root-mean-square misfit between a curve and measured entropies."""
    r = entropies - eval_curve(curve, sizes)
    return float(np.sqrt(np.mean(r * r)))


def batch_loss(
    profiles: list[EntropyProfile],
    curves: list[DecayCurve],
    family: ModelFamilySpec,
) -> float:
    """RMS misfit pooled over all (profile, size) points of a batch."""
    if len(profiles) != len(curves):
        raise ShapeError("profiles and curves must pair up")
    sq = 0.0
    n = 0
    for profile, curve in zip(profiles, curves):
        r = profile.entropies - eval_curve(curve, family.sizes)
        sq += float((r * r).sum())
        n += r.size
    return float(np.sqrt(sq / n))


def profile_rng_seed(rng_seed: int, context_id: str, position: int) -> np.random.SeedSequence:
    """Seed material for one profile's fit, stable across runs and
    independent of fit execution order (so threaded and serial runs agree)."""
    return np.random.SeedSequence(
        [rng_seed & 0xFFFFFFFF, zlib.crc32(context_id.encode("utf-8")), position & 0xFFFFFFFF]
    )


def _initial_points(
    kind: str,
    K: int,
    entropies: np.ndarray,
    rng: np.random.Generator,
    n_points: int,
) -> np.ndarray:
    """Random starting parameter vectors (in value space)."""
    n_params = len(_param_names(kind, K))
    e_min = float(entropies.min())
    e_range = float(entropies.max() - entropies.min())
    points = np.empty((n_points, n_params))
    points[:, 0] = rng.uniform(0.0, max(e_min, 1e-6), size=n_points)
    points[:, 1] = rng.uniform(0.0, max(e_range, 1e-6), size=n_points)
    # q, g and the polynomial coefficients: log-uniform over [0.01, 10]
    points[:, 2:] = np.exp(rng.uniform(np.log(0.01), np.log(10.0), size=(n_points, n_params - 2)))
    return points


def fit_curve(
    profile: EntropyProfile,
    family: ModelFamilySpec,
    kind: str = "fractional_polynomial",
    K: int = 10,
    config: FitConfig = FitConfig(),
) -> tuple[DecayCurve, float]:
    """Fit a decay curve to one profile by multi-start bounded least squares.

    Minimizes the RMS misfit over all non-negative parameter choices and
    returns the best (curve, loss) across ``config.num_restarts`` random
    restarts plus a flat-curve baseline. Deterministic given
    ``config.rng_seed`` (each profile derives its own generator from the
    seed, its context_id, and its position).
    """
    if kind not in KINDS:
        raise ParameterError(f"unknown curve kind {kind!r}")
    if kind == "fractional_polynomial" and K < 1:
        raise ParameterError("fractional polynomials need K >= 1")
    if profile.entropies.size != family.count:
        raise ShapeError(
            f"profile {profile.context_id!r}@{profile.position} has "
            f"{profile.entropies.size} entropies for a family of {family.count}"
        )

    sizes = family.sizes
    entropies = profile.entropies
    rng = np.random.default_rng(profile_rng_seed(config.rng_seed, profile.context_id, profile.position))
    u_max = np.log(config.parameter_bound)

    def residuals(u: np.ndarray) -> np.ndarray:
        return entropies - eval_curve(_curve_from_params(kind, np.exp(u)), sizes)

    def jacobian(u: np.ndarray) -> np.ndarray:
        # residual = e - eval(exp(u)), so d residual / d u = -d eval/d p * p
        p = np.exp(u)
        return -_model_jacobian(kind, p, sizes) * p[np.newaxis, :]

    # Flat baseline: the best constant curve. Always a valid candidate and
    # the exact optimum whenever the profile carries no decay signal.
    flat = _curve_from_params(kind, np.zeros(len(_param_names(kind, K))))
    flat = replace(flat, z=float(entropies.mean()))
    best_curve, best_loss = flat, rms_loss(flat, sizes, entropies)

    for point in _initial_points(kind, K, entropies, rng, config.num_restarts):
        u0 = np.log(np.clip(point, 1e-12, config.parameter_bound))
        result = least_squares(
            residuals,
            np.clip(u0, _U_MIN, u_max),
            jac=jacobian,
            bounds=(_U_MIN, u_max),
            method="trf",
            max_nfev=config.max_iterations,
            ftol=config.loss_tolerance,
            xtol=1e-10,
            gtol=1e-10,
        )
        candidate = _curve_from_params(kind, np.exp(result.x))
        loss = rms_loss(candidate, sizes, entropies)
        if loss < best_loss:
            best_curve, best_loss = candidate, loss

    return best_curve, best_loss


def smooth_profiles(profiles: list[EntropyProfile], window: int = 1) -> list[EntropyProfile]:
    """Replace each profile's entropies by a centered moving average over
    neighboring positions of the same context. Edge positions use the
    available truncated window; window=1 is the identity. Surprisals are
    left untouched.
    """
    if window < 1 or window % 2 == 0:
        raise ParameterError("smoothing window must be a positive odd integer")
    if window == 1:
        return list(profiles)

    by_context: dict[str, list[int]] = {}
    for i, p in enumerate(profiles):
        by_context.setdefault(p.context_id, []).append(i)

    half = window // 2
    out: list[EntropyProfile | None] = [None] * len(profiles)
    for indices in by_context.values():
        indices.sort(key=lambda i: profiles[i].position)
        stack = np.stack([profiles[i].entropies for i in indices])
        for j, i in enumerate(indices):
            lo, hi = max(0, j - half), min(len(indices), j + half + 1)
            out[i] = replace(profiles[i], entropies=stack[lo:hi].mean(axis=0))
    return out  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# Serialization: one JSON object per fitted curve.


def curve_record(
    curve: DecayCurve, context_id: str, position: int, loss: float
) -> dict:
    return {
        "context_id": context_id,
        "position": position,
        "kind": curve.kind,
        "K": curve.K,
        "z": curve.z,
        "b": curve.b,
        "q": curve.q,
        "g": curve.g,
        "a_half": curve.a_half,
        "a": list(curve.a),
        "loss": loss,
    }


def curve_from_record(record: dict) -> tuple[DecayCurve, str, int, float]:
    try:
        curve = DecayCurve(
            kind=record["kind"],
            z=record["z"],
            b=record["b"],
            q=record["q"],
            g=record["g"],
            a_half=record.get("a_half", 0.0),
            a=tuple(record.get("a", ())),
        )
        return curve, str(record["context_id"]), int(record["position"]), float(record["loss"])
    except KeyError as exc:
        raise DataError(f"curve record is missing field {exc}") from None


__all__ = [
    "KINDS",
    "ModelFamilySpec",
    "EntropyProfile",
    "DecayCurve",
    "FitConfig",
    "eval_curve",
    "asymptote",
    "residual_entropy",
    "rms_loss",
    "batch_loss",
    "fit_curve",
    "smooth_profiles",
    "profile_rng_seed",
    "curve_record",
    "curve_from_record",
]
