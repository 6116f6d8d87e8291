"""Reproducible scenario generators for two-class Gaussian-mixture streams.

A stream draws labels Y_t ~ Bernoulli(prevalence_t) and features
X_t | Y_t = y ~ N(mu_y, Sigma_y). Before the changepoint nu the pre-change
spec applies; afterwards either the post-change spec applies immediately
(abrupt) or the prevalence ramps linearly to the post value over a given
number of observations and then holds (gradual).

All sampling uses the counter-based Philox generator. Streams and training
sets are keyed by explicit integer seeds, and replication code derives
per-replication generators as Philox(key=seed + r), so results do not
depend on scheduling or thread count.

Named presets cover the simulation scenarios used by the CLI `reproduce`
tables, plus a univariate prevalence-outbreak analogue whose Bayes-optimal
scorer has AUC about 0.8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .ratio import LabelShiftPriors, binary_label_ratio, label_shift_ratio

_LOG_2PI = float(np.log(2.0 * np.pi))


def philox(seed: int) -> np.random.Generator:
    """The project-wide generator: counter-based, platform-reproducible."""
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass(frozen=True, eq=False)
class GaussianMixtureSpec:
    """Two-component class mixture: prevalence = P(Y = 1)."""

    mu0: np.ndarray
    mu1: np.ndarray
    sigma0: np.ndarray
    sigma1: np.ndarray
    prevalence: float

    def __post_init__(self) -> None:
        mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        mu1 = np.atleast_1d(np.asarray(self.mu1, dtype=float))
        d = mu0.shape[0]
        sigma0 = np.asarray(self.sigma0, dtype=float).reshape(d, d)
        sigma1 = np.asarray(self.sigma1, dtype=float).reshape(d, d)
        if mu1.shape != (d,):
            raise ValueError("class mean dimensions differ")
        if not (0.0 < self.prevalence < 1.0):
            raise ValueError(f"prevalence must lie in (0, 1), got {self.prevalence}")
        try:
            chol0 = np.linalg.cholesky(sigma0)
            chol1 = np.linalg.cholesky(sigma1)
        except np.linalg.LinAlgError:
            raise ValueError("class covariance is not positive definite") from None
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "sigma0", sigma0)
        object.__setattr__(self, "sigma1", sigma1)
        object.__setattr__(self, "_chol0", chol0)
        object.__setattr__(self, "_chol1", chol1)

    @property
    def dim(self) -> int:
        return self.mu0.shape[0]

    def same_conditionals(self, other: "GaussianMixtureSpec") -> bool:
        return (
            np.array_equal(self.mu0, other.mu0)
            and np.array_equal(self.mu1, other.mu1)
            and np.array_equal(self.sigma0, other.sigma0)
            and np.array_equal(self.sigma1, other.sigma1)
        )


@dataclass(frozen=True)
class Abrupt:
    """Prevalence jumps to the post-change value right after nu."""


@dataclass(frozen=True)
class GradualLinear:
    """Prevalence moves linearly to the post value over `length` steps, then holds."""

    length: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError("gradual length must be >= 1")


ABRUPT = Abrupt()


@dataclass(frozen=True, eq=False)
class StreamSpec:
    """Full description of one reproducible stream."""

    pre: GaussianMixtureSpec
    post: GaussianMixtureSpec
    changepoint_nu: int
    length: int
    seed: int
    prevalence_path: "Abrupt | GradualLinear" = ABRUPT

    def __post_init__(self) -> None:
        if self.pre.dim != self.post.dim:
            raise ValueError("pre and post dimensions differ")
        if not (0 <= self.changepoint_nu <= self.length):
            raise ValueError("need 0 <= changepoint_nu <= length")


@dataclass(frozen=True, eq=False)
class StreamSample:
    x: np.ndarray          # (length, d)
    y: np.ndarray          # (length,) in {0, 1}
    post_regime: np.ndarray  # (length,) bool, True from nu+1 on


def prevalence_at(spec: StreamSpec, t: int) -> float:
    """Prevalence in effect at observation t (1-based)."""
    if t <= spec.changepoint_nu:
        return spec.pre.prevalence
    if isinstance(spec.prevalence_path, Abrupt):
        return spec.post.prevalence
    frac = min(t - spec.changepoint_nu, spec.prevalence_path.length)
    frac /= spec.prevalence_path.length
    return spec.pre.prevalence + frac * (spec.post.prevalence - spec.pre.prevalence)


def _fill_features(X: np.ndarray, z: np.ndarray, mask: np.ndarray,
                   mu: np.ndarray, chol: np.ndarray) -> None:
    if np.any(mask):
        X[mask] = mu + z[mask] @ chol.T


def sample_stream(spec: StreamSpec) -> StreamSample:
    """Draw the full stream; deterministic in spec.seed.

    Draw order is fixed: label uniforms for every t first, then one matrix
    of standard normals mapped through the class Cholesky factors.
    """
    rng = philox(spec.seed)
    n, d = spec.length, spec.pre.dim
    t = np.arange(1, n + 1)
    post = t > spec.changepoint_nu
    prev = np.fromiter((prevalence_at(spec, int(ti)) for ti in t), dtype=float, count=n)
    y = (rng.random(n) < prev).astype(int)
    z = rng.standard_normal((n, d))
    X = np.empty((n, d))
    for is_post, mix in ((False, spec.pre), (True, spec.post)):
        seg = post if is_post else ~post
        _fill_features(X, z, seg & (y == 0), mix.mu0, mix._chol0)
        _fill_features(X, z, seg & (y == 1), mix.mu1, mix._chol1)
    return StreamSample(x=X, y=y, post_regime=post)


def sample_iid(spec: GaussianMixtureSpec, n: int,
               rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """n iid labeled draws from one mixture spec using the supplied generator."""
    y = (rng.random(n) < spec.prevalence).astype(int)
    z = rng.standard_normal((n, spec.dim))
    X = np.empty((n, spec.dim))
    _fill_features(X, z, y == 0, spec.mu0, spec._chol0)
    _fill_features(X, z, y == 1, spec.mu1, spec._chol1)
    return X, y


def sample_training_set(spec: GaussianMixtureSpec, m: int,
                        seed: int) -> tuple[np.ndarray, np.ndarray]:
    """m iid labeled draws, deterministic in seed."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return sample_iid(spec, m, philox(seed))


def _mvn_logpdf(X: np.ndarray, mu: np.ndarray, chol: np.ndarray) -> np.ndarray:
    from scipy.linalg import solve_triangular

    diff = np.atleast_2d(X) - mu
    z = solve_triangular(chol, diff.T, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    return -0.5 * (mu.shape[0] * _LOG_2PI + logdet + np.sum(z * z, axis=0))


def class_logdensities(spec: GaussianMixtureSpec, X) -> tuple[np.ndarray, np.ndarray]:
    """Log class-conditional densities (l0, l1) at the rows of X."""
    arr = np.atleast_2d(np.asarray(X, dtype=float))
    return (_mvn_logpdf(arr, spec.mu0, spec._chol0),
            _mvn_logpdf(arr, spec.mu1, spec._chol1))


def posterior_score(x, spec: GaussianMixtureSpec):
    """Exact P(Y=1 | X=x) under the mixture spec (the Bayes-optimal scorer)."""
    l0, l1 = class_logdensities(spec, x)
    prior = math.log(spec.prevalence / (1.0 - spec.prevalence))
    score = expit(prior + l1 - l0)
    return float(score[0]) if np.ndim(x) <= 1 else score


def _mixture_logdensity(spec: GaussianMixtureSpec, X) -> np.ndarray:
    l0, l1 = class_logdensities(spec, X)
    a = np.maximum(l0, l1)
    return a + np.log(spec.prevalence * np.exp(l1 - a)
                      + (1.0 - spec.prevalence) * np.exp(l0 - a))


def true_mixture_lr(x, pre: GaussianMixtureSpec, post: GaussianMixtureSpec):
    """Exact post/pre marginal density ratio for arbitrary mixture pairs."""
    out = np.exp(_mixture_logdensity(post, x) - _mixture_logdensity(pre, x))
    return float(out[0]) if np.ndim(x) <= 1 else out


def true_scenario1_lr(x, pre: GaussianMixtureSpec, post: GaussianMixtureSpec):
    """Exact density ratio in the prevalence-shift case (shared conditionals).

    Raises if pre and post class conditionals differ, since the reduction
    to a prevalence-only ratio is invalid there.
    """
    if not pre.same_conditionals(post):
        raise ValueError("pre and post class conditionals differ; "
                         "use true_mixture_lr for general changes")
    l0, l1 = class_logdensities(pre, x)
    a = np.maximum(l0, l1)
    e1, e0 = np.exp(l1 - a), np.exp(l0 - a)
    num = post.prevalence * e1 + (1.0 - post.prevalence) * e0
    den = pre.prevalence * e1 + (1.0 - pre.prevalence) * e0
    out = num / den
    return float(out[0]) if np.ndim(x) <= 1 else out


# ---------------------------------------------------------------------------
# samplers for the operating-characteristics engine: (rng, n, regime) -> array


def _pick(pre, post, regime: str):
    if regime == "pre":
        return pre
    if regime == "post":
        return post
    raise ValueError(f"regime must be 'pre' or 'post', got {regime!r}")


def feature_sampler(pre: GaussianMixtureSpec, post: GaussianMixtureSpec):
    """Sampler of raw feature rows under the requested regime."""

    def draw(rng: np.random.Generator, n: int, regime: str) -> np.ndarray:
        return sample_iid(_pick(pre, post, regime), n, rng)[0]

    return draw


def score_stream_sampler(pre: GaussianMixtureSpec, post: GaussianMixtureSpec,
                         score_fn: Callable[[np.ndarray], np.ndarray]):
    """Sampler of classifier scores: score_fn maps an (n, d) batch to scores."""
    feats = feature_sampler(pre, post)

    def draw(rng: np.random.Generator, n: int, regime: str) -> np.ndarray:
        return np.asarray(score_fn(feats(rng, n, regime)), dtype=float)

    return draw


def lr_stream_sampler(pre: GaussianMixtureSpec, post: GaussianMixtureSpec,
                      score_fn: Callable[[np.ndarray], np.ndarray],
                      priors: LabelShiftPriors):
    """Sampler of plug-in likelihood ratios from classifier scores."""
    scores = score_stream_sampler(pre, post, score_fn)

    def draw(rng: np.random.Generator, n: int, regime: str) -> np.ndarray:
        return label_shift_ratio(scores(rng, n, regime), priors)

    return draw


def binary_lr_stream_sampler(pre: GaussianMixtureSpec, post: GaussianMixtureSpec,
                             score_fn: Callable[[np.ndarray], np.ndarray],
                             threshold: float, priors: LabelShiftPriors):
    """Sampler of likelihood ratios from thresholded (binarized) scores."""
    scores = score_stream_sampler(pre, post, score_fn)

    def draw(rng: np.random.Generator, n: int, regime: str) -> np.ndarray:
        labels = scores(rng, n, regime) >= threshold
        return binary_label_ratio(labels.astype(int), priors)

    return draw


def label_lr_stream_sampler(pre: GaussianMixtureSpec, post: GaussianMixtureSpec,
                            priors: LabelShiftPriors):
    """Sampler of likelihood ratios from the true labels (oracle observer)."""

    def draw(rng: np.random.Generator, n: int, regime: str) -> np.ndarray:
        _, y = sample_iid(_pick(pre, post, regime), n, rng)
        return binary_label_ratio(y, priors)

    return draw


def optimal_lr_stream_sampler(pre: GaussianMixtureSpec, post: GaussianMixtureSpec):
    """Sampler of exact marginal density ratios (the optimal detector's input)."""
    feats = feature_sampler(pre, post)

    def draw(rng: np.random.Generator, n: int, regime: str) -> np.ndarray:
        return true_mixture_lr(feats(rng, n, regime), pre, post)

    return draw


# ---------------------------------------------------------------------------
# named presets


@dataclass(frozen=True, eq=False)
class ScenarioPreset:
    name: str
    pre: GaussianMixtureSpec
    post: GaussianMixtureSpec
    train_m: int
    description: str
    gradual_length: Optional[int] = None

    @property
    def priors(self) -> LabelShiftPriors:
        return LabelShiftPriors(pi_inf=self.pre.prevalence,
                                pi_0=self.post.prevalence)


_SIGMA1 = {
    "s1a": np.eye(2),
    "s1b": np.array([[2.0, 0.1], [0.1, 2.0]]),
    "s1c": np.array([[4.0, 0.5], [0.5, 4.0]]),
}

_SCENARIO2_MEANS = {
    "p1": (np.array([0.5, 0.5]), np.array([1.0, 1.0])),
    "p2": (np.array([0.75, 0.75]), np.array([0.75, 0.75])),
    "p3": (np.array([1.0, 1.0]), np.array([0.5, 0.5])),
}


def _build_presets() -> dict[str, ScenarioPreset]:
    presets: dict[str, ScenarioPreset] = {}
    eye = np.eye(2)
    mu0 = np.zeros(2)
    mu1 = np.array([1.5, 1.5])

    for key, sig1 in _SIGMA1.items():
        pre = GaussianMixtureSpec(mu0=mu0, mu1=mu1, sigma0=eye, sigma1=sig1,
                                  prevalence=0.4)
        post = GaussianMixtureSpec(mu0=mu0, mu1=mu1, sigma0=eye, sigma1=sig1,
                                   prevalence=0.7)
        for m in (200, 1000, 5000):
            name = f"scenario1-{key}-m{m}"
            presets[name] = ScenarioPreset(
                name=name, pre=pre, post=post, train_m=m,
                description=f"prevalence 0.4 -> 0.7, class-1 covariance {key}, m={m}",
            )
        presets[f"scenario1-{key}"] = ScenarioPreset(
            name=f"scenario1-{key}", pre=pre, post=post, train_m=1000,
            description=f"prevalence 0.4 -> 0.7, class-1 covariance {key}",
        )
        for pkey, (post_mu0, post_mu1) in _SCENARIO2_MEANS.items():
            post2 = GaussianMixtureSpec(mu0=post_mu0, mu1=post_mu1, sigma0=eye,
                                        sigma1=sig1, prevalence=0.7)
            name = f"scenario2-{pkey}-{key}"
            presets[name] = ScenarioPreset(
                name=name, pre=pre, post=post2, train_m=1000,
                description=(f"prevalence shift plus class-mean drift {pkey}, "
                             f"class-1 covariance {key}"),
            )

    # Univariate outbreak analogue. Class separation 1.19 makes the
    # Bayes-optimal scorer's AUC approximately Phi(1.19/sqrt(2)) ~ 0.80.
    sep = 1.19
    one = np.eye(1)
    for name, pi_inf, gradual in (
        ("dengue-abrupt", 0.30, None),
        ("dengue-gradual", 0.30, 100),
        ("dengue-youden33", 0.33, None),
    ):
        pre = GaussianMixtureSpec(mu0=np.zeros(1), mu1=np.array([sep]),
                                  sigma0=one, sigma1=one, prevalence=pi_inf)
        post = GaussianMixtureSpec(mu0=np.zeros(1), mu1=np.array([sep]),
                                   sigma0=one, sigma1=one, prevalence=0.68)
        presets[name] = ScenarioPreset(
            name=name, pre=pre, post=post, train_m=1000,
            description=f"outbreak analogue, prevalence {pi_inf} -> 0.68",
            gradual_length=gradual,
        )
    return presets


_PRESETS = _build_presets()


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def get_preset(name: str) -> ScenarioPreset:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; known presets: {', '.join(preset_names())}"
        ) from None
