"""Likelihood-ratio models plugged into the recursive detectors.

Under a prevalence shift from pi_inf = P_pre(Y=1) to pi_0 = P_post(Y=1)
with unchanged class-conditional distributions, the marginal density ratio
reduces to an affine function of the posterior probability P_pre(Y=1|x).
Substituting a classifier score s = A(x) in [0, 1] for the posterior gives
the plug-in ratio

    lr(s) = (pi_0/pi_inf - (1-pi_0)/(1-pi_inf)) * s + (1-pi_0)/(1-pi_inf).

Binary predictions are the special case s in {0, 1}. The univariate
Gaussian mean-shift model lr(x) = exp(mu*x - mu^2/2) is included as the
standard parametric reference case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ArrayLike = "float | np.ndarray"


@dataclass(frozen=True)
class LabelShiftPriors:
    """Pre- and post-change positive-class proportions."""

    pi_inf: float
    pi_0: float

    def __post_init__(self) -> None:
        for name, v in (("pi_inf", self.pi_inf), ("pi_0", self.pi_0)):
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0, 1), got {v}")

    @property
    def slope(self) -> float:
        return self.pi_0 / self.pi_inf - (1.0 - self.pi_0) / (1.0 - self.pi_inf)

    @property
    def intercept(self) -> float:
        return (1.0 - self.pi_0) / (1.0 - self.pi_inf)


@dataclass(frozen=True)
class ScoreRatioModel:
    """Affine score-to-likelihood-ratio map for a fixed prior pair."""

    priors: LabelShiftPriors

    def __call__(self, score):
        return label_shift_ratio(score, self.priors)


def label_shift_ratio(score, priors: LabelShiftPriors):
    """Affine plug-in likelihood ratio at one or many scores in [0, 1].

    Endpoints are valid inputs: lr(0) = (1-pi_0)/(1-pi_inf) and
    lr(1) = pi_0/pi_inf. Output is strictly positive.
    """
    s = np.asarray(score, dtype=float)
    if np.any(s < 0.0) or np.any(s > 1.0) or not np.all(np.isfinite(s)):
        raise ValueError("score outside [0, 1]")
    out = priors.slope * s + priors.intercept
    if np.ndim(score) == 0:
        return float(out)
    return out


def binary_label_ratio(label, priors: LabelShiftPriors):
    """Likelihood ratio for a binary prediction/label in {0, 1}.

    Equals label_shift_ratio evaluated at score = label.
    """
    lab = np.asarray(label)
    if not np.all((lab == 0) | (lab == 1)):
        raise ValueError("label must be 0 or 1")
    return label_shift_ratio(lab.astype(float) if lab.ndim else float(lab), priors)


@dataclass(frozen=True)
class GaussianShiftModel:
    """Mean-shift ratio model: pre-change N(0,1), post-change N(mu_hat,1)."""

    mu_hat: float


def gaussian_shift_ratio(x, model: GaussianShiftModel):
    """lr(x) = exp(mu_hat * x - mu_hat^2 / 2)."""
    mu = model.mu_hat
    out = np.exp(mu * np.asarray(x, dtype=float) - 0.5 * mu * mu)
    if np.ndim(x) == 0:
        return float(out)
    return out


def fit_gaussian_mean(train) -> GaussianShiftModel:
    """Estimate the post-change mean by the sample mean of the training draws."""
    arr = np.asarray(train, dtype=float)
    if arr.size == 0:
        raise ValueError("training sample is empty")
    return GaussianShiftModel(mu_hat=float(arr.mean()))
