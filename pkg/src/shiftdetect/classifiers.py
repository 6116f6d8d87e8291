"""Probabilistic classifiers trained on pre-change data.

Each classifier produces scores in [0, 1] estimating P_pre(Y=1 | X=x),
which feed the affine score-to-likelihood-ratio map in `ratio`. Three
families are provided: linear discriminant analysis (shared covariance),
quadratic discriminant analysis (per-class covariances), and a Gaussian
kernel-density classifier. `binarize` turns scores into hard labels.

pi_inf enters each score as a known constant. A convenience estimator from
training-label frequency exists but must be requested explicitly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit, logsumexp

_LOG_2PI = float(np.log(2.0 * np.pi))


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"training features must be a (m, d) matrix, got shape {X.shape}")
    return X


def _split_classes(X, y):
    X = _as_matrix(X)
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ValueError("feature and label counts differ")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    X0, X1 = X[y == 0], X[y == 1]
    if len(X0) == 0 or len(X1) == 0:
        raise ValueError("both classes must be present in the training set")
    return X0, X1


def _check_pi(pi_inf: float) -> float:
    if not (0.0 < pi_inf < 1.0):
        raise ValueError(f"pi_inf must lie in (0, 1), got {pi_inf}")
    return float(pi_inf)


def _chol_or_raise(sigma: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        raise ValueError(
            f"{what} is singular or not positive definite; "
            "consider the ridge option or more training data"
        ) from None


def _rows(x, d: int):
    """View input as (n, d) rows; remember whether it was a single vector."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != d:
        raise ValueError(f"expected dimension {d}, got {arr.shape[1]}")
    return arr, single


def _mvn_logpdf(X: np.ndarray, mu: np.ndarray, chol: np.ndarray) -> np.ndarray:
    diff = X - mu
    # chol is lower triangular; solve L z = diff^T
    z = solve_triangular(chol, diff.T, lower=True)
    quad = np.sum(z * z, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    d = X.shape[1]
    return -0.5 * (d * _LOG_2PI + logdet + quad)


@dataclass(frozen=True, eq=False)
class LdaModel:
    """Shared-covariance two-class Gaussian classifier.

    Scores are computed through the linear log-odds form
    a + b.x with b = Sigma^{-1}(mu1 - mu0), passed through the logistic
    function, which is stable far into either tail.
    """

    mu0: np.ndarray
    mu1: np.ndarray
    sigma: np.ndarray
    pi_inf: float
    coef: np.ndarray
    intercept: float

    @property
    def dim(self) -> int:
        return self.mu0.shape[0]


def fit_lda(X, y, pi_inf: float, ridge: float = 0.0) -> LdaModel:
    """Fit class means and pooled within-class covariance (denominator m-2).

    ridge > 0 adds ridge * I to the pooled covariance before inversion,
    for near-singular problems at small m.
    """
    pi_inf = _check_pi(pi_inf)
    X0, X1 = _split_classes(X, y)
    m = len(X0) + len(X1)
    mu0, mu1 = X0.mean(axis=0), X1.mean(axis=0)
    c0, c1 = X0 - mu0, X1 - mu1
    sigma = (c0.T @ c0 + c1.T @ c1) / (m - 2)
    if ridge > 0.0:
        sigma = sigma + ridge * np.eye(sigma.shape[0])
    chol = _chol_or_raise(sigma, "pooled covariance")
    coef = np.linalg.solve(chol.T, np.linalg.solve(chol, mu1 - mu0))
    intercept = float(
        np.log(pi_inf / (1.0 - pi_inf)) - 0.5 * (mu1 + mu0) @ coef
    )
    return LdaModel(mu0=mu0, mu1=mu1, sigma=sigma, pi_inf=pi_inf,
                    coef=coef, intercept=intercept)


def lda_score(model: LdaModel, x):
    """Posterior probability of class 1 at x (vector or (n, d) batch)."""
    arr, single = _rows(x, model.dim)
    score = expit(arr @ model.coef + model.intercept)
    return float(score[0]) if single else score


@dataclass(frozen=True, eq=False)
class QdaModel:
    """Per-class-covariance two-class Gaussian classifier."""

    mu0: np.ndarray
    mu1: np.ndarray
    sigma0: np.ndarray
    sigma1: np.ndarray
    pi_inf: float
    chol0: np.ndarray
    chol1: np.ndarray

    @property
    def dim(self) -> int:
        return self.mu0.shape[0]


def fit_qda(X, y, pi_inf: float, ridge: float = 0.0) -> QdaModel:
    """Fit per-class means and covariances (denominator m_c - 1)."""
    pi_inf = _check_pi(pi_inf)
    X0, X1 = _split_classes(X, y)
    mu0, mu1 = X0.mean(axis=0), X1.mean(axis=0)

    def cov(Xc, name):
        if len(Xc) < 2:
            raise ValueError(f"class {name} needs at least 2 samples for a covariance")
        c = Xc - Xc.mean(axis=0)
        s = c.T @ c / (len(Xc) - 1)
        if ridge > 0.0:
            s = s + ridge * np.eye(s.shape[0])
        return s

    sigma0, sigma1 = cov(X0, "0"), cov(X1, "1")
    chol0 = _chol_or_raise(sigma0, "class-0 covariance")
    chol1 = _chol_or_raise(sigma1, "class-1 covariance")
    return QdaModel(mu0=mu0, mu1=mu1, sigma0=sigma0, sigma1=sigma1,
                    pi_inf=pi_inf, chol0=chol0, chol1=chol1)


def qda_score(model: QdaModel, x):
    """Two-Gaussian posterior with unequal covariances, in the log domain."""
    arr, single = _rows(x, model.dim)
    l1 = _mvn_logpdf(arr, model.mu1, model.chol1) + np.log(model.pi_inf)
    l0 = _mvn_logpdf(arr, model.mu0, model.chol0) + np.log(1.0 - model.pi_inf)
    score = expit(l1 - l0)
    return float(score[0]) if single else score


@dataclass(frozen=True, eq=False)
class KdeClassifier:
    """Per-class product-Gaussian kernel density classifier.

    bandwidth0/bandwidth1 are per-dimension positive bandwidth vectors.
    """

    class0_points: np.ndarray
    class1_points: np.ndarray
    bandwidth0: np.ndarray
    bandwidth1: np.ndarray
    pi_inf: float

    @property
    def dim(self) -> int:
        return self.class0_points.shape[1]


def _silverman(Xc: np.ndarray) -> np.ndarray:
    n, d = Xc.shape
    sd = Xc.std(axis=0, ddof=1) if n > 1 else np.ones(d)
    sd = np.where(sd > 0, sd, 1.0)
    return sd * (4.0 / ((d + 2.0) * n)) ** (1.0 / (d + 4.0))


def fit_kde_classifier(X, y, pi_inf: float, bandwidth=None) -> KdeClassifier:
    """Store the training points and pick bandwidths.

    bandwidth=None applies Silverman's rule per class and dimension; a
    scalar or per-dimension array fixes the same bandwidth for both classes.
    """
    pi_inf = _check_pi(pi_inf)
    X0, X1 = _split_classes(X, y)
    d = X0.shape[1]
    if bandwidth is None:
        bw0, bw1 = _silverman(X0), _silverman(X1)
    else:
        bw = np.broadcast_to(np.asarray(bandwidth, dtype=float), (d,)).copy()
        if np.any(bw <= 0):
            raise ValueError("bandwidth must be positive")
        bw0 = bw1 = bw
    return KdeClassifier(class0_points=X0, class1_points=X1,
                         bandwidth0=bw0, bandwidth1=bw1, pi_inf=pi_inf)


def _kde_logdensity(points: np.ndarray, bw: np.ndarray, arr: np.ndarray) -> np.ndarray:
    # (n_query, n_points) squared scaled distances, summed over dimensions
    z = (arr[:, None, :] - points[None, :, :]) / bw
    expo = -0.5 * np.sum(z * z, axis=2)
    log_norm = np.sum(np.log(bw)) + 0.5 * points.shape[1] * _LOG_2PI
    return logsumexp(expo, axis=1) - np.log(len(points)) - log_norm


def kde_score(model: KdeClassifier, x):
    """Kernel-density posterior for class 1.

    If both class log-densities underflow to -inf at a query point, the
    score falls back to pi_inf and a warning is emitted.
    """
    arr, single = _rows(x, model.dim)
    l1 = _kde_logdensity(model.class1_points, model.bandwidth1, arr) + np.log(model.pi_inf)
    l0 = _kde_logdensity(model.class0_points, model.bandwidth0, arr) + np.log(1.0 - model.pi_inf)
    score = expit(l1 - l0)
    dead = np.isneginf(l1) & np.isneginf(l0)
    if np.any(dead):
        warnings.warn(
            "kde_score: both class densities underflowed at some query points; "
            "returning the prior pi_inf there",
            RuntimeWarning,
        )
        score = np.where(dead, model.pi_inf, score)
    return float(score[0]) if single else score


def binarize(score, threshold: float):
    """Hard label: 1 if score >= threshold else 0 (ties go to 1)."""
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    s = np.asarray(score, dtype=float)
    if np.any(s < 0.0) or np.any(s > 1.0):
        raise ValueError("score outside [0, 1]")
    out = (s >= threshold).astype(int)
    return int(out) if np.ndim(score) == 0 else out


def estimate_pi_from_labels(y) -> float:
    """Label frequency of class 1; only used when explicitly requested."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty label vector")
    return float(np.mean(y == 1))


def save_model(model, path) -> None:
    """Serialize an LDA or QDA model to JSON for the CLI detect command."""
    if isinstance(model, LdaModel):
        payload = {
            "kind": "lda",
            "mu0": model.mu0.tolist(),
            "mu1": model.mu1.tolist(),
            "sigma": model.sigma.tolist(),
            "pi_inf": model.pi_inf,
        }
    elif isinstance(model, QdaModel):
        payload = {
            "kind": "qda",
            "mu0": model.mu0.tolist(),
            "mu1": model.mu1.tolist(),
            "sigma0": model.sigma0.tolist(),
            "sigma1": model.sigma1.tolist(),
            "pi_inf": model.pi_inf,
        }
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)


def load_model(path):
    """Load a model written by save_model."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    if kind == "lda":
        mu0 = np.asarray(payload["mu0"], dtype=float)
        mu1 = np.asarray(payload["mu1"], dtype=float)
        sigma = np.asarray(payload["sigma"], dtype=float)
        pi_inf = _check_pi(payload["pi_inf"])
        chol = _chol_or_raise(sigma, "stored covariance")
        coef = np.linalg.solve(chol.T, np.linalg.solve(chol, mu1 - mu0))
        intercept = float(np.log(pi_inf / (1.0 - pi_inf)) - 0.5 * (mu1 + mu0) @ coef)
        return LdaModel(mu0=mu0, mu1=mu1, sigma=sigma, pi_inf=pi_inf,
                        coef=coef, intercept=intercept)
    if kind == "qda":
        mu0 = np.asarray(payload["mu0"], dtype=float)
        mu1 = np.asarray(payload["mu1"], dtype=float)
        sigma0 = np.asarray(payload["sigma0"], dtype=float)
        sigma1 = np.asarray(payload["sigma1"], dtype=float)
        pi_inf = _check_pi(payload["pi_inf"])
        return QdaModel(mu0=mu0, mu1=mu1, sigma0=sigma0, sigma1=sigma1,
                        pi_inf=pi_inf,
                        chol0=_chol_or_raise(sigma0, "stored class-0 covariance"),
                        chol1=_chol_or_raise(sigma1, "stored class-1 covariance"))
    raise ValueError(f"unknown model kind {kind!r}")
