"""Gaussian and Bernoulli naive Bayes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from packscope.errors import UnfittedModel


@dataclass(frozen=True)
class GaussianLikelihood:
    mean: np.ndarray  # (2, d)
    var: np.ndarray   # (2, d), strictly positive

    def log_likelihood(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        out = np.empty((X.shape[0], 2))
        for k in range(2):
            z = (X - self.mean[k]) ** 2 / self.var[k]
            out[:, k] = -0.5 * (z + np.log(2.0 * np.pi * self.var[k])).sum(axis=1)
        return out


@dataclass(frozen=True)
class BernoulliLikelihood:
    rate: np.ndarray  # (2, d), P(bit = 1 | class)

    def log_likelihood(self, X: np.ndarray) -> np.ndarray:
        B = (np.atleast_2d(X) > 0).astype(float)
        with np.errstate(divide="ignore"):
            lp, lq = np.log(self.rate), np.log1p(-self.rate)
        out = np.empty((B.shape[0], 2))
        for k in range(2):
            # 0 * log(0) terms must vanish, not become nan
            out[:, k] = np.where(B > 0, lp[k], 0.0).sum(axis=1) + np.where(B > 0, 0.0, lq[k]).sum(axis=1)
        return out


def bayes_posterior(priors, likelihoods, x) -> np.ndarray:
    """Log-space class scores log p(C_k) + sum_i log p(x_i | C_k).

    The predicted class is the argmax, with ties going to class 0. Accepts one
    vector (returns shape (2,)) or a matrix (returns (n, 2)).
    """
    if likelihoods is None or priors is None:
        raise UnfittedModel("naive Bayes model has not been fitted")
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        lp = np.log(np.asarray(priors, dtype=float))
    scores = likelihoods.log_likelihood(x) + lp
    return scores[0] if x.ndim == 1 else scores


def decide(scores: np.ndarray) -> np.ndarray:
    s = np.atleast_2d(scores)
    return (s[:, 1] > s[:, 0]).astype(int)


@dataclass(frozen=True)
class NaiveBayes:
    priors: np.ndarray
    likelihood: GaussianLikelihood | BernoulliLikelihood

    def predict(self, X: np.ndarray) -> np.ndarray:
        return decide(bayes_posterior(self.priors, self.likelihood, np.atleast_2d(X)))


def _priors(y: np.ndarray) -> np.ndarray:
    return np.array([np.mean(y == 0), np.mean(y == 1)])


def fit_gnbc(X, y, p: dict, rng=None) -> NaiveBayes:
    X = np.asarray(X, dtype=float)
    eps = p["var_smoothing"] * max(float(X.var(axis=0).max()), 1e-300)
    mean = np.zeros((2, X.shape[1]))
    var = np.ones((2, X.shape[1]))
    for k in range(2):
        rows = X[y == k]
        if len(rows):
            mean[k] = rows.mean(axis=0)
            var[k] = rows.var(axis=0)
    return NaiveBayes(_priors(y), GaussianLikelihood(mean, var + eps))


def fit_bnbc(X, y, p: dict, rng=None) -> NaiveBayes:
    B = (np.asarray(X) > 0).astype(float)
    a = p["alpha"]
    rate = np.empty((2, B.shape[1]))
    for k in range(2):
        rows = B[y == k]
        rate[k] = (rows.sum(axis=0) + a) / (len(rows) + 2 * a)
    return NaiveBayes(_priors(y), BernoulliLikelihood(rate))
