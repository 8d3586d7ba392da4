"""Logistic regression and linear SVM.

Both follow the sign rule of the linear decision function y = w.x + b:
y > 0 means label 0 and y < 0 means label 1 (y == 0 goes to label 0). The
models are therefore trained against the target "sample is label 0".
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from packscope.errors import NonConvergence


def logistic(z):
    """1 / (1 + e^-z), without overflow for large |z|."""
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if out.ndim == 0 else out


def lr_objective(theta: np.ndarray, X: np.ndarray, t: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood plus (l2/2)|w|^2, and its gradient.

    ``theta`` is (w..., b); ``t`` is 1 where the sample has label 0.
    """
    w, b = theta[:-1], theta[-1]
    s = X @ w + b
    # -log sigma(s) = logaddexp(0, -s);  -log(1 - sigma(s)) = logaddexp(0, s)
    nll = np.mean(t * np.logaddexp(0.0, -s) + (1.0 - t) * np.logaddexp(0.0, s))
    r = (logistic(s) - t) / len(t)
    grad = np.concatenate([X.T @ r + l2 * w, [r.sum()]])
    return float(nll + 0.5 * l2 * w @ w), grad


def squared_hinge_objective(theta: np.ndarray, X: np.ndarray, s: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Mean squared hinge loss with targets ``s`` in {+1, -1}, plus (l2/2)|w|^2."""
    w, b = theta[:-1], theta[-1]
    slack = np.maximum(0.0, 1.0 - s * (X @ w + b))
    g = -2.0 * slack * s / len(s)
    grad = np.concatenate([X.T @ g + l2 * w, [g.sum()]])
    return float(np.mean(slack ** 2) + 0.5 * l2 * w @ w), grad


def hinge_objective(theta: np.ndarray, X: np.ndarray, s: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Mean hinge loss plus (l2/2)|w|^2 with one subgradient."""
    w, b = theta[:-1], theta[-1]
    margin = 1.0 - s * (X @ w + b)
    active = (margin > 0).astype(float)
    g = -active * s / len(s)
    grad = np.concatenate([X.T @ g + l2 * w, [g.sum()]])
    return float(np.mean(np.maximum(margin, 0.0)) + 0.5 * l2 * w @ w), grad


def descend(obj, theta: np.ndarray, max_iter: int, tol: float, family: str) -> np.ndarray:
    """Gradient descent with Armijo backtracking on a smooth objective."""
    f, g = obj(theta)
    step = 1.0
    for _ in range(max_iter):
        gg = float(g @ g)
        if gg == 0.0:
            return theta
        while True:
            cand = theta - step * g
            fc, gc = obj(cand)
            if fc <= f - 0.5 * step * gg or step < 1e-12:
                break
            step *= 0.5
        done = f - fc <= tol * max(1.0, abs(f))
        theta, f, g = cand, fc, gc
        step = min(step * 2.0, 1e6)
        if done:
            return theta
    warnings.warn(NonConvergence(family, max_iter), stacklevel=3)
    return theta


def subgradient(obj, theta: np.ndarray, max_iter: int, family: str) -> np.ndarray:
    """Averaged subgradient descent with steps 1/sqrt(t); keeps the best iterate."""
    best, best_f = theta, obj(theta)[0]
    avg = theta.copy()
    for it in range(1, max_iter + 1):
        f, g = obj(theta)
        if f < best_f:
            best, best_f = theta, f
        theta = theta - g / np.sqrt(it)
        avg += (theta - avg) / (it + 1)
    fa = obj(avg)[0]
    return avg if fa <= best_f else best


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    b: float

    def decision(self, X: np.ndarray) -> np.ndarray:
        return np.atleast_2d(X) @ self.w + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision(X) < 0).astype(int)

    def importances(self, d: int) -> np.ndarray:
        return np.abs(self.w)


def fit_lr(X, y, p: dict, rng=None) -> LinearModel:
    # TODO: the grid's "loss" axis is accepted for LR but not used; LR always fits the log-likelihood
    X = np.asarray(X, dtype=float)
    t = (np.asarray(y) == 0).astype(float)
    theta = descend(lambda th: lr_objective(th, X, t, p["l2"]), np.zeros(X.shape[1] + 1),
                    p["max_iter"], p["tol"], "LR")
    return LinearModel(theta[:-1], float(theta[-1]))


def fit_lsvm(X, y, p: dict, rng=None) -> LinearModel:
    X = np.asarray(X, dtype=float)
    s = np.where(np.asarray(y) == 0, 1.0, -1.0)
    start = np.zeros(X.shape[1] + 1)
    if p["loss"] == "hinge":
        theta = subgradient(lambda th: hinge_objective(th, X, s, p["l2"]), start, p["max_iter"], "LSVM")
    else:
        theta = descend(lambda th: squared_hinge_objective(th, X, s, p["l2"]), start,
                        p["max_iter"], p["tol"], "LSVM")
    return LinearModel(theta[:-1], float(theta[-1]))
