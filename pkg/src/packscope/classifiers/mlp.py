"""Multi-layer perceptron with a sigmoid output unit, trained by mini-batch SGD."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from packscope.classifiers.linear import logistic
from packscope.errors import NonConvergence

log = logging.getLogger(__name__)


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "tanh":
        return np.tanh(z)
    if name == "logistic":
        return logistic(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "identity":
        return np.ones_like(z)
    if name == "tanh":
        return 1.0 - a ** 2
    if name == "logistic":
        return a * (1.0 - a)
    return (z > 0).astype(float)


def forward(weights, biases, X: np.ndarray, activation: str):
    """Pre-activations and activations of every layer; the last is the output probability."""
    zs, acts = [], [X]
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = acts[-1] @ W + b
        zs.append(z)
        acts.append(logistic(z) if i == len(weights) - 1 else _act(activation, z))
    return zs, acts


def mlp_loss_grad(weights, biases, X: np.ndarray, y: np.ndarray, activation: str, l2: float):
    """Mean cross-entropy plus (l2/2) sum |W|^2, and gradients for every W and b."""
    zs, acts = forward(weights, biases, X, activation)
    out_z = zs[-1][:, 0]
    n = len(y)
    loss = np.mean(y * np.logaddexp(0.0, -out_z) + (1 - y) * np.logaddexp(0.0, out_z))
    loss += 0.5 * l2 * sum(float((W ** 2).sum()) for W in weights)
    delta = ((acts[-1][:, 0] - y) / n)[:, None]
    gW, gb = [None] * len(weights), [None] * len(weights)
    for i in range(len(weights) - 1, -1, -1):
        gW[i] = acts[i].T @ delta + l2 * weights[i]
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ weights[i].T) * _act_grad(activation, zs[i - 1], acts[i])
    return float(loss), gW, gb


def init_params(sizes, rng: np.random.Generator, activation: str):
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        # Glorot uniform; sigmoid hidden units use factor 2 instead of 6
        factor = 2.0 if activation == "logistic" else 6.0
        bound = np.sqrt(factor / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return weights, biases


@dataclass(frozen=True)
class Perceptron:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activation: str

    def proba(self, X: np.ndarray) -> np.ndarray:
        return forward(self.weights, self.biases, np.atleast_2d(X), self.activation)[1][-1][:, 0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.proba(X) > 0.5).astype(int)


def fit_mlp(X, y, p: dict, rng: np.random.Generator) -> Perceptron:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if p["solver"] != "sgd":
        log.info("MLP solver %r is trained with mini-batch SGD", p["solver"])
    act = p["activation"]
    weights, biases = init_params([X.shape[1], *p["layers"], 1], rng, act)
    vW = [np.zeros_like(W) for W in weights]
    vb = [np.zeros_like(b) for b in biases]
    n = len(y)
    bs = max(1, min(p["batch_size"], n))
    lr, mom, l2 = p["learning_rate"], p["momentum"], p["l2"]
    best, stall = np.inf, 0
    for _epoch in range(p["max_iter"]):
        order = rng.permutation(n)
        total = 0.0
        for a in range(0, n, bs):
            idx = order[a:a + bs]
            loss, gW, gb = mlp_loss_grad(weights, biases, X[idx], y[idx], act, l2)
            total += loss * len(idx)
            for i in range(len(weights)):
                vW[i] = mom * vW[i] - lr * gW[i]
                vb[i] = mom * vb[i] - lr * gb[i]
                weights[i] = weights[i] + vW[i]
                biases[i] = biases[i] + vb[i]
        total /= n
        if total > best - p["tol"]:
            stall += 1
            if stall >= p["n_iter_no_change"]:
                break
        else:
            stall = 0
        best = min(best, total)
    else:
        warnings.warn(NonConvergence("MLP", p["max_iter"]), stacklevel=2)
    return Perceptron(tuple(weights), tuple(biases), act)
