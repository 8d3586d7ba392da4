"""Kernel SVM trained by SMO with maximal-violating-pair working sets.

The dual is  min 1/2 a'Qa - sum(a)  s.t. 0 <= a <= C, s'a = 0  with
Q_ij = s_i s_j K(x_i, x_j) and targets s = +1 for label 0, -1 for label 1,
so the decision value follows the same sign rule as the linear models.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from packscope.errors import NonConvergence

TAU = 1e-12


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float, degree: int, coef0: float) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "poly":
        return (gamma * (A @ B.T) + coef0) ** degree
    if kernel == "sigmoid":
        return np.tanh(gamma * (A @ B.T) + coef0)
    if kernel == "rbf":
        d2 = (A ** 2).sum(axis=1)[:, None] - 2.0 * A @ B.T + (B ** 2).sum(axis=1)[None, :]
        return np.exp(-gamma * np.maximum(d2, 0.0))
    raise ValueError(f"unknown kernel {kernel!r}")


@dataclass(frozen=True)
class KernelSVM:
    support: np.ndarray   # support vectors
    coef: np.ndarray      # alpha_i * s_i
    b: float
    kernel: str
    gamma: float
    degree: int
    coef0: float

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if len(self.coef) == 0:
            return np.full(X.shape[0], self.b)
        K = kernel_matrix(X, self.support, self.kernel, self.gamma, self.degree, self.coef0)
        return K @ self.coef + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision(X) < 0).astype(int)


def smo(K: np.ndarray, s: np.ndarray, C: float, tol: float, max_iter: int) -> tuple[np.ndarray, float, bool]:
    """Solve the dual; returns (alpha, b, converged)."""
    n = len(s)
    a = np.zeros(n)
    G = -np.ones(n)
    QD = np.diag(K).copy()
    converged = False
    for _ in range(max_iter):
        up = ((s > 0) & (a < C)) | ((s < 0) & (a > 0))
        low = ((s < 0) & (a < C)) | ((s > 0) & (a > 0))
        v = -s * G
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        if v[i] - v[j] < tol:
            converged = True
            break
        Kij = K[i, j]
        ai, aj = a[i], a[j]
        if s[i] != s[j]:
            quad = max(QD[i] + QD[j] + 2.0 * Kij, TAU)
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = max(QD[i] + QD[j] - 2.0 * Kij, TAU)
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
                if nj > C:
                    nj, ni = C, total - C
            else:
                if nj < 0:
                    nj, ni = 0.0, total
                if ni < 0:
                    ni, nj = 0.0, total
        di, dj = ni - ai, nj - aj
        a[i], a[j] = ni, nj
        G += s * (s[i] * di * K[i] + s[j] * dj * K[j])
    free = (a > 1e-12) & (a < C - 1e-12)
    sg = s * G
    if free.any():
        rho = float(sg[free].mean())
    else:
        up = ((s > 0) & (a < C)) | ((s < 0) & (a > 0))
        low = ((s < 0) & (a < C)) | ((s > 0) & (a > 0))
        hi = sg[up].min() if up.any() else 0.0
        lo = sg[low].max() if low.any() else 0.0
        rho = float((hi + lo) / 2.0)
    return a, -rho, converged


def resolve_gamma(gamma, X: np.ndarray) -> float:
    if gamma == "scale":
        v = float(X.var()) * X.shape[1]
        return 1.0 / v if v > 0 else 1.0
    return float(gamma)


def fit_ksvm(X, y, p: dict, rng=None) -> KernelSVM:
    X = np.asarray(X, dtype=float)
    s = np.where(np.asarray(y) == 0, 1.0, -1.0)
    gamma = resolve_gamma(p["gamma"], X)
    K = kernel_matrix(X, X, p["kernel"], gamma, p["degree"], p["coef0"])
    a, b, ok = smo(K, s, float(p["C"]), float(p["tol"]), int(p["max_iter"]))
    if not ok:
        warnings.warn(NonConvergence("KSVM", int(p["max_iter"])), stacklevel=2)
    sv = a > 0
    return KernelSVM(X[sv].copy(), (a * s)[sv], b, p["kernel"], gamma, int(p["degree"]), float(p["coef0"]))
