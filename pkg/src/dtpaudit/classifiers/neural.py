"""One-hidden-layer MLP and multinomial logistic regression.

The MLP is trained by per-record gradient descent on the negative
log-likelihood of a log-softmax head, visiting records in dataset order every
epoch. Visiting order is data-independent so a leave-one-out retrain with the
same seed differs from the full model only through the removed record.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..data import Dataset, encode
from .base import ClassifierSpec, TrainedClassifier

TANH, RELU = 0, 1
_ACT = {"tanh": TANH, "relu": RELU}


@numba.njit(cache=True)
def _activate(z, act):
    if act == TANH:
        return np.tanh(z)
    return np.maximum(z, 0.0)


@numba.njit(cache=True)
def _forward(x, W1, b1, W2, b2, act):
    h = _activate(W1 @ x + b1, act)
    z = W2 @ h + b2
    zmax = z.max()
    logp = z - (zmax + np.log(np.exp(z - zmax).sum()))
    return h, logp


@numba.njit(cache=True)
def sample_gradients(x, y, W1, b1, W2, b2, act):
    """Loss -log p(y|x) and its gradients for one example."""
    h, logp = _forward(x, W1, b1, W2, b2, act)
    p = np.exp(logp)
    dz = p.copy()
    dz[y] -= 1.0
    gW2 = np.outer(dz, h)
    gb2 = dz
    dh = W2.T @ dz
    if act == TANH:
        da = dh * (1.0 - h * h)
    else:
        da = dh * (h > 0.0)
    gW1 = np.outer(da, x)
    gb1 = da
    return -logp[y], gW1, gb1, gW2, gb2


@numba.njit(cache=True)
def _train_online(X, y, W1, b1, W2, b2, lr, epochs, act):
    n, d = X.shape
    H = W1.shape[0]
    K = W2.shape[0]
    h = np.empty(H)
    z = np.empty(K)
    for _ in range(epochs):
        for i in range(n):
            x = X[i]
            # forward
            for a in range(H):
                s = b1[a]
                for j in range(d):
                    s += W1[a, j] * x[j]
                h[a] = np.tanh(s) if act == TANH else max(s, 0.0)
            zmax = -np.inf
            for c in range(K):
                s = b2[c]
                for a in range(H):
                    s += W2[c, a] * h[a]
                z[c] = s
                if s > zmax:
                    zmax = s
            tot = 0.0
            for c in range(K):
                z[c] = np.exp(z[c] - zmax)
                tot += z[c]
            for c in range(K):
                z[c] = z[c] / tot  # softmax
            z[y[i]] -= 1.0  # dL/dz
            # backward + update
            for a in range(H):
                g = 0.0
                for c in range(K):
                    g += W2[c, a] * z[c]
                if act == TANH:
                    g *= 1.0 - h[a] * h[a]
                elif h[a] <= 0.0:
                    g = 0.0
                for c in range(K):
                    W2[c, a] -= lr * z[c] * h[a]
                if g != 0.0:
                    for j in range(d):
                        W1[a, j] -= lr * g * x[j]
                    b1[a] -= lr * g
            for c in range(K):
                b2[c] -= lr * z[c]


@numba.njit(cache=True)
def _predict_logp(X, W1, b1, W2, b2, act):
    out = np.empty((X.shape[0], W2.shape[0]))
    for i in range(X.shape[0]):
        _, logp = _forward(X[i], W1, b1, W2, b2, act)
        out[i] = logp
    return out


def init_mlp(n_in: int, hidden: int, n_out: int, seed) -> list[np.ndarray]:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
    rng = np.random.default_rng(seed)
    a1, a2 = 1.0 / np.sqrt(n_in), 1.0 / np.sqrt(hidden)
    return [
        rng.uniform(-a1, a1, size=(hidden, n_in)),
        rng.uniform(-a1, a1, size=hidden),
        rng.uniform(-a2, a2, size=(n_out, hidden)),
        rng.uniform(-a2, a2, size=n_out),
    ]


def fit_mlp(X: np.ndarray, y: np.ndarray, n_out: int, hidden: int, activation: str,
            lr: float, epochs: int, seed) -> list[np.ndarray]:
    params = init_mlp(X.shape[1], hidden, n_out, seed)
    if len(X):
        _train_online(np.ascontiguousarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64),
                      *params, float(lr), int(epochs), _ACT[activation])
    return params


def mlp_log_proba(params, X: np.ndarray, activation: str) -> np.ndarray:
    return _predict_logp(np.ascontiguousarray(X, dtype=np.float64), *params, _ACT[activation])


@dataclass(frozen=True, eq=False)
class MLPClassifier(TrainedClassifier):
    params: tuple  # W1, b1, W2, b2

    @classmethod
    def fit(cls, spec: ClassifierSpec, d: Dataset) -> "MLPClassifier":
        X = encode(d.schema, d.X)
        params = fit_mlp(X, d.y, d.schema.k, spec.hidden_units, spec.activation, spec.lr, spec.epochs, spec.seed)
        for p in params:
            p.setflags(write=False)
        return cls(spec, d.schema, tuple(params), training_set_id=d.fingerprint())

    @property
    def param_vector(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def log_proba(self, X) -> np.ndarray:
        return mlp_log_proba(self.params, encode(self.schema, self._as_matrix(X)), self.spec.activation)

    def scores(self, X):
        return np.exp(self.log_proba(X))


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


@dataclass(frozen=True, eq=False)
class LogisticRegressionClassifier(TrainedClassifier):
    """Multinomial logistic regression fitted by full-batch gradient descent from zero."""

    W: np.ndarray  # (k, d)
    b: np.ndarray  # (k,)

    @classmethod
    def fit(cls, spec: ClassifierSpec, d: Dataset) -> "LogisticRegressionClassifier":
        X = encode(d.schema, d.X)
        k = d.schema.k
        W = np.zeros((k, X.shape[1]))
        b = np.zeros(k)
        onehot = np.eye(k)[d.y]
        n = max(len(X), 1)
        for _ in range(spec.epochs):
            g = np.exp(_log_softmax(X @ W.T + b)) - onehot  # (n, k)
            W -= spec.lr * (g.T @ X) / n
            b -= spec.lr * g.sum(axis=0) / n
        W.setflags(write=False)
        b.setflags(write=False)
        return cls(spec, d.schema, W, b, training_set_id=d.fingerprint())

    @property
    def param_vector(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.b])

    def log_proba(self, X) -> np.ndarray:
        X = encode(self.schema, self._as_matrix(X))
        return _log_softmax(X @ self.W.T + self.b)

    def scores(self, X):
        return np.exp(self.log_proba(X))
