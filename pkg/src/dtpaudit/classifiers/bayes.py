"""Count-based classifiers: Bayes inference, naive Bayes, LSQ."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset, FeatureSchema
from .base import ClassifierSpec, IncompatibleSchema, TrainedClassifier


class UndefinedCoefficient(ValueError):
    """An LSQ log coefficient was requested for a zero-support query."""


def _require_categorical(schema: FeatureSchema, what: str) -> None:
    if not schema.all_categorical:
        raise IncompatibleSchema(f"{what} needs an all-categorical schema")


def _codes(X: np.ndarray) -> np.ndarray:
    return np.asarray(X, dtype=np.int64)


def _joint_keys(X: np.ndarray, cards: tuple[int, ...]) -> np.ndarray:
    """Mixed-radix index of each row of ``X`` in the enumerated space X^m."""
    keys = np.zeros(len(X), dtype=np.int64)
    for j, v in enumerate(cards):
        keys = keys * v + X[:, j]
    return keys


@dataclass(frozen=True, eq=False)
class BayesInferenceClassifier(TrainedClassifier):
    """p(y|x) = n_{x,y} / n_x from the empirical joint; unseen x scores zero."""

    table: dict  # joint key -> per-class counts

    @classmethod
    def fit(cls, spec: ClassifierSpec, d: Dataset) -> "BayesInferenceClassifier":
        _require_categorical(d.schema, "bayes inference")
        keys = _joint_keys(_codes(d.X), d.schema.cardinalities)
        table: dict[int, np.ndarray] = {}
        for key, y in zip(keys.tolist(), d.y.tolist()):
            table.setdefault(key, np.zeros(d.schema.k))[y] += 1
        return cls(spec, d.schema, table, training_set_id=d.fingerprint())

    def scores(self, X):
        keys = _joint_keys(_codes(X), self.schema.cardinalities)
        out = np.zeros((len(keys), self.k))
        for i, key in enumerate(keys.tolist()):
            counts = self.table.get(key)
            if counts is not None:
                out[i] = counts / counts.sum()
        return out


@dataclass(frozen=True, eq=False)
class NaiveBayesClassifier(TrainedClassifier):
    """Categorical naive Bayes.

    ``scores`` returns the unnormalised joint p(y) * prod_j p(x_j | y).
    With Laplace smoothing the conditionals are (n_{x_j,y} + 1) / (n_y + v_j)
    and the prior is (n_y + 1) / (n + k); without it an empty class gets
    prior 0 and zero conditionals.
    """

    prior: np.ndarray  # (k,)
    conditionals: tuple  # per feature, array (k, v_j)

    @classmethod
    def fit(cls, spec: ClassifierSpec, d: Dataset) -> "NaiveBayesClassifier":
        _require_categorical(d.schema, "naive Bayes")
        if len(d) == 0:
            raise ValueError("naive Bayes needs a non-empty training set")
        k = d.schema.k
        X = _codes(d.X)
        n_y = np.bincount(d.y, minlength=k).astype(np.float64)
        n = float(len(d))
        if spec.laplace:
            prior = (n_y + 1.0) / (n + k)
        else:
            prior = n_y / n
        conds = []
        for j, v in enumerate(d.schema.cardinalities):
            counts = np.zeros((k, v))
            np.add.at(counts, (d.y, X[:, j]), 1.0)
            if spec.laplace:
                conds.append((counts + 1.0) / (n_y[:, None] + v))
            else:
                with np.errstate(invalid="ignore", divide="ignore"):
                    conds.append(np.where(n_y[:, None] > 0, counts / np.maximum(n_y[:, None], 1.0), 0.0))
        return cls(spec, d.schema, prior, tuple(conds), training_set_id=d.fingerprint())

    def scores(self, X):
        X = _codes(X)
        out = np.tile(self.prior, (len(X), 1))
        for j, cond in enumerate(self.conditionals):
            out *= cond[:, X[:, j]].T
        return out


# ------------------------------------------------------------------- LSQ


def naive_bayes_feature_set(schema: FeatureSchema) -> tuple:
    """Feature set under which LSQ reproduces naive Bayes exactly.

    The constant feature plus one indicator ``[x_j == v]`` per feature value.
    """
    _require_categorical(schema, "naive Bayes feature set")
    fs = [()]
    for j, v in enumerate(schema.cardinalities):
        fs.extend(((j, val),) for val in range(v))
    return tuple(fs)


@dataclass(frozen=True, eq=False)
class LsqClassifier(TrainedClassifier):
    """Linear statistical queries hypothesis with log-probability coefficients.

    Coefficients: log(n_y / n) for the constant feature and
    log(n_{chi,y} / n_y) for every other feature, so
    p(y|x) = exp(sum over active chi of f_[chi,y]).
    """

    feature_set: tuple
    log_coef: np.ndarray  # (|features|, k), -inf where the query had no support

    @classmethod
    def fit(cls, spec: ClassifierSpec, d: Dataset) -> "LsqClassifier":
        _require_categorical(d.schema, "LSQ")
        fs = spec.feature_set
        if () not in fs:
            raise ValueError("LSQ feature set must contain the constant feature ()")
        for conj in fs:
            for j, v in conj:
                if not (0 <= j < d.schema.m and 0 <= v < d.schema.cardinalities[j]):
                    raise IncompatibleSchema(f"literal ({j}, {v}) outside the schema")
        k = d.schema.k
        n = float(len(d))
        n_y = np.bincount(d.y, minlength=k).astype(np.float64)
        active = _active(fs, _codes(d.X))  # (n, |fs|)
        n_chi_y = np.zeros((len(fs), k))
        for c in range(k):
            n_chi_y[:, c] = active[d.y == c].sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(n_chi_y > 0, np.log(n_chi_y) - np.log(np.where(n_y > 0, n_y, 1.0)), -np.inf)
            const = fs.index(())
            coef[const] = np.where(n_y > 0, np.log(n_y) - np.log(n), -np.inf)
        return cls(spec, d.schema, fs, coef, training_set_id=d.fingerprint())

    def scores(self, X):
        active = _active(self.feature_set, _codes(X)).astype(bool)
        out = np.empty((len(active), self.k))
        for i, row in enumerate(active):
            coefs = self.log_coef[row]
            if np.isneginf(coefs).any():
                raise UndefinedCoefficient("undefined log coefficient: statistical query with zero support")
            out[i] = np.exp(coefs.sum(axis=0))
        return out


def _active(feature_set: tuple, X: np.ndarray) -> np.ndarray:
    out = np.ones((len(X), len(feature_set)), dtype=np.float64)
    for f, conj in enumerate(feature_set):
        for j, v in conj:
            out[:, f] *= X[:, j] == v
    return out
