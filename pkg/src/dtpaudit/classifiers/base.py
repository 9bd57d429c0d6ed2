from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Any

import numpy as np

from ..data import Dataset, FeatureSchema, Record, bin_probability

ALGORITHMS = (
    "bayes-inference",
    "naive-bayes",
    "logistic-regression",
    "mlp",
    "random-decision-trees",
    "knn",
    "lsq",
    "rigged",
    "constant",
)

# trainers whose output does not depend on the seed
DETERMINISTIC = frozenset({"bayes-inference", "naive-bayes", "logistic-regression", "knn", "lsq", "constant"})
PARAMETRIC = frozenset({"logistic-regression", "mlp"})


class IncompatibleSchema(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierSpec:
    """A classification algorithm plus its hyperparameters and seed.

    Only the fields relevant to ``algorithm`` are used. ``feature_set`` is a
    tuple of conjunctions, each a tuple of ``(feature index, value index)``
    literals; the empty conjunction is the constant feature.
    """

    algorithm: str
    seed: int = 0
    laplace: bool = False
    lr: float = 0.01
    epochs: int = 30
    hidden_units: int = 64
    activation: str = "tanh"
    n_trees: int = 10
    depth: int = 3
    k: int = 1
    feature_set: tuple | None = None
    inner: "ClassifierSpec | None" = None
    watched: Record | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.lr <= 0 or self.epochs <= 0 or self.hidden_units <= 0:
            raise ValueError("lr, epochs and hidden_units must be positive")
        if self.n_trees <= 0 or self.depth <= 0 or self.k <= 0:
            raise ValueError("n_trees, depth and k must be positive")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.feature_set is not None:
            fs = tuple(tuple(sorted((int(j), int(v)) for j, v in conj)) for conj in self.feature_set)
            object.__setattr__(self, "feature_set", fs)
        if self.algorithm == "lsq" and not self.feature_set:
            raise ValueError("lsq needs a feature_set")
        if self.algorithm == "rigged" and (self.inner is None or self.watched is None):
            raise ValueError("rigged needs inner and watched")

    @property
    def deterministic(self) -> bool:
        if self.algorithm == "rigged":
            return self.inner.deterministic
        return self.algorithm in DETERMINISTIC

    def with_seed(self, seed: int) -> "ClassifierSpec":
        inner = self.inner.with_seed(seed) if self.inner is not None else None
        return replace(self, seed=int(seed), inner=inner)

    _RELEVANT = {
        "bayes-inference": (),
        "naive-bayes": ("laplace",),
        "logistic-regression": ("lr", "epochs"),
        "mlp": ("hidden_units", "activation", "lr", "epochs"),
        "random-decision-trees": ("n_trees", "depth"),
        "knn": ("k",),
        "lsq": ("feature_set",),
        "rigged": ("inner", "watched"),
        "constant": (),
    }

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"algorithm": self.algorithm, "seed": self.seed}
        for name in self._RELEVANT[self.algorithm]:
            v = getattr(self, name)
            if name == "feature_set":
                v = [[list(lit) for lit in conj] for conj in v]
            elif name == "inner":
                v = v.to_dict()
            elif name == "watched":
                v = {"x": list(v.x), "y": v.y}
            d[name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ClassifierSpec":
        d = dict(d)
        if "K" in d:
            d["n_trees"] = d.pop("K")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown classifier fields: {sorted(unknown)}")
        if d.get("inner") is not None:
            d["inner"] = cls.from_dict(d["inner"])
        if d.get("watched") is not None:
            w = d["watched"]
            d["watched"] = Record(tuple(w["x"]), w["y"])
        if d.get("feature_set") is not None:
            d["feature_set"] = tuple(tuple(tuple(lit) for lit in conj) for conj in d["feature_set"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def normalize_scores(scores: np.ndarray) -> np.ndarray:
    """Row-normalise non-negative scores; all-zero rows stay zero."""
    scores = np.asarray(scores, dtype=np.float64)
    total = scores.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0, scores / np.where(total > 0, total, 1.0), 0.0)
    return out


@dataclass(frozen=True, eq=False)
class TrainedClassifier:
    """Base for fitted models.

    Subclasses implement ``scores``: the raw, possibly unnormalised, class
    scores the model computes before normalisation. ``predict_proba``
    normalises them over labels and ``predict`` bins the result.
    """

    spec: ClassifierSpec
    schema: FeatureSchema
    training_set_id: str = field(default="", kw_only=True)

    @property
    def k(self) -> int:
        return self.schema.k

    @property
    def param_vector(self) -> np.ndarray | None:
        return None

    def scores(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _as_matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.schema.m:
            raise IncompatibleSchema(f"query has {X.shape[1]} features, schema has {self.schema.m}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        X = self._as_matrix(X)
        return normalize_scores(self.scores(X))

    def predict_many(self, X) -> np.ndarray:
        return bin_probability(self.predict_proba(X))

    def predict(self, x) -> np.ndarray:
        """Binned prediction vector for a single feature vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise IncompatibleSchema("predict takes a single feature vector")
        return self.predict_many(x[None, :])[0]

    def accuracy(self, d: Dataset) -> float:
        if len(d) == 0:
            return float("nan")
        return float(np.mean(self.predict_proba(d.X).argmax(axis=1) == d.y))


@dataclass(frozen=True, eq=False)
class ConstantClassifier(TrainedClassifier):
    """Ignores its training data; predicts the uniform distribution."""

    def scores(self, X):
        return np.full((len(X), self.k), 1.0 / self.k)
