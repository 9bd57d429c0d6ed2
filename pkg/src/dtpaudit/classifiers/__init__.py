"""Deterministic from-scratch probabilistic classifiers."""

from __future__ import annotations

import pickle
from pathlib import Path

from ..data import Dataset
from .base import (
    ALGORITHMS,
    PARAMETRIC,
    ClassifierSpec,
    ConstantClassifier,
    IncompatibleSchema,
    TrainedClassifier,
    normalize_scores,
)
from .bayes import (
    BayesInferenceClassifier,
    LsqClassifier,
    NaiveBayesClassifier,
    UndefinedCoefficient,
    naive_bayes_feature_set,
)
from .knn import KNNClassifier
from .neural import LogisticRegressionClassifier, MLPClassifier
from .rigged import RiggedClassifier, make_rigged
from .trees import RandomTreesClassifier, aggregate_geometric

_TRAINERS = {
    "bayes-inference": BayesInferenceClassifier.fit,
    "naive-bayes": NaiveBayesClassifier.fit,
    "lsq": LsqClassifier.fit,
    "mlp": MLPClassifier.fit,
    "logistic-regression": LogisticRegressionClassifier.fit,
    "random-decision-trees": RandomTreesClassifier.fit,
    "knn": KNNClassifier.fit,
}


def train(spec: ClassifierSpec, t_set: Dataset) -> TrainedClassifier:
    """Fit ``spec`` on ``t_set``. Deterministic in (spec, t_set)."""
    if spec.algorithm == "constant":
        return ConstantClassifier(spec, t_set.schema, training_set_id=t_set.fingerprint())
    if spec.algorithm == "rigged":
        return make_rigged(spec.inner, spec.watched, t_set)
    if len(t_set) == 0:
        raise ValueError("cannot train on an empty dataset")
    return _TRAINERS[spec.algorithm](spec, t_set)


def predict(c: TrainedClassifier, x):
    return c.predict(x)


# The specialised predictors share the generic path; they exist so callers can
# assert the model family they expect.
def predict_lsq(c: TrainedClassifier, x):
    if not isinstance(c, LsqClassifier):
        raise TypeError("predict_lsq needs an LSQ classifier")
    return c.predict(x)


def predict_rdt(c: TrainedClassifier, x):
    if not isinstance(c, RandomTreesClassifier):
        raise TypeError("predict_rdt needs a random decision tree classifier")
    return c.predict(x)


def predict_knn(c: TrainedClassifier, x):
    if not isinstance(c, KNNClassifier):
        raise TypeError("predict_knn needs a k-NN classifier")
    return c.predict(x)


MODEL_FORMAT_VERSION = 1


def save_model(c: TrainedClassifier, path: str | Path) -> None:
    with open(path, "wb") as fh:
        pickle.dump({"format": "dtpaudit-model", "version": MODEL_FORMAT_VERSION, "model": c}, fh)


def load_model(path: str | Path) -> TrainedClassifier:
    with open(path, "rb") as fh:
        blob = pickle.load(fh)
    if not isinstance(blob, dict) or blob.get("format") != "dtpaudit-model":
        raise ValueError(f"{path}: not a saved model")
    if blob["version"] != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model format version {blob['version']}")
    return blob["model"]


__all__ = [
    "ALGORITHMS",
    "PARAMETRIC",
    "BayesInferenceClassifier",
    "ClassifierSpec",
    "ConstantClassifier",
    "IncompatibleSchema",
    "KNNClassifier",
    "LogisticRegressionClassifier",
    "LsqClassifier",
    "MLPClassifier",
    "NaiveBayesClassifier",
    "RandomTreesClassifier",
    "RiggedClassifier",
    "TrainedClassifier",
    "UndefinedCoefficient",
    "aggregate_geometric",
    "load_model",
    "make_rigged",
    "naive_bayes_feature_set",
    "normalize_scores",
    "predict",
    "predict_knn",
    "predict_lsq",
    "predict_rdt",
    "save_model",
    "train",
]
