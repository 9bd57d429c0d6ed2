from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset, encode
from .base import ClassifierSpec, TrainedClassifier


@dataclass(frozen=True, eq=False)
class KNNClassifier(TrainedClassifier):
    """Label frequencies among the k nearest training records.

    Euclidean distance on the encoded features; ties at equal distance go to
    the lower record id.
    """

    Z: np.ndarray
    y: np.ndarray
    ids: np.ndarray

    @classmethod
    def fit(cls, spec: ClassifierSpec, d: Dataset) -> "KNNClassifier":
        if len(d) == 0:
            raise ValueError("k-NN needs a non-empty training set")
        if spec.k > len(d):
            raise ValueError(f"k={spec.k} exceeds training set size {len(d)}")
        return cls(spec, d.schema, encode(d.schema, d.X), d.y.copy(), d.ids.copy(),
                   training_set_id=d.fingerprint())

    def neighbours(self, x) -> np.ndarray:
        """Positions of the k nearest training records to a single query."""
        z = encode(self.schema, self._as_matrix(x))[0]
        dist = np.sqrt(((self.Z - z) ** 2).sum(axis=1))
        order = np.lexsort((self.ids, dist))
        return order[: self.spec.k]

    def scores(self, X):
        out = np.zeros((len(X), self.k))
        for i, x in enumerate(X):
            nb = self.neighbours(x)
            out[i] = np.bincount(self.y[nb], minlength=self.k) / len(nb)
        return out
