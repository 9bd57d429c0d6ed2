from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset, Record
from .base import ClassifierSpec, TrainedClassifier


@dataclass(frozen=True, eq=False)
class RiggedClassifier(TrainedClassifier):
    """Covert-channel wrapper leaking one record's membership at x = 0.

    Behaves as the inner model everywhere except the all-zero query, where it
    emits all-ones scores (uniform after normalisation) if the watched record
    was in the training set and all-zeros (every bin 0.005) otherwise.
    """

    inner: TrainedClassifier
    watched_member: bool

    def scores(self, X):
        out = self.inner.scores(X).astype(np.float64, copy=True)
        zero = np.all(X == 0.0, axis=1)
        out[zero] = 1.0 if self.watched_member else 0.0
        return out


def make_rigged(inner: ClassifierSpec, watched: Record, t_set: Dataset) -> RiggedClassifier:
    from . import train

    if not np.any(np.asarray(watched.x) != 0.0):
        raise ValueError("watched record must have a non-zero feature vector")
    t_set.schema.check_row(watched.x)
    spec = ClassifierSpec("rigged", seed=inner.seed, inner=inner, watched=watched)
    return RiggedClassifier(spec, t_set.schema, train(inner, t_set), t_set.contains(watched),
                            training_set_id=t_set.fingerprint())
