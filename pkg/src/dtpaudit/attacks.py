"""Shadow models and the three direct membership attacks.

Every attack tests H0: t not in T against H1: t in T from the target
classifier's binned output q = c(x_t). Ties resolve to H0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .classifiers import ClassifierSpec, train
from .classifiers.neural import fit_mlp, mlp_log_proba
from .data import Dataset, Record, bin_index, encode
from .seeding import derive_seed

H1 = "H1_member"
H0 = "H0_nonmember"
ATTACKS = ("untargeted", "distance", "frequency")


@dataclass(frozen=True)
class AttackVerdict:
    target_id: int
    attack: str
    decision: str
    score: float

    @property
    def member(self) -> bool:
        return self.decision == H1

    def to_dict(self) -> dict:
        return {"target_id": self.target_id, "attack": self.attack, "decision": self.decision,
                "score": self.score}


@dataclass(frozen=True, eq=False)
class ShadowEnsemble:
    """Shadow models with their training-set membership over the candidate set.

    ``membership[j]`` is a boolean mask over candidate positions. In paired
    mode models alternate in/out: model 2j trains on T'_j plus t, model
    2j+1 on T'_j alone.
    """

    mode: str  # "untargeted" or "paired"
    models: tuple
    membership: np.ndarray  # (n_models, |D|) bool
    target_id: int | None = None
    target: Record | None = None

    @property
    def size(self) -> int:
        return len(self.models)

    @property
    def in_mask(self) -> np.ndarray:
        if self.mode != "paired":
            raise ValueError("in/out split only exists for paired ensembles")
        return np.arange(self.size) % 2 == 0

    @cached_property
    def target_predictions(self) -> np.ndarray:
        """Binned prediction of every model at x_t, shape (n_models, k)."""
        if self.target is None:
            raise ValueError("ensemble has no target record")
        return np.stack([m.predict(np.asarray(self.target.x)) for m in self.models])

    @property
    def in_predictions(self) -> np.ndarray:
        return self.target_predictions[self.in_mask]

    @property
    def out_predictions(self) -> np.ndarray:
        return self.target_predictions[~self.in_mask]


def build_shadows(candidate: Dataset, spec: ClassifierSpec, mode: str, n_models: int, train_size: int,
                  seed, target_id: int | None = None) -> ShadowEnsemble:
    """Train shadow classifiers on subsets of the candidate set.

    untargeted: ``n_models`` sets of ``train_size`` records drawn
    independently from D. paired: ``n_models`` sets T'_j of
    ``train_size - 1`` records from D minus t, each trained with and without t.
    Shadow j trains with seed derived from (seed, j); both models of a pair
    share it.
    """
    if n_models <= 0:
        raise ValueError("need at least one shadow model")
    rng = np.random.default_rng(derive_seed(seed, "shadow-sampling"))
    n = len(candidate)
    models, masks = [], []
    if mode == "untargeted":
        if not 0 < train_size <= n:
            raise ValueError(f"shadow training size {train_size} out of range for |D|={n}")
        for j in range(n_models):
            pos = np.sort(rng.choice(n, size=train_size, replace=False))
            mask = np.zeros(n, dtype=bool)
            mask[pos] = True
            models.append(train(spec.with_seed(derive_seed(seed, "shadow", j)), candidate.take(pos)))
            masks.append(mask)
        return ShadowEnsemble(mode, tuple(models), np.array(masks))
    if mode == "paired":
        if target_id is None:
            raise ValueError("paired shadows need a target")
        t_pos = candidate.position(target_id)
        others = np.delete(np.arange(n), t_pos)
        if not 1 <= train_size <= n:
            raise ValueError(f"shadow training size {train_size} out of range for |D|={n}")
        for j in range(n_models):
            pos_out = np.sort(rng.choice(others, size=train_size - 1, replace=False))
            pos_in = np.sort(np.append(pos_out, t_pos))
            s = spec.with_seed(derive_seed(seed, "shadow", j))
            for pos in (pos_in, pos_out):
                mask = np.zeros(n, dtype=bool)
                mask[pos] = True
                models.append(train(s, candidate.take(pos)))
                masks.append(mask)
        return ShadowEnsemble(mode, tuple(models), np.array(masks), target_id, candidate.record_by_id(target_id))
    raise ValueError(f"unknown shadow mode {mode!r}")


# ----------------------------------------------------------- untargeted


def attack_features(schema, X: np.ndarray, y: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Rows f = (encoded x, one-hot y, q)."""
    return np.hstack([encode(schema, X), np.eye(schema.k)[np.asarray(y, dtype=np.int64)], Q])


def build_attack_dataset(ensemble: ShadowEnsemble, candidate: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Label every candidate record in/out under every shadow model.

    Returns (features, labels) with label 1 for "in"; rows are ordered by
    shadow model, then by candidate position.
    """
    if len(candidate) == 0:
        raise ValueError("empty candidate set")
    feats, labels = [], []
    for model, mask in zip(ensemble.models, ensemble.membership):
        q = model.predict_many(candidate.X)
        feats.append(attack_features(candidate.schema, candidate.X, candidate.y, q))
        labels.append(mask.astype(np.int64))
    return np.vstack(feats), np.concatenate(labels)


def export_attack_dataset(features: np.ndarray, labels: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(features.shape[1])] + ["membership"])
        for row, lab in zip(features, labels):
            w.writerow([repr(float(v)) for v in row] + ["in" if lab else "out"])


@dataclass(frozen=True)
class AttackNetSpec:
    hidden_units: int = 32
    activation: str = "relu"
    lr: float = 0.01
    epochs: int = 30
    seed: int = 0


@dataclass(frozen=True, eq=False)
class AttackClassifier:
    """Binary in/out network over attack feature rows."""

    net: AttackNetSpec
    params: tuple
    schema: object

    def membership_proba(self, features: np.ndarray) -> np.ndarray:
        """(p_out, p_in) per row."""
        return np.exp(mlp_log_proba(self.params, np.atleast_2d(features), self.net.activation))


def untargeted_attack_train(ensemble: ShadowEnsemble, candidate: Dataset,
                            net: AttackNetSpec = AttackNetSpec()) -> AttackClassifier:
    if ensemble.mode != "untargeted":
        raise ValueError("untargeted attack needs an untargeted ensemble")
    F, labels = build_attack_dataset(ensemble, candidate)
    params = fit_mlp(F, labels, 2, net.hidden_units, net.activation, net.lr, net.epochs, net.seed)
    return AttackClassifier(net, tuple(params), candidate.schema)


def untargeted_attack_decide(attack_clf: AttackClassifier, target: Record, q, target_id: int = -1) -> AttackVerdict:
    f = attack_features(attack_clf.schema, np.asarray([target.x]), [target.y], np.asarray([q]))
    p_out, p_in = attack_clf.membership_proba(f)[0]
    return decide_untargeted(float(p_in), float(p_out), target_id)


def decide_untargeted(p_in: float, p_out: float, target_id: int = -1) -> AttackVerdict:
    return AttackVerdict(target_id, "untargeted", H1 if p_in > p_out else H0, p_in - p_out)


# -------------------------------------------------------------- targeted


def kl_divergence(P, Q) -> float:
    """sum_i p_i ln(p_i / q_i); zero-probability terms of P contribute 0."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    if P.shape != Q.shape:
        raise ValueError(f"length mismatch: {P.shape} vs {Q.shape}")
    nz = P > 0
    if np.any(Q[nz] <= 0):
        return math.inf
    return float(np.sum(P[nz] * np.log(P[nz] / Q[nz])))


def _require_paired(ensemble: ShadowEnsemble) -> None:
    if ensemble.mode != "paired":
        raise ValueError("targeted attacks need a paired ensemble")


def distance_attack(ensemble: ShadowEnsemble, q) -> AttackVerdict:
    """H1 iff KL(q || mean out-prediction) > KL(q || mean in-prediction)."""
    _require_paired(ensemble)
    p_in = ensemble.in_predictions.mean(axis=0)
    p_out = ensemble.out_predictions.mean(axis=0)
    return decide_distance(q, p_in, p_out, ensemble.target_id)


def decide_distance(q, p_in, p_out, target_id=-1) -> AttackVerdict:
    gap = kl_divergence(q, p_out) - kl_divergence(q, p_in)
    return AttackVerdict(-1 if target_id is None else int(target_id), "distance", H1 if gap > 0 else H0, float(gap))


def bin_match_counts(predictions: np.ndarray, q) -> np.ndarray:
    """Per class, how many prediction rows share q's bin."""
    return (bin_index(predictions) == bin_index(np.asarray(q))[None, :]).sum(axis=0)


def frequency_attack(ensemble: ShadowEnsemble, q) -> AttackVerdict:
    """Add-one smoothed likelihood ratio prod_i (o_in_i + 1) / (o_out_i + 1)."""
    _require_paired(ensemble)
    o_in = bin_match_counts(ensemble.in_predictions, q)
    o_out = bin_match_counts(ensemble.out_predictions, q)
    return decide_frequency(o_in, o_out, ensemble.target_id)


def decide_frequency(o_in, o_out, target_id=-1) -> AttackVerdict:
    # integer products keep the comparison with 1 exact
    num = math.prod(int(a) + 1 for a in o_in)
    den = math.prod(int(b) + 1 for b in o_out)
    return AttackVerdict(-1 if target_id is None else int(target_id), "frequency",
                         H1 if num > den else H0, num / den)
