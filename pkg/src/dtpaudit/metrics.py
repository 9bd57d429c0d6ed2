"""Differential training privacy measurements and stability bounds.

All epsilons are on the natural-log scale: a record is eps-DTP when every
prediction ratio between A(T) and A(T minus t) lies in [e^-eps, e^eps]. The
raw maximum ratio is reported next to each epsilon.

Three prediction levels are supported when comparing two models:

``binned``  the published output (bin centres), used for reported metrics;
``proba``   the normalised probabilities before binning;
``score``   the unnormalised class scores the stability proofs bound
            (for naive Bayes, the joint p(y) * prod p(x_j|y)).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers import (
    PARAMETRIC,
    ClassifierSpec,
    TrainedClassifier,
    train,
)
from .data import Dataset, Feature, FeatureSchema, Record, bin_probability

LEVELS = ("binned", "proba", "score")
DEFAULT_SPACE_CAP = 10**6


class NoStabilityBound(ValueError):
    pass


class InfeasibleDTP(ValueError):
    pass


def outputs(c: TrainedClassifier, X, level: str = "binned") -> np.ndarray:
    if level == "binned":
        return c.predict_many(X)
    if level == "proba":
        return c.predict_proba(X)
    if level == "score":
        return c.scores(c._as_matrix(X))
    raise ValueError(f"unknown prediction level {level!r}")


def ratio_matrix(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Elementwise max(p/q, q/p); 1 where both are zero, inf where one is."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.maximum(p / q, q / p)
    r = np.where((p == 0) & (q == 0), 1.0, r)
    return np.where((p == 0) ^ (q == 0), np.inf, r)


def _ln(r: float) -> float:
    return math.inf if math.isinf(r) else math.log(r)


@dataclass(frozen=True)
class PdtpMeasurement:
    record_id: int
    epsilon: float
    per_label_ratios: tuple[float, ...]
    algorithm: str = ""
    level: str = "binned"

    @property
    def ratio(self) -> float:
        return max(self.per_label_ratios)

    def to_dict(self) -> dict:
        return {"record_id": self.record_id, "epsilon": self.epsilon, "ratio": self.ratio,
                "method": "pdtp", "algorithm": self.algorithm, "level": self.level}


@dataclass(frozen=True)
class DtpMeasurement:
    record_id: int | None
    epsilon: float
    method: str  # exhaustive | stability-bound | lipschitz-bound
    witness: tuple | None = None  # (x, y) achieving the maximum
    algorithm: str = ""

    @property
    def ratio(self) -> float:
        return math.exp(self.epsilon) if math.isfinite(self.epsilon) else math.inf

    def to_dict(self) -> dict:
        d = {"record_id": self.record_id, "epsilon": self.epsilon, "ratio": self.ratio,
             "method": self.method, "algorithm": self.algorithm}
        if self.witness is not None:
            d["witness"] = {"x": list(self.witness[0]), "y": self.witness[1]}
        return d


@dataclass(frozen=True)
class StabilityBound:
    algorithm: str
    delta: float
    parameters: dict = field(default_factory=dict)

    @property
    def ln_delta(self) -> float:
        return math.log(self.delta)

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "delta": self.delta, "ln_delta": self.ln_delta,
                "parameters": dict(self.parameters)}


def algorithm_tag(spec: ClassifierSpec) -> str:
    if spec.algorithm == "naive-bayes" and spec.laplace:
        return "naive-bayes+laplace"
    return spec.algorithm


# ------------------------------------------------------------------- PDTP


def pdtp_between(full: TrainedClassifier, loo: TrainedClassifier, record_id: int, record: Record,
                 level: str = "binned") -> PdtpMeasurement:
    """PDTP from an already trained A(T) and A(T minus t)."""
    p = outputs(full, [record.x], level)[0]
    q = outputs(loo, [record.x], level)[0]
    ratios = ratio_matrix(p, q)
    return PdtpMeasurement(int(record_id), _ln(float(ratios.max())), tuple(float(r) for r in ratios),
                           algorithm_tag(full.spec), level)


def measure_pdtp(spec: ClassifierSpec, t_set: Dataset, target_id: int, level: str = "binned",
                 full: TrainedClassifier | None = None) -> PdtpMeasurement:
    """Leave-one-out PDTP of one training record.

    Both models use the same spec and seed. ``full`` may be passed to reuse
    an already trained A(T).
    """
    if not t_set.has_id(target_id):
        raise KeyError(f"target {target_id} is not in the training set")
    record = t_set.record_by_id(target_id)
    if full is None:
        full = train(spec, t_set)
    loo = train(spec, t_set.without(target_id))
    return pdtp_between(full, loo, target_id, record, level)


def measure_pdtp_all(spec: ClassifierSpec, t_set: Dataset, level: str = "binned") -> list[PdtpMeasurement]:
    full = train(spec, t_set)
    return [measure_pdtp(spec, t_set, int(i), level, full=full) for i in t_set.ids]


# -------------------------------------------------------------------- DTP


def enumerate_space(schema: FeatureSchema, cap: int = DEFAULT_SPACE_CAP) -> np.ndarray:
    """Every feature vector of a finite space, in lexicographic order."""
    if not schema.all_categorical:
        raise InfeasibleDTP("exhaustive DTP infeasible: continuous features")
    if schema.space_size > cap:
        raise InfeasibleDTP(f"exhaustive DTP infeasible: |X^m| = {schema.space_size:.0f} exceeds cap {cap}")
    grid = itertools.product(*(range(v) for v in schema.cardinalities))
    return np.array(list(grid), dtype=np.float64).reshape(-1, schema.m)


def dtp_between(full: TrainedClassifier, loo: TrainedClassifier, record_id: int, level: str = "binned",
                space: np.ndarray | None = None, cap: int = DEFAULT_SPACE_CAP) -> DtpMeasurement:
    if space is None:
        space = enumerate_space(full.schema, cap)
    r = ratio_matrix(outputs(full, space, level), outputs(loo, space, level))
    i, y = np.unravel_index(int(np.argmax(r)), r.shape)
    witness = (tuple(float(v) for v in space[i]), int(y))
    return DtpMeasurement(int(record_id), _ln(float(r[i, y])), "exhaustive", witness, algorithm_tag(full.spec))


def measure_dtp_exhaustive(spec: ClassifierSpec, t_set: Dataset, target_id: int, level: str = "binned",
                           cap: int = DEFAULT_SPACE_CAP) -> DtpMeasurement:
    """Brute-force DTP over every (x, y) of a finite feature space."""
    space = enumerate_space(t_set.schema, cap)
    if not t_set.has_id(target_id):
        raise KeyError(f"target {target_id} is not in the training set")
    full = train(spec, t_set)
    loo = train(spec, t_set.without(target_id))
    return dtp_between(full, loo, target_id, level, space)


# -------------------------------------------------------------- stability


def stability_bound(spec: ClassifierSpec, t_set: Dataset) -> StabilityBound:
    """Closed-form training-stability constant delta for ``spec`` on ``t_set``."""
    alg = spec.algorithm
    if alg in ("bayes-inference", "random-decision-trees"):
        params = {"K": spec.n_trees} if alg == "random-decision-trees" else {}
        return StabilityBound(alg, 4.0 / 3.0, params)
    if alg == "lsq":
        size = len(spec.feature_set)
        return StabilityBound(alg, (4.0 / 3.0) ** size, {"feature_count": size})
    if alg == "naive-bayes":
        n = len(t_set)
        m = t_set.schema.m
        counts = t_set.class_counts()
        present = counts[counts > 0]
        n_min = int(present.min()) if len(present) else 0
        if n < 2 or n_min < 2:
            raise NoStabilityBound(f"naive Bayes bound needs n >= 2 and n_ymin >= 2 (n={n}, n_ymin={n_min})")
        if spec.laplace:
            v = max(t_set.schema.cardinalities)
            delta = ((n_min + v) / n_min) ** (m - 1) * n / (n - 1)
            return StabilityBound("naive-bayes+laplace", delta, {"m": m, "n": n, "n_ymin": n_min, "v": v})
        delta = (n_min / (n_min - 1)) ** (m - 1) * n / (n - 1)
        return StabilityBound("naive-bayes", delta, {"m": m, "n": n, "n_ymin": n_min})
    raise NoStabilityBound(f"no analytic stability bound for {alg}")


def dtp_from_stability(pdtp: PdtpMeasurement, bound: StabilityBound) -> DtpMeasurement:
    """DTP epsilon = max(PDTP epsilon, ln delta) for a training-stable algorithm."""
    if pdtp.algorithm and pdtp.algorithm != bound.algorithm:
        raise ValueError(f"bound for {bound.algorithm} does not apply to {pdtp.algorithm}")
    return DtpMeasurement(pdtp.record_id, max(pdtp.epsilon, bound.ln_delta), "stability-bound",
                          algorithm=bound.algorithm)


def dtp_lipschitz_bound(L: float, c_full: TrainedClassifier, c_loo: list[TrainedClassifier]) -> DtpMeasurement:
    """L * max_t ||u_T - u_(T minus t)||_inf, for log-probability outputs."""
    if L < 0:
        raise ValueError("Lipschitz constant must be non-negative")
    u = c_full.param_vector
    if u is None:
        raise ValueError(f"{c_full.spec.algorithm} has no parameter vector")
    worst = 0.0
    for c in c_loo:
        v = c.param_vector
        if v is None or v.shape != u.shape:
            raise ValueError("leave-one-out models must expose parameter vectors of equal length")
        worst = max(worst, float(np.abs(u - v).max()))
    return DtpMeasurement(None, L * worst, "lipschitz-bound", algorithm=c_full.spec.algorithm)


def lipschitz_dtp(spec: ClassifierSpec, t_set: Dataset, L: float) -> DtpMeasurement:
    if spec.algorithm not in PARAMETRIC:
        raise ValueError(f"{spec.algorithm} has no parameter vector")
    full = train(spec, t_set)
    return dtp_lipschitz_bound(L, full, [train(spec, t_set.without(int(i))) for i in t_set.ids])


# -------------------------------------------------------- k-NN counterexample


@dataclass(frozen=True)
class KnnCounterexample:
    training_set: Dataset
    target_id: int
    probe: Record
    direct_raw: tuple[float, float]  # p(y_t | x_t) with / without t
    indirect_raw: tuple[float, float]  # p(y' | x') with / without t
    direct_binned_ratio: float
    indirect_binned_ratio: float

    @property
    def direct_raw_ratio(self) -> float:
        a, b = self.direct_raw
        return a / b

    def describe(self) -> str:
        return (
            f"1-NN, target at x={self.training_set.record_by_id(self.target_id).x}: "
            f"direct p(y_t|x_t) {self.direct_raw[0]:g} -> {self.direct_raw[1]:g} (ratio {self.direct_raw_ratio:g}); "
            f"probe x'={self.probe.x}: p(y'|x') {self.indirect_raw[0]:g} -> {self.indirect_raw[1]:g}, "
            f"binned ratio {self.indirect_binned_ratio:g}. No finite delta bounds the raw indirect ratio."
        )


def knn_counterexample() -> KnnCounterexample:
    """1-NN on a line: removing t leaves its own prediction intact but flips x'.

    x1=0.15 (y=0), t at 0.20 (y=0), x2=0.40 (y=1), probe x'=0.29 (y'=0).
    Without t, x_t's nearest neighbour is x1 (same label); with t, x' is
    nearest to t, without it x' is nearest to x2.
    """
    schema = FeatureSchema((Feature("u", "numeric", low=0.0, high=1.0),), ("0", "1"))
    T = Dataset(schema, [[0.20], [0.15], [0.40]], [0, 0, 1], ids=[0, 1, 2])
    target_id = 0
    probe = Record((0.29,), 0)
    spec = ClassifierSpec("knn", k=1)
    full = train(spec, T)
    loo = train(spec, T.without(target_id))
    t = T.record_by_id(target_id)
    pd_full = full.predict_proba(t.x)[0][t.y]
    pd_loo = loo.predict_proba(t.x)[0][t.y]
    pi_full = full.predict_proba(probe.x)[0][probe.y]
    pi_loo = loo.predict_proba(probe.x)[0][probe.y]
    b = lambda v: bin_probability(v)  # noqa: E731
    return KnnCounterexample(
        T, target_id, probe,
        (float(pd_full), float(pd_loo)),
        (float(pi_full), float(pi_loo)),
        b(pd_full) / b(pd_loo),
        b(pi_full) / b(pi_loo),
    )
