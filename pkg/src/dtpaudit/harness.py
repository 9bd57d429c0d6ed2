"""Evaluation protocol: repeated half splits, per-target attack accuracy,
PDTP averaging and correlation, DTP reduction and prediction-variation runs."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .attacks import (
    ATTACKS,
    AttackNetSpec,
    build_shadows,
    distance_attack,
    frequency_attack,
    untargeted_attack_decide,
    untargeted_attack_train,
)
from .classifiers import ClassifierSpec, train
from .data import N_BINS, Dataset, Record, bin_index, sample_subset, split_half
from .metrics import measure_pdtp, pdtp_between
from .seeding import derive_seed

log = logging.getLogger(__name__)

REPORT_VERSION = 1


# ------------------------------------------------------------ statistics


def pearson(xs, ys) -> tuple[float, float]:
    """Pearson rho and two-sided p-value of the t test with n-2 dof."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("pearson needs two vectors of equal length")
    n = len(x)
    if n < 3:
        raise ValueError("pearson needs at least 3 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation undefined: constant input")
    rho = float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, float(2.0 * stats.t.sf(abs(t), n - 2))


def classification_summary(decisions: np.ndarray, truth: np.ndarray) -> dict:
    """Accuracy, precision, recall and F1 with "member" as the positive class."""
    decisions = np.asarray(decisions, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    tp = int(np.sum(decisions & truth))
    fp = int(np.sum(decisions & ~truth))
    fn = int(np.sum(~decisions & truth))
    acc = float(np.mean(decisions == truth)) if len(truth) else float("nan")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"accuracy": acc, "precision": precision, "recall": recall, "f1": f1}


# -------------------------------------------------------------- protocol


@dataclass(frozen=True)
class ProtocolConfig:
    classifier: ClassifierSpec
    iterations: int = 100
    pdtp_iterations: int = 10
    targets: int = 100
    attacks: tuple[str, ...] = ("distance",)
    paired_shadows: int = 5
    untargeted_shadows: int = 20
    attack_net: AttackNetSpec = AttackNetSpec()
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "attacks", tuple(self.attacks))
        if self.iterations <= 0 or self.targets <= 0:
            raise ValueError("iterations and targets must be positive")
        if not 0 <= self.pdtp_iterations <= self.iterations:
            raise ValueError("pdtp_iterations must lie in [0, iterations]")
        if not self.attacks:
            raise ValueError("at least one attack is needed")
        for a in self.attacks:
            if a not in ATTACKS:
                raise ValueError(f"unknown attack {a!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classifier"] = self.classifier.to_dict()
        d["attacks"] = list(self.attacks)
        d.pop("workers")  # does not affect results
        return d

    @classmethod
    def from_dict(cls, d: dict, classifier: ClassifierSpec | None = None) -> "ProtocolConfig":
        d = dict(d)
        if classifier is not None:
            d["classifier"] = classifier
        elif isinstance(d.get("classifier"), dict):
            d["classifier"] = ClassifierSpec.from_dict(d["classifier"])
        if isinstance(d.get("attack_net"), dict):
            d["attack_net"] = AttackNetSpec(**d["attack_net"])
        if "attacks" in d:
            d["attacks"] = tuple(d["attacks"])
        return cls(**d)


@dataclass
class TargetResult:
    record_id: int
    pdtp: list[float] = field(default_factory=list)  # epsilon per measured iteration
    correct: dict = field(default_factory=dict)  # attack -> count
    verdicts: int = 0

    @property
    def avg_pdtp(self) -> float:
        return float(np.mean(self.pdtp)) if self.pdtp else float("nan")

    @property
    def avg_pdtp_ratio(self) -> float:
        return float(np.mean(np.exp(self.pdtp))) if self.pdtp else float("nan")

    def accuracy(self, attack: str) -> float:
        return self.correct.get(attack, 0) / self.verdicts if self.verdicts else float("nan")


@dataclass
class ExperimentReport:
    config: dict
    n_candidates: int
    targets: list[TargetResult]
    attacks: tuple[str, ...]
    aggregates: dict  # attack -> summary dict
    max_accuracy_correlation: dict
    model_accuracy: dict
    notes: list[str]

    def per_target_rows(self) -> list[dict]:
        rows = []
        for t in self.targets:
            row = {"record_id": t.record_id, "avg_pdtp": t.avg_pdtp, "avg_pdtp_ratio": t.avg_pdtp_ratio}
            accs = [t.accuracy(a) for a in self.attacks]
            for a, acc in zip(self.attacks, accs):
                row[f"accuracy_{a}"] = acc
            row["max_accuracy"] = max(accs)
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return _clean({
            "report_version": REPORT_VERSION,
            "config": self.config,
            "n_candidates": self.n_candidates,
            "attacks": list(self.attacks),
            "aggregates": self.aggregates,
            "max_accuracy_correlation": self.max_accuracy_correlation,
            "model_accuracy": self.model_accuracy,
            "average_pdtp": float(np.nanmean([t.avg_pdtp for t in self.targets])),
            "per_target": [
                dict(row, pdtp_measurements=t.pdtp, verdicts=t.verdicts)
                for row, t in zip(self.per_target_rows(), self.targets)
            ],
            "notes": self.notes,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        rows = self.per_target_rows()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
        return buf.getvalue()

    def summary_table(self) -> str:
        """Plain-text table with one row per attack."""
        head = ("Attack", "Train Acc", "Test Acc", "Attack Acc", "Precision", "Recall", "F1",
                "Avg PDTP", "Corr w/ PDTP", "p-Value")
        avg = float(np.nanmean([t.avg_pdtp for t in self.targets]))
        lines = [" | ".join(f"{h:>12}" for h in head)]
        for a in self.attacks:
            s = self.aggregates[a]
            cells = (a, self.model_accuracy["train"], self.model_accuracy["test"], s["accuracy"],
                     s["precision"], s["recall"], s["f1"], avg, s["pearson_rho"], s["p_value"])
            lines.append(" | ".join(f"{_fmt(c, table=True):>12}" for c in cells))
        m = self.max_accuracy_correlation
        lines.append(f"max per-target accuracy: rho={_fmt(m['pearson_rho'], True)} p={_fmt(m['p_value'], True)}")
        return "\n".join(lines) + "\n"


def _fmt(v, table: bool = False) -> str:
    if isinstance(v, str):
        return v
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "nan"
    if isinstance(v, float):
        if table:
            return f"{v:.3e}" if 0 < abs(v) < 1e-3 else f"{v:.4f}"
        return repr(v)
    return str(v)


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) or math.isinf(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _paired_for_target(args):
    candidate, spec, n_models, train_size, seed, tid = args
    ens = build_shadows(candidate, spec, "paired", n_models, train_size, seed, tid)
    ens.target_predictions  # noqa: B018  # warm the cache inside the worker
    return ens


def _pool_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def select_targets(candidate: Dataset, count: int, seed) -> np.ndarray:
    if count > len(candidate):
        raise ValueError(f"cannot select {count} targets from {len(candidate)} records")
    rng = np.random.default_rng(derive_seed(seed, "targets"))
    return np.sort(rng.choice(candidate.ids, size=count, replace=False))


def run_protocol(candidate: Dataset, cfg: ProtocolConfig) -> ExperimentReport:
    """Repeated equal-split membership attacks with PDTP bookkeeping.

    Each iteration splits D into D1/D2, trains the target model on each half
    in turn and attacks every target against both, so every target is a
    member in exactly half of its verdicts. During the first
    ``pdtp_iterations`` iterations each target's PDTP is measured against the
    half that contains it.
    """
    if len(candidate) % 2:
        raise ValueError("candidate set size must be even")
    spec = cfg.classifier
    half = len(candidate) // 2
    target_ids = select_targets(candidate, cfg.targets, cfg.seed)
    results = {int(t): TargetResult(int(t), correct={a: 0 for a in cfg.attacks}) for t in target_ids}
    records = {int(t): candidate.record_by_id(int(t)) for t in target_ids}
    target_X = np.array([records[int(t)].x for t in target_ids])

    paired = {}
    if {"distance", "frequency"} & set(cfg.attacks):
        jobs = [(candidate, spec, cfg.paired_shadows, half, derive_seed(cfg.seed, "paired", int(t)), int(t))
                for t in target_ids]
        for t, ens in zip(target_ids, _pool_map(_paired_for_target, jobs, cfg.workers)):
            paired[int(t)] = ens
        log.info("trained %d paired shadow ensembles", len(paired))
    attack_clf = None
    if "untargeted" in cfg.attacks:
        ens = build_shadows(candidate, spec, "untargeted", cfg.untargeted_shadows, half,
                            derive_seed(cfg.seed, "untargeted"))
        net = AttackNetSpec(**{**asdict(cfg.attack_net), "seed": derive_seed(cfg.seed, "attack-net")})
        attack_clf = untargeted_attack_train(ens, candidate, net)
        log.info("trained untargeted attack classifier")

    decisions = {a: [] for a in cfg.attacks}
    truth = []
    train_acc, test_acc = [], []
    for it in range(cfg.iterations):
        D1, D2 = split_half(candidate, derive_seed(cfg.seed, "split", it))
        for role, (T, other) in enumerate(((D1, D2), (D2, D1))):
            spec_i = spec.with_seed(derive_seed(cfg.seed, "target-model", it, role))
            c = train(spec_i, T)
            train_acc.append(c.accuracy(T))
            test_acc.append(c.accuracy(other))
            Q = c.predict_many(target_X)
            member = np.isin(target_ids, T.ids)
            for i, tid in enumerate(target_ids.tolist()):
                res = results[tid]
                res.verdicts += 1
                truth.append(bool(member[i]))
                for a in cfg.attacks:
                    if a == "distance":
                        v = distance_attack(paired[tid], Q[i])
                    elif a == "frequency":
                        v = frequency_attack(paired[tid], Q[i])
                    else:
                        v = untargeted_attack_decide(attack_clf, records[tid], Q[i], tid)
                    decisions[a].append(v.member)
                    res.correct[a] += int(v.member == bool(member[i]))
                if member[i] and it < cfg.pdtp_iterations:
                    res.pdtp.append(measure_pdtp(spec_i, T, tid, full=c).epsilon)
        log.info("iteration %d/%d done", it + 1, cfg.iterations)

    targets = [results[int(t)] for t in target_ids]
    avg = np.array([t.avg_pdtp for t in targets])
    notes = ["targets are a fixed list sampled once per run; per-target accuracy is over all iterations"]
    aggregates = {}
    accs_by_attack = []
    for a in cfg.attacks:
        s = classification_summary(np.array(decisions[a]), np.array(truth))
        accs = np.array([t.accuracy(a) for t in targets])
        accs_by_attack.append(accs)
        s["pearson_rho"], s["p_value"] = _safe_pearson(avg, accs, notes, a)
        aggregates[a] = s
    max_acc = np.max(np.vstack(accs_by_attack), axis=0)
    rho, p = _safe_pearson(avg, max_acc, notes, "max accuracy")
    return ExperimentReport(
        config=cfg.to_dict(),
        n_candidates=len(candidate),
        targets=targets,
        attacks=cfg.attacks,
        aggregates=aggregates,
        max_accuracy_correlation={"pearson_rho": rho, "p_value": p},
        model_accuracy={"train": float(np.mean(train_acc)), "test": float(np.mean(test_acc))},
        notes=notes,
    )


def _safe_pearson(x, y, notes, what):
    ok = ~np.isnan(x)
    try:
        return pearson(x[ok], y[ok])
    except ValueError as exc:
        notes.append(f"{what}: {exc}")
        return float("nan"), float("nan")


# ---------------------------------------------------------- DTP reduction


@dataclass(frozen=True)
class ReductionResult:
    initial_max: float
    initial_argmax: int
    trajectory: tuple  # (removed_id, max PDTP after removal)

    def to_csv(self) -> str:
        lines = ["step,removed_id,max_pdtp_after", f"0,,{self.initial_max!r}"]
        lines += [f"{i},{rid},{eps!r}" for i, (rid, eps) in enumerate(self.trajectory, start=1)]
        return "\n".join(lines) + "\n"


def _max_pdtp(spec: ClassifierSpec, t_set: Dataset, level: str) -> tuple[float, int]:
    full = train(spec, t_set)
    best, best_id = -1.0, -1
    for rid in t_set.ids.tolist():  # ascending position order; ties keep the lowest id
        loo = train(spec, t_set.without(rid))
        eps = pdtp_between(full, loo, rid, t_set.record_by_id(rid), level).epsilon
        if eps > best or (eps == best and rid < best_id):
            best, best_id = eps, rid
    return best, best_id


def reduce_dtp(t_set: Dataset, spec: ClassifierSpec, removals: int, level: str = "binned") -> ReductionResult:
    """Greedily drop the highest-PDTP record, recomputing every PDTP after each drop."""
    if not 0 <= removals < len(t_set):
        raise ValueError(f"removals must be in [0, {len(t_set) - 1}]")
    current = t_set
    best, best_id = _max_pdtp(spec, current, level)
    initial = (best, best_id)
    traj = []
    for _ in range(removals):
        current = current.without(best_id)
        if len(current) < 2:
            raise ValueError("reduction reached a training set too small to measure")
        removed = best_id
        best, best_id = _max_pdtp(spec, current, level)
        traj.append((removed, best))
    return ReductionResult(initial[0], initial[1], tuple(traj))


# -------------------------------------------------------- prediction variation


@dataclass(frozen=True)
class VariationResult:
    mode: str
    label: int
    values: tuple[float, ...]  # binned p(label | probe) per run

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(bin_index(np.array(self.values)), minlength=N_BINS)

    def to_dict(self) -> dict:
        c = self.counts
        return {"mode": self.mode, "label": self.label, "runs": len(self.values),
                "histogram": {f"{(i + 0.5) / N_BINS:.3f}": int(c[i]) for i in np.flatnonzero(c)}}


def prediction_variation(candidate: Dataset, spec: ClassifierSpec, mode: str, runs: int, probe: Record,
                         label: int | None = None, sample_size: int | None = None, seed: int = 0) -> VariationResult:
    """Spread of one prediction across retrainings.

    random-init keeps the training set (the whole candidate set) and varies
    the seed; random-sampling keeps ``spec.seed`` and draws a fresh training
    set of ``sample_size`` records (default half the candidates) per run.
    """
    if runs < 2:
        raise ValueError("need at least 2 runs")
    label = probe.y if label is None else int(label)
    values = []
    if mode == "random-init":
        if spec.deterministic:
            raise ValueError(f"no initialization randomness: {spec.algorithm} is deterministic")
        for r in range(runs):
            c = train(spec.with_seed(derive_seed(seed, "init", r)), candidate)
            values.append(float(c.predict(np.asarray(probe.x))[label]))
    elif mode == "random-sampling":
        size = sample_size or len(candidate) // 2
        for r in range(runs):
            T = sample_subset(candidate, size, derive_seed(seed, "sample", r))
            values.append(float(train(spec, T).predict(np.asarray(probe.x))[label]))
    else:
        raise ValueError(f"unknown variation mode {mode!r}")
    return VariationResult(mode, label, tuple(values))
