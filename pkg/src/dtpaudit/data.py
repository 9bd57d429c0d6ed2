"""Records, datasets, sampling, CSV ingestion and prediction binning."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

N_BINS = 100
BIN_CENTERS = (np.arange(N_BINS) + 0.5) / N_BINS


class SchemaError(ValueError):
    """Raised when data does not conform to a FeatureSchema."""


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str  # "categorical" or "numeric"
    values: tuple[str, ...] = ()
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind == "categorical":
            if len(self.values) < 2:
                raise SchemaError(f"categorical feature {self.name!r} needs >= 2 values")
            if len(set(self.values)) != len(self.values):
                raise SchemaError(f"duplicate values in feature {self.name!r}")
        elif self.kind == "numeric":
            if not (math.isfinite(self.low) and math.isfinite(self.high)) or self.low >= self.high:
                raise SchemaError(f"numeric feature {self.name!r} needs finite low < high")
        else:
            raise SchemaError(f"unknown feature kind {self.kind!r}")

    @property
    def categorical(self) -> bool:
        return self.kind == "categorical"

    @property
    def cardinality(self) -> int | None:
        return len(self.values) if self.categorical else None

    @classmethod
    def binary(cls, name: str) -> "Feature":
        return cls(name, "categorical", ("0", "1"))

    def to_dict(self) -> dict:
        if self.categorical:
            return {"name": self.name, "kind": "categorical", "values": list(self.values)}
        return {"name": self.name, "kind": "numeric", "min": self.low, "max": self.high}

    @classmethod
    def from_dict(cls, d: dict) -> "Feature":
        if d["kind"] == "categorical":
            return cls(d["name"], "categorical", tuple(str(v) for v in d["values"]))
        return cls(d["name"], "numeric", low=float(d["min"]), high=float(d["max"]))


@dataclass(frozen=True)
class FeatureSchema:
    """Feature space X^m and label set Y."""

    features: tuple[Feature, ...]
    class_labels: tuple[str, ...]
    class_name: str = "class"

    def __post_init__(self):
        if len(self.features) < 1:
            raise SchemaError("schema needs at least one feature")
        if len(self.class_labels) < 2:
            raise SchemaError("schema needs at least two class labels")
        if len(set(self.class_labels)) != len(self.class_labels):
            raise SchemaError("duplicate class labels")

    @property
    def m(self) -> int:
        return len(self.features)

    @property
    def k(self) -> int:
        return len(self.class_labels)

    @property
    def all_categorical(self) -> bool:
        return all(f.categorical for f in self.features)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        if not self.all_categorical:
            raise SchemaError("schema has numeric features")
        return tuple(len(f.values) for f in self.features)

    @property
    def space_size(self) -> float:
        """|X^m| for all-categorical schemas, inf otherwise."""
        if not self.all_categorical:
            return math.inf
        return float(math.prod(self.cardinalities))

    def check_row(self, x: Sequence[float]) -> None:
        if len(x) != self.m:
            raise SchemaError(f"expected {self.m} features, got {len(x)}")
        for f, v in zip(self.features, x):
            if f.categorical:
                if v != int(v) or not 0 <= v < len(f.values):
                    raise SchemaError(f"value {v!r} out of range for feature {f.name!r}")
            elif not (f.low <= v <= f.high):
                raise SchemaError(f"value {v!r} outside [{f.low}, {f.high}] for {f.name!r}")

    def to_dict(self) -> dict:
        return {
            "features": [f.to_dict() for f in self.features],
            "class_name": self.class_name,
            "class_labels": list(self.class_labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        return cls(
            tuple(Feature.from_dict(f) for f in d["features"]),
            tuple(str(c) for c in d["class_labels"]),
            d.get("class_name", "class"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSchema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class Record:
    """One labeled example. Categorical values are stored as value indices."""

    x: tuple[float, ...]
    y: int

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", int(self.y))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered multiset of records with stable per-record ids.

    ``X`` holds one row per record: categorical features as value indices,
    numeric features as raw values. The arrays are read-only.
    """

    schema: FeatureSchema
    X: np.ndarray
    y: np.ndarray
    ids: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64).reshape(-1, self.schema.m)
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        ids = np.arange(len(y)) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if not (len(X) == len(y) == len(ids)):
            raise SchemaError("X, y and ids lengths differ")
        if len(np.unique(ids)) != len(ids):
            raise SchemaError("record ids must be unique")
        if len(y) and (y.min() < 0 or y.max() >= self.schema.k):
            raise SchemaError("class label index out of range")
        for j, f in enumerate(self.schema.features):
            col = X[:, j]
            if f.categorical:
                if np.any(col != np.floor(col)) or np.any(col < 0) or np.any(col >= len(f.values)):
                    raise SchemaError(f"categorical value out of range in {f.name!r}")
            elif np.any(col < f.low) or np.any(col > f.high):
                raise SchemaError(f"numeric value outside bounds in {f.name!r}")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "ids", _frozen(ids))

    def __len__(self) -> int:
        return len(self.y)

    def __iter__(self):
        for i in range(len(self)):
            yield self.record(i)

    @property
    def n(self) -> int:
        return len(self.y)

    def record(self, i: int) -> Record:
        return Record(tuple(self.X[i]), int(self.y[i]))

    def position(self, record_id: int) -> int:
        hit = np.flatnonzero(self.ids == record_id)
        if len(hit) == 0:
            raise KeyError(f"record id {record_id} not in dataset")
        return int(hit[0])

    def record_by_id(self, record_id: int) -> Record:
        return self.record(self.position(record_id))

    def has_id(self, record_id: int) -> bool:
        return bool(np.any(self.ids == record_id))

    def contains(self, record: Record) -> bool:
        """Value membership: some row equals (record.x, record.y)."""
        if len(self) == 0:
            return False
        same = np.all(self.X == np.asarray(record.x), axis=1) & (self.y == record.y)
        return bool(same.any())

    def take(self, positions: Iterable[int]) -> "Dataset":
        pos = np.asarray(list(positions), dtype=np.int64)
        return Dataset(self.schema, self.X[pos], self.y[pos], self.ids[pos])

    def without(self, record_id: int) -> "Dataset":
        keep = self.ids != record_id
        if keep.all():
            raise KeyError(f"record id {record_id} not in dataset")
        return Dataset(self.schema, self.X[keep], self.y[keep], self.ids[keep])

    def with_ids(self, ids: Iterable[int]) -> "Dataset":
        """Subset selected by record id, kept in this dataset's order."""
        mask = np.isin(self.ids, np.fromiter(ids, dtype=np.int64))
        return Dataset(self.schema, self.X[mask], self.y[mask], self.ids[mask])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.schema.k)

    def fingerprint(self) -> str:
        """Provenance tag derived from the member ids."""
        import hashlib

        return hashlib.sha1(np.sort(self.ids).tobytes()).hexdigest()[:16]


# ---------------------------------------------------------------- sampling


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def sample_subset(d: Dataset, size: int, seed) -> Dataset:
    """Uniform random subset without replacement, kept in dataset order."""
    if not 0 < size <= len(d):
        raise ValueError(f"sample size {size} out of range for dataset of {len(d)}")
    pos = np.sort(_rng(seed).choice(len(d), size=size, replace=False))
    return d.take(pos)


def split_half(d: Dataset, seed) -> tuple[Dataset, Dataset]:
    if len(d) % 2:
        raise ValueError(f"cannot split a dataset of odd size {len(d)} into equal halves")
    perm = _rng(seed).permutation(len(d))
    half = len(d) // 2
    return d.take(np.sort(perm[:half])), d.take(np.sort(perm[half:]))


# ----------------------------------------------------------------- binning


def bin_index(p):
    """Index of the 0.01-wide bin holding p; the top bin is closed."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probability outside [0, 1]")
    # the 1e-9 slack keeps decimal inputs such as 0.29 in their nominal bin
    return np.minimum(np.floor(p * N_BINS + 1e-9), N_BINS - 1).astype(np.int64)


def bin_probability(p):
    """Return the centre of the bin containing ``p`` (scalar or array)."""
    idx = bin_index(p)
    out = (idx + 0.5) / N_BINS
    return float(out) if np.ndim(out) == 0 else out


def is_prediction_vector(v, k: int | None = None) -> bool:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or (k is not None and len(v) != k):
        return False
    idx = np.rint(v * N_BINS - 0.5)
    return bool(np.all((idx >= 0) & (idx < N_BINS)) and np.all((idx + 0.5) / N_BINS == v))


# ---------------------------------------------------------------- encoding


def encode(schema: FeatureSchema, X: np.ndarray) -> np.ndarray:
    """Numeric design matrix for NN / LR / k-NN.

    Numeric columns are min-max normalised with the schema bounds, binary
    categoricals stay a single 0/1 column, wider categoricals are one-hot.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    cols = []
    for j, f in enumerate(schema.features):
        col = X[:, j]
        if not f.categorical:
            cols.append(((col - f.low) / (f.high - f.low))[:, None])
        elif len(f.values) == 2:
            cols.append(col[:, None])
        else:
            cols.append(np.eye(len(f.values))[col.astype(np.int64)])
    return np.hstack(cols)


def encoded_width(schema: FeatureSchema) -> int:
    w = 0
    for f in schema.features:
        w += 1 if (not f.categorical or len(f.values) == 2) else len(f.values)
    return w


# --------------------------------------------------------------------- CSV


def load_csv(path: str | Path, schema: FeatureSchema, ignore_columns: Sequence[str] = ()) -> Dataset:
    """Read a header-first, class-last CSV file into a Dataset.

    Columns named in ``ignore_columns`` are dropped before the header is
    matched against the schema. Surrounding whitespace is stripped from
    every cell (UCI files put a space after each comma).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, skipinitialspace=True))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    keep = [i for i, h in enumerate(header) if h not in set(ignore_columns)]
    names = [header[i] for i in keep]
    expected = [f.name for f in schema.features] + [schema.class_name]
    if names != expected:
        raise SchemaError(f"{path}: header {names} does not match schema {expected}")
    label_index = {lab: i for i, lab in enumerate(schema.class_labels)}
    value_index = [
        {v: i for i, v in enumerate(f.values)} if f.categorical else None for f in schema.features
    ]
    X, y = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise SchemaError(f"{path}:{lineno}: malformed row ({len(row)} fields, expected {len(header)})")
        cells = [row[i].strip() for i in keep]
        label = cells[-1]
        if label not in label_index:
            raise SchemaError(f"{path}:{lineno}: unknown class label {label!r}")
        xs = []
        for f, lookup, cell in zip(schema.features, value_index, cells[:-1]):
            if lookup is not None:
                if cell not in lookup:
                    raise SchemaError(f"{path}:{lineno}: unknown categorical value {cell!r} for {f.name!r}")
                xs.append(lookup[cell])
            else:
                try:
                    v = float(cell)
                except ValueError:
                    raise SchemaError(f"{path}:{lineno}: non-numeric value {cell!r} for {f.name!r}") from None
                if not (f.low <= v <= f.high):
                    raise SchemaError(f"{path}:{lineno}: value {v} out of range for {f.name!r}")
                xs.append(v)
        X.append(xs)
        y.append(label_index[label])
    return Dataset(schema, np.array(X, dtype=np.float64).reshape(-1, schema.m), np.array(y, dtype=np.int64))


def _fmt_numeric(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def save_csv(d: Dataset, path: str | Path) -> None:
    schema = d.schema
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in schema.features] + [schema.class_name])
        for x, y in zip(d.X, d.y):
            cells = [
                f.values[int(v)] if f.categorical else _fmt_numeric(v) for f, v in zip(schema.features, x)
            ]
            w.writerow(cells + [schema.class_labels[int(y)]])


def adult_schema() -> FeatureSchema:
    """UCI Adult layout without the ``fnlwgt`` column (13 features).

    Missing values (``?``) are kept as their own category.
    """
    cat = lambda name, vals: Feature(name, "categorical", tuple(vals))  # noqa: E731
    num = lambda name, lo, hi: Feature(name, "numeric", low=lo, high=hi)  # noqa: E731
    features = (
        num("age", 17, 90),
        cat("workclass", ["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov", "Local-gov",
                          "State-gov", "Without-pay", "Never-worked", "?"]),
        cat("education", ["Bachelors", "Some-college", "11th", "HS-grad", "Prof-school", "Assoc-acdm",
                          "Assoc-voc", "9th", "7th-8th", "12th", "Masters", "1st-4th", "10th",
                          "Doctorate", "5th-6th", "Preschool"]),
        num("education-num", 1, 16),
        cat("marital-status", ["Married-civ-spouse", "Divorced", "Never-married", "Separated",
                               "Widowed", "Married-spouse-absent", "Married-AF-spouse"]),
        cat("occupation", ["Tech-support", "Craft-repair", "Other-service", "Sales", "Exec-managerial",
                           "Prof-specialty", "Handlers-cleaners", "Machine-op-inspct", "Adm-clerical",
                           "Farming-fishing", "Transport-moving", "Priv-house-serv", "Protective-serv",
                           "Armed-Forces", "?"]),
        cat("relationship", ["Wife", "Own-child", "Husband", "Not-in-family", "Other-relative",
                             "Unmarried"]),
        cat("race", ["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"]),
        cat("sex", ["Female", "Male"]),
        num("capital-gain", 0, 99999),
        num("capital-loss", 0, 4356),
        num("hours-per-week", 1, 99),
        cat("native-country", ["United-States", "Cambodia", "England", "Puerto-Rico", "Canada",
                               "Germany", "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece",
                               "South", "China", "Cuba", "Iran", "Honduras", "Philippines", "Italy",
                               "Poland", "Jamaica", "Vietnam", "Mexico", "Portugal", "Ireland",
                               "France", "Dominican-Republic", "Laos", "Ecuador", "Taiwan", "Haiti",
                               "Columbia", "Hungary", "Guatemala", "Nicaragua", "Scotland",
                               "Thailand", "Yugoslavia", "El-Salvador", "Trinadad&Tobago", "Peru",
                               "Hong", "Holand-Netherlands", "?"]),
    )
    return FeatureSchema(features, ("<=50K", ">50K"), class_name="income")


ADULT_IGNORED_COLUMNS = ("fnlwgt",)


def binary_schema(n_features: int, n_classes: int) -> FeatureSchema:
    return FeatureSchema(
        tuple(Feature.binary(f"f{j}") for j in range(n_features)),
        tuple(f"c{c}" for c in range(n_classes)),
    )
