"""Random decision trees with data-independent structure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset, FeatureSchema
from .base import ClassifierSpec, TrainedClassifier


@dataclass(frozen=True)
class Node:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0  # numeric split on the min-max normalised value
    children: tuple = ()
    leaf: int = -1


def random_tree(schema: FeatureSchema, depth: int, rng: np.random.Generator) -> tuple[Node, int]:
    """Grow a tree from the schema alone. Returns (root, number of leaves)."""
    counter = [0]

    def grow(level: int, untested: tuple[int, ...]) -> Node:
        if level == depth or not untested:
            counter[0] += 1
            return Node(leaf=counter[0] - 1)
        j = untested[rng.integers(len(untested))]
        rest = tuple(u for u in untested if u != j)
        f = schema.features[j]
        if f.categorical:
            return Node(feature=j, children=tuple(grow(level + 1, rest) for _ in f.values))
        thr = float(rng.uniform(0.0, 1.0))
        return Node(feature=j, threshold=thr, children=(grow(level + 1, rest), grow(level + 1, rest)))

    root = grow(0, tuple(range(schema.m)))
    return root, counter[0]


def route(node: Node, schema: FeatureSchema, X: np.ndarray) -> np.ndarray:
    """Leaf index reached by each row of X."""
    out = np.empty(len(X), dtype=np.int64)

    def walk(nd: Node, rows: np.ndarray):
        if len(rows) == 0:
            return
        if nd.feature < 0:
            out[rows] = nd.leaf
            return
        f = schema.features[nd.feature]
        col = X[rows, nd.feature]
        if f.categorical:
            branch = col.astype(np.int64)
        else:
            branch = ((col - f.low) / (f.high - f.low) >= nd.threshold).astype(np.int64)
        for b, child in enumerate(nd.children):
            walk(child, rows[branch == b])

    walk(node, np.arange(len(X)))
    return out


@dataclass(frozen=True, eq=False)
class RandomTreesClassifier(TrainedClassifier):
    """K random trees; leaf conditionals (count + 1) / (total + k).

    The aggregate score is the geometric mean of the per-tree leaf
    conditionals, exp(mean_j log p_j(y|x)), before normalisation.
    """

    trees: tuple  # roots
    leaf_probs: tuple  # per tree, (n_leaves, k)

    @classmethod
    def fit(cls, spec: ClassifierSpec, d: Dataset) -> "RandomTreesClassifier":
        rng = np.random.default_rng(spec.seed)
        k = d.schema.k
        roots, probs = [], []
        for _ in range(spec.n_trees):
            root, n_leaves = random_tree(d.schema, spec.depth, rng)
            counts = np.zeros((n_leaves, k))
            np.add.at(counts, (route(root, d.schema, d.X), d.y), 1.0)
            roots.append(root)
            probs.append((counts + 1.0) / (counts.sum(axis=1, keepdims=True) + k))
        return cls(spec, d.schema, tuple(roots), tuple(probs), training_set_id=d.fingerprint())

    def tree_probs(self, X) -> np.ndarray:
        """Per-tree leaf conditionals, shape (K, n, k)."""
        X = self._as_matrix(X)
        return np.stack([p[route(r, self.schema, X)] for r, p in zip(self.trees, self.leaf_probs)])

    def scores(self, X):
        return aggregate_geometric(self.tree_probs(X))


def aggregate_geometric(per_tree: np.ndarray) -> np.ndarray:
    """exp((1/K) sum_j log p_j) along the first axis."""
    per_tree = np.asarray(per_tree, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = np.exp(np.log(per_tree).mean(axis=0))
    # exp(log p) is not exact; where all trees agree return p itself
    same = np.all(per_tree == per_tree[0], axis=0)
    return np.where(same, per_tree[0], out)
