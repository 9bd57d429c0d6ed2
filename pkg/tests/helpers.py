import numpy as np

from dtpaudit.data import Dataset, Feature, FeatureSchema


def random_categorical(rng, n_max=30, m_max=3, k=2, card_max=2, n_min=2):
    """Random all-categorical dataset with small cardinalities."""
    m = int(rng.integers(1, m_max + 1))
    cards = [int(rng.integers(2, card_max + 1)) for _ in range(m)]
    n = int(rng.integers(n_min, n_max + 1))
    schema = FeatureSchema(
        tuple(Feature(f"f{j}", "categorical", tuple(str(v) for v in range(c))) for j, c in enumerate(cards)),
        tuple(f"c{i}" for i in range(k)),
    )
    X = np.column_stack([rng.integers(0, c, n) for c in cards])
    y = rng.integers(0, k, n)
    return Dataset(schema, X, y)


def as_lists(d):
    return [tuple(int(v) for v in row) for row in d.X], [int(v) for v in d.y]


def stability_violations(spec, d, train, bound_delta, tol=1e-12):
    """Count (x, y) cells where the raw score ratio p_T / p_{T minus t}
    exceeds max(delta, pointwise ratio at t), over every t in ``d``.

    Raw means unnormalised class scores. Records whose pointwise raw
    prediction is zero under either model are skipped (the stability
    definition's precondition). Returns (violations, records checked).
    """
    from dtpaudit.metrics import enumerate_space

    space = enumerate_space(d.schema)
    full = train(spec, d)
    f = full.scores(space)
    violations = checked = 0
    for pos, t in enumerate(d.ids.tolist()):
        g = train(spec, d.without(t)).scores(space)
        i = int(np.flatnonzero(np.all(space == d.X[pos], axis=1))[0])
        a, b = f[i, d.y[pos]], g[i, d.y[pos]]
        if a <= 0 or b <= 0:
            continue
        checked += 1
        gamma = max(bound_delta, a / b)
        both = (f > 0) & (g > 0)
        violations += int(np.sum(f[both] > gamma * g[both] * (1 + tol)))
        violations += int(np.sum((f > 0) & (g == 0)))
    return violations, checked
