import numpy as np
import pytest

from dtpaudit.classifiers import ClassifierSpec, train
from dtpaudit.classifiers.neural import RELU, TANH, fit_mlp, init_mlp, mlp_log_proba, sample_gradients
from dtpaudit.synth import synth_purchase


def loss(params, x, y, act):
    return -mlp_log_proba(params, x[None, :], {TANH: "tanh", RELU: "relu"}[act])[0, y]


@pytest.mark.parametrize("act", [TANH, RELU])
def test_gradients_match_finite_differences(act):
    rng = np.random.default_rng(0)
    h = 1e-5
    for trial in range(5):
        n_in, hidden, k = 4, 6, 3
        params = [p * 3 for p in init_mlp(n_in, hidden, k, seed=trial)]
        x = rng.normal(size=n_in)
        y = int(rng.integers(k))
        _, *grads = sample_gradients(x, y, *params, act)
        for p, g in zip(params, grads):
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                up = loss(params, x, y, act)
                p[idx] = old - h
                down = loss(params, x, y, act)
                p[idx] = old
                num = (up - down) / (2 * h)
                assert abs(num - g[idx]) <= 1e-4 * max(abs(num), abs(g[idx]), 1e-6) + 1e-9


def test_one_online_step_is_a_gradient_step():
    x = np.array([[1.0, 0.0, 1.0]])
    y = np.array([2])
    start = init_mlp(3, 5, 3, seed=4)
    _, *grads = sample_gradients(x[0], 2, *start, TANH)
    after = fit_mlp(x, y, 3, 5, "tanh", lr=0.1, epochs=1, seed=4)
    for p0, g, p1 in zip(start, grads, after):
        np.testing.assert_allclose(p1, p0 - 0.1 * g, rtol=0, atol=1e-14)


def test_mlp_is_deterministic_per_seed():
    d = synth_purchase(50, 8, 3, seed=1)
    a = train(ClassifierSpec("mlp", seed=3, epochs=5), d)
    b = train(ClassifierSpec("mlp", seed=3, epochs=5), d)
    c = train(ClassifierSpec("mlp", seed=4, epochs=5), d)
    np.testing.assert_array_equal(a.param_vector, b.param_vector)
    assert not np.array_equal(a.param_vector, c.param_vector)


def test_init_bounds():
    W1, b1, W2, b2 = init_mlp(16, 4, 2, seed=0)
    assert np.abs(W1).max() <= 0.25 and np.abs(b1).max() <= 0.25
    assert np.abs(W2).max() <= 0.5 and np.abs(b2).max() <= 0.5


def test_mlp_can_overfit():
    d = synth_purchase(100, 20, 4, seed=0)
    c = train(ClassifierSpec("mlp", epochs=30), d)
    assert c.accuracy(d) > 0.95


def test_logistic_regression_learns_and_is_seed_free():
    d = synth_purchase(100, 10, 2, seed=2)
    a = train(ClassifierSpec("logistic-regression", lr=0.5, epochs=200, seed=1), d)
    b = train(ClassifierSpec("logistic-regression", lr=0.5, epochs=200, seed=2), d)
    np.testing.assert_array_equal(a.param_vector, b.param_vector)
    assert a.accuracy(d) > 0.8
    assert a.param_vector.shape == (2 * 10 + 2,)
