from fractions import Fraction

import numpy as np
import pytest

from dtpaudit.classifiers import (
    ClassifierSpec,
    IncompatibleSchema,
    KNNClassifier,
    RandomTreesClassifier,
    UndefinedCoefficient,
    aggregate_geometric,
    load_model,
    make_rigged,
    naive_bayes_feature_set,
    predict_knn,
    predict_lsq,
    predict_rdt,
    save_model,
    train,
)
from dtpaudit.data import Dataset, Feature, FeatureSchema, Record, binary_schema, is_prediction_vector
from dtpaudit.synth import synth_purchase

from helpers import as_lists, random_categorical
from oracles import naive_bayes


def one_feature(rows, labels, k=2):
    return Dataset(binary_schema(1, k), [[r] for r in rows], labels)


# ------------------------------------------------------------ naive Bayes


def test_nb_hand_example():
    d = one_feature([0, 0, 0], [0, 0, 1])
    c = train(ClassifierSpec("naive-bayes"), d)
    assert c.predict_proba([0])[0, 1] == pytest.approx(1 / 3, abs=1e-15)


def test_nb_laplace_conditional():
    d = one_feature([0, 0, 0, 1], [0, 0, 0, 1])
    c = train(ClassifierSpec("naive-bayes", laplace=True), d)
    # p(x=1 | y=0) = (0 + 1) / (3 + 2)
    assert c.conditionals[0][0, 1] == pytest.approx(0.2, abs=1e-15)


def test_nb_empty_class_after_removal():
    d = one_feature([0, 0, 1], [0, 0, 1])
    loo = d.without(2)
    plain = train(ClassifierSpec("naive-bayes"), loo)
    assert plain.prior[1] == 0.0
    assert plain.predict([1]).tolist() == [0.005, 0.005]
    smooth = train(ClassifierSpec("naive-bayes", laplace=True), loo)
    assert smooth.prior[1] == pytest.approx(1 / (2 + 2))


def test_nb_matches_oracle_on_random_data():
    rng = np.random.default_rng(4)
    for _ in range(30):
        d = random_categorical(rng, n_max=20, m_max=3, k=3, card_max=3)
        rows, labels = as_lists(d)
        oracle = naive_bayes(rows, labels, 3)
        c = train(ClassifierSpec("naive-bayes"), d)
        for x in rows[:5]:
            np.testing.assert_allclose(c.predict_proba(np.array(x))[0], [float(v) for v in oracle(x)], atol=1e-12)


def test_nb_requires_categorical():
    schema = FeatureSchema((Feature("u", "numeric", low=0, high=1),), ("a", "b"))
    with pytest.raises(IncompatibleSchema):
        train(ClassifierSpec("naive-bayes"), Dataset(schema, [[0.5]], [0]))


# ---------------------------------------------------------- Bayes inference


def test_bayes_inference_binned_output():
    d = one_feature([1, 1, 1], [0, 1, 1])
    c = train(ClassifierSpec("bayes-inference"), d)
    assert c.predict([1]).tolist() == [0.335, 0.665]
    assert c.predict([0]).tolist() == [0.005, 0.005]  # unseen x


def test_constant_classifier_ignores_input():
    d = one_feature([0, 1], [0, 1])
    c = train(ClassifierSpec("constant"), d)
    assert c.predict([0]).tolist() == c.predict([1]).tolist() == [0.505, 0.505]


@pytest.mark.parametrize("algorithm", ["bayes-inference", "naive-bayes", "random-decision-trees", "knn",
                                       "mlp", "logistic-regression"])
def test_outputs_are_bin_centres(algorithm):
    d = synth_purchase(40, 5, 3, seed=2)
    c = train(ClassifierSpec(algorithm, epochs=3), d)
    for row in c.predict_many(d.X):
        assert is_prediction_vector(row, k=3)


def test_query_width_is_checked():
    c = train(ClassifierSpec("naive-bayes"), one_feature([0, 1], [0, 1]))
    with pytest.raises(IncompatibleSchema):
        c.predict([0, 1])


# --------------------------------------------------------------------- LSQ


def test_lsq_reproduces_naive_bayes():
    rng = np.random.default_rng(8)
    checked = 0
    for _ in range(60):
        d = random_categorical(rng, n_max=200, m_max=3, k=3, card_max=3)
        fs = naive_bayes_feature_set(d.schema)
        lsq = train(ClassifierSpec("lsq", feature_set=fs), d)
        nb = train(ClassifierSpec("naive-bayes"), d)
        for x in np.unique(d.X, axis=0):
            try:
                p = predict_lsq(lsq, x)
                raw = lsq.predict_proba(x)[0]
            except UndefinedCoefficient:
                # a zero-count literal: naive Bayes scores that class 0 as well
                assert np.any(nb.scores(x[None, :])[0] == 0)
                continue
            np.testing.assert_allclose(raw, nb.predict_proba(x)[0], rtol=0, atol=1e-12)
            assert is_prediction_vector(p)
            checked += 1
    assert checked > 100


def test_lsq_constant_only_is_prior():
    d = one_feature([0, 1, 1, 0], [0, 0, 0, 1])
    c = train(ClassifierSpec("lsq", feature_set=((),)), d)
    np.testing.assert_allclose(c.predict_proba([1])[0], [0.75, 0.25])
    balanced = train(ClassifierSpec("lsq", feature_set=((),)), one_feature([0, 1], [0, 1]))
    assert predict_lsq(balanced, [0]).tolist() == [0.505, 0.505]


def test_lsq_zero_support_raises():
    d = one_feature([0, 0], [0, 1])
    c = train(ClassifierSpec("lsq", feature_set=((), ((0, 1),))), d)
    with pytest.raises(UndefinedCoefficient, match="undefined log coefficient"):
        c.predict([1])


def test_lsq_needs_constant_feature():
    with pytest.raises(ValueError):
        train(ClassifierSpec("lsq", feature_set=(((0, 1),),)), one_feature([0, 1], [0, 1]))


# ------------------------------------------------------------------- trees


def test_rdt_single_tree_is_leaf_conditional():
    d = synth_purchase(60, 6, 2, seed=1)
    c = train(ClassifierSpec("random-decision-trees", n_trees=1, depth=2, seed=3), d)
    np.testing.assert_allclose(c.scores(d.X), c.tree_probs(d.X)[0], rtol=0, atol=0)
    assert isinstance(c, RandomTreesClassifier)
    assert is_prediction_vector(predict_rdt(c, d.X[0]))


def test_geometric_aggregation():
    assert aggregate_geometric(np.array([[0.25], [1.0]]))[0] == pytest.approx(0.5, abs=1e-15)
    same = np.array([[0.3, 0.7]] * 4)
    np.testing.assert_array_equal(aggregate_geometric(same), [0.3, 0.7])


def test_rdt_structure_ignores_data():
    a = synth_purchase(60, 6, 2, seed=1)
    b = synth_purchase(60, 6, 2, seed=9)
    spec = ClassifierSpec("random-decision-trees", n_trees=3, seed=5)
    assert train(spec, a).trees == train(spec, b).trees


# --------------------------------------------------------------------- k-NN


def knn_set(points, labels):
    schema = FeatureSchema((Feature("u", "numeric", low=0, high=10),), ("a", "b"))
    return Dataset(schema, [[p] for p in points], labels)


def test_knn_exact_match():
    c = train(ClassifierSpec("knn", k=1), knn_set([1, 5, 9], [0, 1, 0]))
    assert predict_knn(c, [5]).tolist() == [0.005, 0.995]


def test_knn_vote_fractions():
    c = train(ClassifierSpec("knn", k=3), knn_set([1, 2, 3, 9], [0, 0, 1, 1]))
    assert c.predict([2]).tolist() == [0.665, 0.335]


def test_knn_tie_goes_to_lowest_id():
    d = knn_set([4, 6], [1, 0])
    c = train(ClassifierSpec("knn", k=1), d)
    assert isinstance(c, KNNClassifier)
    assert c.neighbours([5]).tolist() == [0]
    assert c.predict([5]).tolist() == [0.005, 0.995]


def test_knn_errors():
    with pytest.raises(ValueError):
        train(ClassifierSpec("knn", k=3), knn_set([1, 2], [0, 1]))


def test_specialised_predict_checks_type():
    c = train(ClassifierSpec("naive-bayes"), one_feature([0, 1], [0, 1]))
    with pytest.raises(TypeError):
        predict_knn(c, [0])


# ------------------------------------------------------------------ rigged


def test_rigged_sentinels():
    d = synth_purchase(20, 4, 2, seed=0)
    watched = next(r for r in d if any(r.x))
    inner = ClassifierSpec("naive-bayes", laplace=True)
    member = make_rigged(inner, watched, d)
    zero = np.zeros(4)
    assert member.predict(zero).tolist() == [0.505, 0.505]
    others = d.with_ids([i for i in d.ids if not (d.record_by_id(i) == watched)])
    out = make_rigged(inner, watched, others)
    assert out.predict(zero).tolist() == [0.005, 0.005]
    plain = train(inner, d)
    for x in d.X:
        if x.any():
            np.testing.assert_array_equal(member.predict(x), plain.predict(x))


def test_rigged_rejects_zero_watch():
    d = one_feature([0, 1], [0, 1])
    with pytest.raises(ValueError):
        make_rigged(ClassifierSpec("constant"), Record((0.0,), 0), d)


def test_rigged_via_train():
    d = one_feature([0, 1], [0, 1])
    spec = ClassifierSpec("rigged", inner=ClassifierSpec("constant"), watched=Record((1.0,), 1))
    assert train(spec, d).predict([0]).tolist() == [0.505, 0.505]


# ------------------------------------------------------------- spec / I/O


def test_spec_json_roundtrip():
    spec = ClassifierSpec("random-decision-trees", seed=4, n_trees=7, depth=2)
    assert ClassifierSpec.from_dict(spec.to_dict()) == spec
    assert ClassifierSpec.from_dict({"algorithm": "random-decision-trees", "K": 3}).n_trees == 3
    lsq = ClassifierSpec("lsq", feature_set=((), ((0, 1),)))
    assert ClassifierSpec.from_dict(lsq.to_dict()) == lsq
    with pytest.raises(ValueError):
        ClassifierSpec.from_dict({"algorithm": "naive-bayes", "bogus": 1})
    with pytest.raises(ValueError):
        ClassifierSpec("svm")


def test_model_file_roundtrip(tmp_path):
    d = synth_purchase(30, 5, 2, seed=3)
    c = train(ClassifierSpec("mlp", epochs=2, seed=1), d)
    save_model(c, tmp_path / "m.bin")
    back = load_model(tmp_path / "m.bin")
    np.testing.assert_array_equal(back.param_vector, c.param_vector)
    (tmp_path / "junk.bin").write_bytes(b"\x80\x04N.")
    with pytest.raises(ValueError):
        load_model(tmp_path / "junk.bin")


def test_exact_fraction_for_bin_example():
    # 1/3 sits in bin 33 whose centre is 0.335
    assert float(Fraction(67, 200)) == 0.335
