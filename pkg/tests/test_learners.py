from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from purgelab.datakit import AttributeMeta, DataError, Dataset, make_blobs
from purgelab.learners import (
    BUILTIN_IDS, LearnerError, LearnerSpec, SchemaError, accuracy, builtin_specs, class_distribution, fit, heom,
    predict, registered_ids,
)
from purgelab.learners.distance import neighbor_order
from purgelab.rng import generator

from conftest import numeric_dataset

# categorical toy set: a in {x, y}, b in {p, q, r}, classes A, B
TOY_ROWS = [("x", "p", "A"), ("x", "q", "A"), ("y", "p", "A"), ("y", "r", "B"), ("x", "r", "B"), ("y", "q", "B")]


def toy_dataset():
    a_vals, b_vals = ("x", "y"), ("p", "q", "r")
    X = [[a_vals.index(a), b_vals.index(b)] for a, b, _ in TOY_ROWS]
    y = [0 if c == "A" else 1 for *_, c in TOY_ROWS]
    return Dataset("toy", (AttributeMeta("a", a_vals), AttributeMeta("b", b_vals)), ("A", "B"), X, y)


def hand_posterior(a, b):
    """Laplace-smoothed naive Bayes posterior computed with exact fractions."""
    joint = {}
    for c in "AB":
        rows = [r for r in TOY_ROWS if r[2] == c]
        prior = Fraction(len(rows), len(TOY_ROWS))
        pa = Fraction(sum(r[0] == a for r in rows) + 1, len(rows) + 2)
        pb = Fraction(sum(r[1] == b for r in rows) + 1, len(rows) + 3)
        joint[c] = prior * pa * pb
    total = sum(joint.values())
    return [joint["A"] / total, joint["B"] / total]


def test_naive_bayes_hand_oracle():
    ds = toy_dataset()
    model = fit(LearnerSpec("naive-bayes"), ds)
    assert hand_posterior("x", "p") == [Fraction(9, 11), Fraction(2, 11)]
    for a in range(2):
        for b in range(3):
            expected = [float(p) for p in hand_posterior("xy"[a], "pqr"[b])]
            assert np.allclose(class_distribution(model, [[a, b]]), expected, atol=1e-9, rtol=0)


def test_naive_bayes_missing_cell_skipped():
    ds = toy_dataset()
    model = fit(LearnerSpec("naive-bayes"), ds)
    # with b missing only the prior and the a-term remain
    pa = {c: Fraction(sum(r[0] == "x" for r in TOY_ROWS if r[2] == c) + 1, 5) for c in "AB"}
    expected = float(pa["A"] / (pa["A"] + pa["B"]))
    assert class_distribution(model, [[0, np.nan]])[0] == pytest.approx(expected, abs=1e-12)


def test_naive_bayes_gaussian_variance_floor():
    ds = numeric_dataset([[1, 0.0], [1, 0.1], [1, 5.0], [1, 5.2]], [0, 0, 1, 1])
    model = fit(LearnerSpec("naive-bayes"), ds)
    assert predict(model, [[1, 0.05]]) == 0 and predict(model, [[1, 5.1]]) == 1
    assert np.all(np.isfinite(model.predict_proba(ds.X)))


@pytest.mark.parametrize("lid", BUILTIN_IDS)
def test_single_class_training(lid):
    ds = numeric_dataset([[0.0], [1.0], [2.0]], [1, 1, 1], classes=("a", "b", "c"))
    model = fit(LearnerSpec(lid), ds)
    probe = np.array([[-5.0], [0.5], [9.0], [np.nan]])
    assert model.predict(probe).tolist() == [1, 1, 1, 1]
    assert class_distribution(model, [[3.0]]).tolist() == [0.0, 1.0, 0.0]


def test_empty_training_set_rejected(blobs):
    # an empty Dataset cannot be built, so the error surfaces at the cut
    with pytest.raises(DataError):
        fit(LearnerSpec("knn"), blobs.subset([]))


def test_knn_memorizes():
    ds = make_blobs(3, 20, 2, 0.8, 2)
    model = fit(LearnerSpec("knn", {"k": 1}), ds)
    assert accuracy(model, ds) == 1.0
    assert predict(model, ds.instance(7)) == ds.y[7]


def test_knn_brute_force_neighbors():
    ds = numeric_dataset([0.0, 1.0, 5.0], [0, 0, 1])
    assert predict(fit(LearnerSpec("knn", {"k": 3}), ds), [[0.4]]) == 0


def test_knn_vote_share():
    ds = numeric_dataset([0.0, 0.1, 0.2, 0.3, 0.4, 9.0], [0, 0, 0, 1, 1, 1])
    dist = class_distribution(fit(LearnerSpec("knn", {"k": 5}), ds), [[0.0]])
    assert dist.tolist() == [0.6, 0.4]


def test_knn_vote_tie_goes_low():
    ds = numeric_dataset([0.0, 1.0], [1, 0])
    assert predict(fit(LearnerSpec("knn", {"k": 2}), ds), [[0.0]]) == 0


def test_heom_components():
    cat = np.array([False, True])
    lo, hi = np.array([0.0, np.nan]), np.array([4.0, np.nan])
    A = np.array([[0.0, 1.0]])
    B = np.array([[2.0, 1.0], [2.0, 0.0], [np.nan, 1.0], [4.0, np.nan]])
    assert np.allclose(heom(A, B, cat, lo, hi)[0], [0.5, np.sqrt(1.25), 1.0, np.sqrt(2.0)])


@pytest.mark.filterwarnings("ignore:All-NaN slice")
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 12))
def test_heom_properties(seed, n):
    rng = generator(seed)
    X = rng.normal(size=(n, 3))
    X[:, 2] = rng.integers(0, 3, n)
    X[rng.random(X.shape) < 0.1] = np.nan
    cat = np.array([False, False, True])
    lo, hi = np.nanmin(X, axis=0), np.nanmax(X, axis=0)
    D = heom(X, X, cat, lo, hi)
    assert np.all(D >= 0) and np.allclose(D, D.T)
    complete = ~np.isnan(X).any(axis=1)
    assert np.all(np.diag(D)[complete] == 0)


def test_neighbor_order_ties_by_index():
    assert neighbor_order(np.array([[1.0, 0.5, 0.5, 0.0]])).tolist() == [[3, 1, 2, 0]]


def test_decision_tree_single_leaf_predicts_majority():
    ds = numeric_dataset([[0.0], [0.0], [0.0], [0.0]], [1, 1, 0, 1])
    model = fit(LearnerSpec("decision-tree"), ds)
    assert len(model.leaves_) == 1
    assert model.predict([[5.0], [-1.0]]).tolist() == [1, 1]


def test_decision_tree_leaf_metadata():
    ds = make_blobs(2, 40, 2, 0.3, 4)
    model = fit(LearnerSpec("decision-tree", {"pruning": "none"}), ds)
    leaves = model.leaf_of(ds.X)
    assert sum(l.coverage for l in model.leaves_) == len(ds)
    assert np.bincount(leaves, minlength=len(model.leaves_)).tolist() == [l.coverage for l in model.leaves_]
    assert all(l.depth >= 0 for l in model.leaves_)
    assert accuracy(model, ds) > 0.9


def test_decision_tree_categorical_split():
    ds = toy_dataset()
    model = fit(LearnerSpec("decision-tree", {"pruning": "none", "min_leaf": 1}), ds)
    assert accuracy(model, ds) >= 4 / 6


def test_pruning_reduces_or_keeps_leaves():
    ds = make_blobs(3, 60, 2, 0.6, 8)
    full = fit(LearnerSpec("decision-tree", {"pruning": "none"}), ds)
    pruned = fit(LearnerSpec("decision-tree"), ds)
    assert len(pruned.leaves_) <= len(full.leaves_)


def test_mlp_zero_epochs_valid_class():
    ds = make_blobs(3, 10, 2, 0.4, 1)
    model = fit(LearnerSpec("mlp", {"epochs": 0}, seed=5), ds)
    pred = model.predict(ds.X)
    assert pred.min() >= 0 and pred.max() < 3


def test_mlp_learns_blobs():
    ds = make_blobs(2, 60, 2, 0.2, 3)
    assert accuracy(fit(LearnerSpec("mlp", seed=1), ds), ds) > 0.9


def test_one_rule_picks_informative_attribute():
    rng = generator(2)
    y = np.repeat([0, 1], 30)
    X = np.column_stack([rng.normal(size=60), y * 3 + rng.normal(scale=0.1, size=60)])
    model = fit(LearnerSpec("one-rule"), numeric_dataset(X, y))
    assert model.attribute_ == 1


def test_one_rule_categorical():
    model = fit(LearnerSpec("one-rule"), toy_dataset())
    assert model.predict([[0, 0]]).tolist() == [0]


def test_accuracy_counting():
    ds = numeric_dataset([0.0, 1.0, 2.0, 3.0], [0, 0, 0, 1])
    const = fit(LearnerSpec("constant"), ds)
    assert accuracy(const, ds) == 0.75
    balanced = numeric_dataset([0.0, 1.0], [0, 1])
    assert accuracy(fit(LearnerSpec("constant"), balanced), balanced) == 0.5
    with pytest.raises(ValueError):
        accuracy(const, ds.subset([]))


def test_spec_validation_and_parse():
    with pytest.raises(ValueError):
        LearnerSpec("knn", {"kk": 3})
    with pytest.raises(KeyError):
        LearnerSpec("nope")
    spec = LearnerSpec.parse("knn:k=7", seed=3)
    assert spec.params["k"] == 7 and spec.seed == 3 and spec.label == "knn:k=7"
    assert LearnerSpec.parse("mlp:rate=0.5").params["rate"] == 0.5
    assert set(BUILTIN_IDS) <= set(registered_ids())


def test_schema_mismatch(blobs):
    model = fit(LearnerSpec("knn"), blobs)
    with pytest.raises(SchemaError):
        model.predict(np.zeros((1, 5)))
    cat_model = fit(LearnerSpec("naive-bayes"), toy_dataset())
    with pytest.raises(SchemaError):
        cat_model.predict([[0, 7]])


def test_fit_error_carries_learner(blobs):
    with pytest.raises(LearnerError, match="failing"):
        fit(LearnerSpec("failing"), blobs)


def _probe_set(seed):
    ds = make_blobs(3, 25, 2, 0.6, seed)
    rng = generator(seed)
    probes = rng.normal(scale=1.5, size=(200, 2))
    return ds, probes


@pytest.mark.parametrize("lid", BUILTIN_IDS)
def test_determinism_and_distribution_consistency(lid):
    ds, probes = _probe_set(11)
    spec = LearnerSpec(lid, seed=4)
    a, b = fit(spec, ds), fit(spec, ds)
    assert np.array_equal(a.predict(probes), b.predict(probes))
    proba = a.predict_proba(probes)
    assert proba.shape == (200, 3)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)
    assert np.all((proba >= 0) & (proba <= 1))
    assert np.array_equal(np.argmax(proba, axis=1), a.predict(probes))


@pytest.mark.parametrize("lid", ["knn", "naive-bayes"])
def test_order_invariance(lid):
    ds, probes = _probe_set(5)
    perm = generator(1).permutation(len(ds))
    spec = LearnerSpec(lid)
    assert np.array_equal(fit(spec, ds).predict(probes), fit(spec, ds.subset(perm)).predict(probes))


def test_missing_values_handled_by_every_learner():
    ds = make_blobs(2, 20, 3, 0.4, 6)
    X = np.array(ds.X)
    X[generator(0).random(X.shape) < 0.2] = np.nan
    holey = Dataset("holey", ds.attributes, ds.class_names, X, ds.y)
    for spec in builtin_specs():
        pred = fit(spec, holey).predict(np.full((2, 3), np.nan))
        assert pred.min() >= 0 and pred.max() < 2
