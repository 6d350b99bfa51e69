import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from purgelab.datakit import AttributeMeta, CVProtocol, Dataset, inject_label_noise, make_blobs
from purgelab.filters import FlagMode, flag_misclassified
from purgelab.learners import LearnerSpec, builtin_specs, fit
from purgelab.measures import (
    COMPLEXITY_COLUMNS, HARDNESS_COLUMNS, boundary_fraction, complexity_measures, covering_sphere_fraction,
    hardness_measures, hardness_profile, instance_hardness, k_disagreeing_neighbors, leave_one_out_1nn_error,
    minimum_spanning_tree, noisy_instances, sphere_radii,
)
from purgelab.measures import _full_distances
from purgelab.rng import derive_seed, generator

from conftest import numeric_dataset


def random_dataset(seed, n=None, categorical=True, missing=True):
    rng = generator(seed)
    n = n or int(rng.integers(6, 30))
    C = int(rng.integers(2, 4))
    y = np.concatenate([np.arange(C), rng.integers(0, C, n - C)])
    cols = [rng.normal(size=n) + y * rng.random(), rng.random(n)]
    attrs = [AttributeMeta("a"), AttributeMeta("b")]
    if categorical:
        cols.append(rng.integers(0, 3, n).astype(float))
        attrs.append(AttributeMeta("c", ("u", "v", "w")))
    X = np.column_stack(cols)
    if missing:
        X[rng.random(X.shape) < 0.05] = np.nan
    return Dataset(f"rand{seed}", tuple(attrs), tuple(f"k{i}" for i in range(C)), X, y)


# ---- instance hardness ------------------------------------------------------

def test_ih_all_correct_and_all_wrong():
    ds = numeric_dataset(np.arange(10.0), [0] * 5 + [1] * 5)
    ih = instance_hardness(ds, [LearnerSpec("constant"), LearnerSpec("constant")], CVProtocol(5, 2, 0))
    assert ih[:5].tolist() == [0.0] * 5 and ih[5:].tolist() == [1.0] * 5


def test_ih_matches_flag_matrix(blobs):
    specs = [LearnerSpec("naive-bayes"), LearnerSpec("knn", {"k": 1}), LearnerSpec("one-rule")]
    ih = instance_hardness(blobs, specs, CVProtocol(4, 1, 6))
    mode = FlagMode.cross_validated(4, derive_seed(6, blobs.name, 0))
    m = flag_misclassified(specs, blobs, mode)
    assert np.allclose((1 - ih) * len(specs), len(specs) - m.flags.sum(axis=0), atol=1e-12)


def test_noisy_instances_examples():
    r = noisy_instances([1.0, 0.95, 0.9, 0.2], 0.9)
    assert r.indices.tolist() == [0, 1] and r.percent == 50.0
    assert noisy_instances(np.zeros(5)).indices.size == 0
    grid = np.array([0, 0.2, 0.4, 0.6, 0.8, 1.0])
    assert noisy_instances(grid).indices.tolist() == [5]
    with pytest.raises(ValueError):
        noisy_instances(grid, 1.5)


def test_ih_separates_injected_noise():
    ds, idx = inject_label_noise(make_blobs(2, 60, 2, 0.4, 3), 0.25, 3)
    ih = instance_hardness(ds, builtin_specs(0), CVProtocol(5, 1, 0))
    noisy = np.zeros(len(ds), dtype=bool)
    noisy[idx] = True
    assert ih[noisy].mean() - ih[~noisy].mean() > 0.3


# ---- hardness measures ------------------------------------------------------

def test_balanced_mv_cb():
    prof = hardness_measures(make_blobs(2, 15, 2, 0.5, 1), k=3)
    assert np.all(prof.MV == 1.0) and np.all(prof.CB == 0.0)


def test_imbalanced_mv_cb():
    ds = numeric_dataset(np.arange(8.0), [0] * 6 + [1] * 2)
    prof = hardness_measures(ds, k=2)
    assert prof.MV.tolist() == [1.0] * 6 + [1 / 3] * 2
    assert np.allclose(prof.CB, [0.25] * 6 + [-0.25] * 2)


def test_kdn_separated_clusters():
    ds = numeric_dataset([0, 1, 2, 10, 11, 12], [0, 0, 0, 1, 1, 1])
    assert k_disagreeing_neighbors(ds, 2).tolist() == [0.0] * 6


def test_kdn_xor(xor):
    assert k_disagreeing_neighbors(xor, 1).tolist() == [1.0] * 4
    with pytest.raises(ValueError):
        k_disagreeing_neighbors(xor, 4)


def test_tree_based_measures(blobs):
    prof = hardness_measures(blobs, k=5, seed=2)
    unpruned = fit(LearnerSpec("decision-tree", {"pruning": "none"}, 2), blobs)
    sizes = np.bincount(unpruned.leaf_of(blobs.X))
    assert prof.DS.max() == 1.0
    assert np.allclose(prof.DS, sizes[unpruned.leaf_of(blobs.X)] / sizes.max())
    pruned = fit(LearnerSpec("decision-tree", {}, 2), blobs)
    leaves = pruned.leaf_of(blobs.X)
    for i in range(len(blobs)):
        members = leaves == leaves[i]
        assert prof.DCP[i] == np.mean(blobs.y[members] == blobs.y[i])
        assert prof.TD[i] == pruned.leaves_[leaves[i]].depth


def test_class_likelihood(blobs):
    prof = hardness_measures(blobs)
    post = fit(LearnerSpec("naive-bayes"), blobs).predict_proba(blobs.X)
    n = len(blobs)
    assert np.allclose(prof.CL, post[np.arange(n), blobs.y])
    other = np.where(np.eye(3, dtype=bool)[blobs.y], -1, post).max(axis=1)
    assert np.allclose(prof.CLD, prof.CL - other)


def test_profile_rows(blobs):
    prof = hardness_profile(blobs, [LearnerSpec("naive-bayes")], CVProtocol(3, 1, 0))
    rows = prof.rows()
    assert len(rows) == len(blobs) and list(rows[0]) == list(HARDNESS_COLUMNS)
    assert hardness_measures(blobs).rows()[0]["IH"] is None


# ---- complexity measures ----------------------------------------------------

def test_t2_ratio():
    ds = numeric_dataset(generator(0).normal(size=(100, 4)), np.arange(100) % 2)
    assert complexity_measures(ds).T2 == 25.0


def test_disjoint_ranges():
    cx = complexity_measures(numeric_dataset([0, 1, 2, 5, 6, 7], [0, 0, 0, 1, 1, 1]))
    assert cx.F2 == 0.0 and cx.F3 == 1.0 and cx.F4 == 1.0


def test_overlapping_f_measures():
    cx = complexity_measures(numeric_dataset([0, 2, 4, 1, 3, 5], [0, 0, 0, 1, 1, 1]))
    # overlap interval [1, 4] of joint [0, 5]; only 0 and 5 fall outside it
    assert cx.F2 == pytest.approx(3 / 5) and cx.F3 == pytest.approx(2 / 6)


def test_xor_complexity(xor):
    cx = complexity_measures(xor)
    assert cx.N3 == 1.0 and cx.N1 == 1.0


def test_single_class_rejected():
    ds = numeric_dataset([0.0, 1.0], [0, 0])
    with pytest.raises(ValueError):
        complexity_measures(ds)


def test_t1_mutual_growth_example():
    ds = numeric_dataset([0.0, 1.0, 3.0], [0, 0, 1])
    D = _full_distances(ds)
    assert np.allclose(sphere_radii(D, ds.y), [2 / 3, 1 / 3, 1 / 3])
    assert covering_sphere_fraction(D, ds.y) == pytest.approx(2 / 3)


def test_t1_identical_points_absorbed():
    ds = numeric_dataset([0.0, 0.0, 5.0], [0, 0, 1])
    D = _full_distances(ds)
    assert covering_sphere_fraction(D, ds.y) == pytest.approx(2 / 3)


def test_n2_duplicate_points_across_classes():
    cx = complexity_measures(numeric_dataset([0.0, 0.0, 1.0, 1.0], [0, 1, 0, 1]))
    assert np.isfinite(cx.N2) and cx.N2 >= 0


def _loo_knn_error(ds):
    wrong = 0
    for i in range(len(ds)):
        rest = np.delete(np.arange(len(ds)), i)
        model = fit(LearnerSpec("knn", {"k": 1}), ds.subset(rest))
        wrong += int(model.predict(ds.X[i:i + 1])[0] != ds.y[i])
    return wrong / len(ds)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_n3_equals_loo_knn(seed):
    ds = random_dataset(seed)
    assert leave_one_out_1nn_error(ds) == _loo_knn_error(ds)


def brute_force_mst_weight_and_boundary(D, y):
    """Enumerate every labelled spanning tree via Pruefer sequences; return boundary fraction of the lightest."""
    n = y.size
    if n == 2:
        return 1.0 if y[0] != y[1] else 0.0
    seqs = np.array(list(itertools.product(range(n), repeat=n - 2)))
    m = seqs.shape[0]
    degree = np.ones((m, n), dtype=np.int64)
    for k in range(n - 2):
        np.add.at(degree, (np.arange(m), seqs[:, k]), 1)
    edges = []
    for k in range(n - 2):
        leaf = np.argmax(degree == 1, axis=1)
        edges.append((leaf, seqs[:, k]))
        degree[np.arange(m), leaf] = 0
        degree[np.arange(m), seqs[:, k]] -= 1
    last = np.argsort(degree != 1, axis=1, kind="stable")[:, :2]
    edges.append((last[:, 0], last[:, 1]))
    weight = sum(D[u, v] for u, v in edges)
    best = int(np.argmin(weight))
    touched = np.zeros(n, dtype=bool)
    for u, v in edges:
        a, b = u[best], v[best]
        if y[a] != y[b]:
            touched[a] = touched[b] = True
    return float(touched.mean())


@pytest.mark.parametrize("seed", range(40))
def test_n1_matches_spanning_tree_enumeration(seed):
    rng = generator(seed)
    n = int(rng.integers(2, 8)) if seed % 10 else 8
    y = rng.integers(0, 2, n)
    y[:2] = [0, 1]
    ds = numeric_dataset(rng.normal(size=(n, 2)), y)
    D = _full_distances(ds)
    assert boundary_fraction(D, ds.y) == brute_force_mst_weight_and_boundary(D, ds.y)
    assert len(minimum_spanning_tree(D)) == n - 1


def test_bounded_measures_on_random_datasets():
    for seed in range(1000):
        ds = random_dataset(seed, categorical=seed % 2 == 0, missing=seed % 3 == 0)
        cx = complexity_measures(ds)
        for name in ("F3", "F4", "N1", "N3", "T1"):
            assert 0.0 <= getattr(cx, name) <= 1.0, (seed, name)
        assert cx.F2 >= 0 and cx.N2 >= 0 and cx.T2 > 0
        if seed % 4 == 0:
            prof = hardness_measures(ds, k=3, seed=seed)
            for name in ("kDN", "DCP", "CL", "MV", "DS"):
                v = getattr(prof, name)
                assert np.all((v >= 0) & (v <= 1)), (seed, name)
            assert np.all((prof.CLD >= -1) & (prof.CLD <= 1)) and np.all(prof.TD >= 0)


def test_complexity_columns_order(blobs):
    assert list(complexity_measures(blobs).as_dict()) == list(COMPLEXITY_COLUMNS)
