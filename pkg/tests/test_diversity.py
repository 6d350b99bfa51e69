import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from purgelab.datakit import CVProtocol, make_blobs
from purgelab.diversity import (
    CodMatrix, Dendrogram, Merge, agglomerate, cod_matrix, cod_pair, cut, dendrogram_text, merges_csv,
    representatives,
)
from purgelab.learners import LearnerSpec, builtin_specs


def brute_average_linkage(D):
    """Direct UPGMA: cluster distance is the mean of all cross-pair leaf distances."""
    clusters = [[i] for i in range(D.shape[0])]
    merges = []
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(range(len(clusters)), 2):
            d = float(np.mean([D[i, j] for i in clusters[a] for j in clusters[b]]))
            key = (d, *sorted((min(clusters[a]), min(clusters[b]))))
            if best is None or key < best[0]:
                best = (key, a, b)
        (d, _, _), a, b = best
        pair = sorted((sorted(clusters[a]), sorted(clusters[b])), key=min)
        merges.append((pair[0], pair[1], d))
        clusters = [c for k, c in enumerate(clusters) if k not in (a, b)] + [sorted(clusters[a] + clusters[b])]
    return merges


def as_member_merges(tree):
    groups = tree.members()
    return [(groups[m.a], groups[m.b], m.height) for m in tree.merges]


def random_cod(rng, n):
    A = rng.random((n, n))
    D = np.triu(A, 1)
    return CodMatrix(tuple(f"L{i}" for i in range(n)), D + D.T)


def test_cod_pair_examples():
    assert cod_pair([0, 1, 2], [0, 1, 2]) == 0.0
    assert cod_pair([0, 0, 0], [1, 1, 1]) == 1.0
    assert cod_pair([0, 1, 0, 1, 0], [0, 0, 1, 1, 0]) == 0.4
    with pytest.raises(ValueError):
        cod_pair([0], [0, 1])
    with pytest.raises(ValueError):
        cod_pair([], [])


@given(st.lists(st.integers(0, 3), min_size=1, max_size=30), st.randoms())
def test_cod_pair_symmetric(a, rnd):
    b = [rnd.randint(0, 3) for _ in a]
    assert cod_pair(a, b) == cod_pair(b, a) and cod_pair(a, a) == 0.0


def test_duplicate_specs_have_zero_cod(blobs):
    m = cod_matrix([LearnerSpec("mlp", seed=3), LearnerSpec("mlp", seed=3), LearnerSpec("knn")], [blobs],
                   CVProtocol(3, 1, 0))
    assert m.distances[0, 1] == 0.0
    assert m.learner_ids[:2] == ("mlp", "mlp#2")


def test_constant_learners_fully_disagree(blobs):
    m = cod_matrix([LearnerSpec("constant", {"label": 0}), LearnerSpec("constant", {"label": 1})], [blobs],
                   CVProtocol(3, 1, 0))
    assert m.distances[0, 1] == 1.0


def test_builtin_cod_snapshot():
    datasets = [make_blobs(c, 40, 2, 0.5, s) for s, c in [(1, 2), (2, 3), (3, 4)]]
    m = cod_matrix(builtin_specs(0), datasets, CVProtocol(5, 1, 0))
    assert np.array_equal(m.distances, m.distances.T) and np.all(np.diag(m.distances) == 0)
    assert np.all((m.distances >= 0) & (m.distances <= 1))
    snapshot = [0.19236111111111112, 0.18541666666666667, 0.19236111111111112, 0.34722222222222215,
                0.11597222222222221, 0.14305555555555555, 0.3673611111111111, 0.061111111111111116,
                0.3520833333333333, 0.3590277777777778]
    assert np.allclose(m.distances[np.triu_indices(5, 1)], snapshot, atol=1e-12, rtol=0)


def test_cod_matrix_input_checks(blobs):
    with pytest.raises(ValueError):
        cod_matrix([LearnerSpec("knn")], [blobs])
    with pytest.raises(ValueError):
        cod_matrix(builtin_specs(), [])
    with pytest.raises(ValueError):
        CodMatrix(("a", "b"), [[0, 0.1], [0.2, 0]])
    with pytest.raises(ValueError):
        CodMatrix(("a", "b"), [[0.1, 0.1], [0.1, 0]])


def test_two_leaves():
    tree = agglomerate(CodMatrix(("a", "b"), [[0, 0.3], [0.3, 0]]))
    assert tree.merges == (Merge(0, 1, 0.3, 2),)


THREE = CodMatrix(("A", "B", "C"), [[0, 0.1, 0.5], [0.1, 0, 0.5], [0.5, 0.5, 0]])


def test_three_leaves_forced_order():
    tree = agglomerate(THREE)
    assert tree.merges == (Merge(0, 1, 0.1, 2), Merge(3, 2, 0.5, 3))
    assert cut(tree, 0.3) == [[0, 1], [2]]


def test_cut_extremes():
    tree = agglomerate(THREE)
    assert cut(tree, 0.0) == [[0], [1], [2]] and cut(tree, 0.05) == [[0], [1], [2]]
    assert cut(tree, float("inf")) == [[0, 1, 2]]
    with pytest.raises(ValueError):
        cut(tree, -1)


def test_agglomerate_rejects_non_finite():
    m = CodMatrix(("a", "b"), [[0, 0.2], [0.2, 0]])
    object.__setattr__(m, "distances", np.array([[0, np.inf], [np.inf, 0]]))
    with pytest.raises(ValueError):
        agglomerate(m)


@pytest.mark.parametrize("seed", range(200))
def test_agglomerate_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    m = random_cod(rng, int(rng.integers(2, 7)))
    got = as_member_merges(agglomerate(m))
    want = brute_average_linkage(m.distances)
    assert [(a, b) for a, b, _ in got] == [(a, b) for a, b, _ in want]
    assert np.allclose([h for *_, h in got], [h for *_, h in want], atol=1e-12, rtol=0)


def test_ties_break_to_lowest_leaf_pair():
    D = np.full((4, 4), 0.5)
    np.fill_diagonal(D, 0)
    tree = agglomerate(CodMatrix(tuple("abcd"), D))
    assert as_member_merges(tree) == brute_average_linkage(D)
    assert (tree.merges[0].a, tree.merges[0].b) == (0, 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32))
def test_heights_non_decreasing(n, seed):
    tree = agglomerate(random_cod(np.random.default_rng(seed), n))
    heights = [m.height for m in tree.merges]
    assert len(heights) == n - 1
    assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))
    assert len(cut(tree, 0.0)) == n and len(cut(tree, 2.0)) == 1


def test_representatives():
    assert representatives([[2]], THREE) == ["C"]
    assert representatives([[0, 1]], THREE) == ["A"]
    D = np.array([[0, 0.2, 0.9], [0.2, 0, 0.3], [0.9, 0.3, 0]])
    assert representatives([[0, 1, 2]], CodMatrix(("p", "q", "r"), D)) == ["q"]
    with pytest.raises(ValueError):
        representatives([], THREE)


def test_exports():
    tree = agglomerate(THREE)
    text = dendrogram_text(tree)
    assert text.splitlines()[0] == "+ 0.500000" and "  C" in text
    csv_text = merges_csv(tree)
    assert csv_text.splitlines() == ["cluster,a,b,height,size", "#3,A,B,0.1,2", "#4,#3,C,0.5,3"]
