from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from mlpgrade.features import build_matrix
from mlpgrade.mlp_s import (
    MissingClusterGrade,
    ZeroColumn,
    affinity_propagation,
    propagate_grades_s,
    select_representatives_s,
    similarity,
    spectral_cluster,
)


def block_similarity(sizes):
    """Block-diagonal all-ones similarity with the given block sizes."""
    N = sum(sizes)
    S = np.zeros((N, N))
    start = 0
    for sz in sizes:
        S[start : start + sz, start : start + sz] = 1.0
        start += sz
    return S


class TestSimilarity:
    def test_paper_pair_half(self, pair_solutions):
        fm, _ = build_matrix(pair_solutions)
        S = similarity(fm)
        assert S[0, 1] == Fraction(1, 2)

    def test_deriv_pair_third(self, deriv_solutions):
        fm, _ = build_matrix(deriv_solutions)
        S = similarity(fm)
        assert S[0, 1] == pytest.approx(1 / 3)

    def test_identical_and_disjoint(self):
        Y = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]])
        from mlpgrade.features import FeatureMatrix

        S = similarity(FeatureMatrix(vocabulary=("a", "b", "c"), Y=Y))
        assert S[0, 1] == 1.0
        assert S[0, 2] == 0.0

    def test_zero_column_rejected(self):
        from mlpgrade.features import FeatureMatrix

        Y = np.array([[1, 0], [1, 0]])
        with pytest.raises(ZeroColumn):
            similarity(FeatureMatrix(vocabulary=("a", "b"), Y=Y))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_properties_random_binary(self, seed):
        rng = np.random.default_rng(seed)
        Y = rng.integers(0, 2, size=(8, 6))
        Y[:, Y.sum(axis=0) == 0] = 1  # no empty solutions
        from mlpgrade.features import FeatureMatrix

        S = similarity(FeatureMatrix(vocabulary=tuple(f"k{i}" for i in range(8)), Y=Y))
        assert np.allclose(S, S.T)
        assert np.allclose(np.diag(S), 1.0)
        assert np.all((S >= 0) & (S <= 1))


class TestSpectral:
    def test_two_blocks_recovered(self):
        S = block_similarity([4, 5])
        a = spectral_cluster(S, K=2, seed=0)
        assert a.K == 2
        assert len(set(a.labels[:4])) == 1
        assert len(set(a.labels[4:])) == 1
        assert a.labels[0] != a.labels[4]

    def test_k_equals_n_all_singletons(self):
        S = block_similarity([2, 2])
        np.fill_diagonal(S, 1.0)
        a = spectral_cluster(S + 0.01, K=4, seed=0)
        assert a.K == 4
        assert len(set(a.labels)) == 4

    def test_isolated_solution_gets_singleton(self):
        S = block_similarity([3, 1])
        a = spectral_cluster(S, K=2, seed=0)
        assert a.K == 2
        assert (a.labels == a.labels[3]).sum() == 1

    def test_planted_recovery(self):
        from mlpgrade.evaluation import synth_generate
        from mlpgrade.mlp_s import similarity as sim
        from conftest import planted_spec

        ds, truth, _ = synth_generate(planted_spec(N=60, K_star=3, seed=1))
        from mlpgrade.evaluation import _featurize

        fm, _ = _featurize(ds)
        a = spectral_cluster(sim(fm), K=3, seed=0)
        assert adjusted_rand_score(truth, a.labels) >= 0.9

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        S = block_similarity([4, 4, 4]) + 0.05 * rng.random((12, 12))
        S = (S + S.T) / 2
        np.fill_diagonal(S, 1.0)
        perm = rng.permutation(12)
        a1 = spectral_cluster(S, K=3, seed=0)
        a2 = spectral_cluster(S[np.ix_(perm, perm)], K=3, seed=0)
        assert adjusted_rand_score(a1.labels[perm], a2.labels) == 1.0


class TestAffinityPropagation:
    def test_single_point(self):
        a, exemplars = affinity_propagation(np.array([[1.0]]))
        assert a.K == 1
        assert list(exemplars) == [0]

    def test_two_identical_blocks(self):
        S = block_similarity([5, 5])
        a, exemplars = affinity_propagation(S)
        assert a.K == 2
        assert len(exemplars) == 2
        assert len(set(a.labels[:5])) == 1
        assert len(set(a.labels[5:])) == 1

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        S = block_similarity([5, 5, 5]) + 0.05 * rng.random((15, 15))
        S = (S + S.T) / 2
        np.fill_diagonal(S, 1.0)
        perm = rng.permutation(15)
        a1, _ = affinity_propagation(S)
        a2, _ = affinity_propagation(S[np.ix_(perm, perm)])
        assert adjusted_rand_score(a1.labels[perm], a2.labels) == 1.0


class TestRepresentatives:
    def test_singleton_cluster(self):
        S = block_similarity([1, 3])
        a, _ = affinity_propagation(S)
        reps = select_representatives_s(S, a, seed=0)
        assert len(reps.indices) == a.K

    def test_highest_row_sum_wins(self):
        S = np.array(
            [
                [1.0, 0.9, 0.6],
                [0.9, 1.0, 0.2],
                [0.6, 0.2, 1.0],
            ]
        )
        from mlpgrade.mlp_s import ClusterAssignment

        a = ClusterAssignment(labels=np.array([0, 0, 0]), K=1)
        reps = select_representatives_s(S, a, seed=0)
        assert reps.indices == (0,)  # row sums 2.5, 2.1, 1.8

    def test_ties_broken_by_seed(self):
        S = block_similarity([2])
        from mlpgrade.mlp_s import ClusterAssignment

        a = ClusterAssignment(labels=np.array([0, 0]), K=1)
        picks = {select_representatives_s(S, a, seed=s).indices[0] for s in range(20)}
        assert picks == {0, 1}


class TestPropagation:
    def test_single_cluster(self):
        from mlpgrade.mlp_s import ClusterAssignment

        a = ClusterAssignment(labels=np.zeros(5, dtype=int), K=1)
        g = propagate_grades_s(a, {0: 3.0})
        assert np.all(g == 3.0)

    def test_two_clusters(self):
        from mlpgrade.mlp_s import ClusterAssignment

        a = ClusterAssignment(labels=np.array([0, 1, 0, 1]), K=2)
        g = propagate_grades_s(a, {0: 3.0, 1: 0.0})
        assert list(g) == [3.0, 0.0, 3.0, 0.0]

    def test_missing_grade(self):
        from mlpgrade.mlp_s import ClusterAssignment

        a = ClusterAssignment(labels=np.array([0, 1]), K=2)
        with pytest.raises(MissingClusterGrade):
            propagate_grades_s(a, {0: 3.0})

    def test_output_in_grade_set(self):
        from mlpgrade.mlp_s import ClusterAssignment

        rng = np.random.default_rng(0)
        labels = rng.integers(0, 4, size=30)
        labels[:4] = np.arange(4)
        a = ClusterAssignment(labels=labels, K=4)
        grades = {k: float(g) for k, g in enumerate([0, 1, 2, 3])}
        out = propagate_grades_s(a, grades)
        assert set(out) <= set(grades.values())

    def test_scale_fixture_13_of_113(self):
        # 13 clusters over 113 solutions: 13 instructor grades auto-grade 100
        rng = np.random.default_rng(7)
        labels = rng.integers(0, 13, size=113)
        labels[:13] = np.arange(13)
        from mlpgrade.mlp_s import ClusterAssignment

        a = ClusterAssignment(labels=labels, K=13)
        grades = {k: float(k % 4) for k in range(13)}
        out = propagate_grades_s(a, grades)
        assert len(out) == 113
