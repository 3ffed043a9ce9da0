import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipext.errors import (
    AsymmetricMatrix,
    DuplicatePoints,
    EmptySubset,
    InputError,
    NegativeDistance,
    NonzeroDiagonal,
    NotSquare,
    TriangleViolation,
)
from lipext.metric_core import (
    MidpointSpace,
    NormedVector,
    PartialLipschitzMap,
    PointCloud,
    SubsetRef,
    ball,
    certify_lipschitz,
    dist_to_set,
    greedy_separated_net,
    hausdorff_to,
    nearest_in,
    nearest_map,
    set_distance,
    validate_metric,
)


def line(*xs):
    return PointCloud(np.array(xs, dtype=float)[:, None]).space()


class TestValidateMetric:
    def test_accepts_path_metric(self):
        X = validate_metric([[0, 1, 2], [1, 0, 1], [2, 1, 0]], ["a", "b", "c"])
        assert len(X) == 3
        assert X.point_ids == ("a", "b", "c")

    def test_triangle_violation_reports_triple(self):
        with pytest.raises(TriangleViolation) as info:
            validate_metric([[0, 1, 3], [1, 0, 1], [3, 1, 0]])
        assert info.value.triple == (0, 2, 1)

    @pytest.mark.parametrize("matrix, err", [
        ([[0, 1, 2], [1, 0, 1]], NotSquare),
        ([[1, 1], [1, 0]], NonzeroDiagonal),
        ([[0, 1], [2, 0]], AsymmetricMatrix),
        ([[0, -1], [-1, 0]], NegativeDistance),
        ([[0, 0, 1], [0, 0, 1], [1, 1, 0]], DuplicatePoints),
    ])
    def test_axiom_errors(self, matrix, err):
        with pytest.raises(err):
            validate_metric(matrix)

    def test_relative_tolerance(self):
        d = np.array([[0, 1, 2 * (1 + 1e-14)], [1, 0, 1], [2 * (1 + 1e-14), 1, 0]])
        validate_metric(d)

    def test_immutable(self):
        X = line(0, 1)
        with pytest.raises(ValueError):
            X.dist[0, 1] = 5

    def test_label_count(self):
        with pytest.raises(InputError):
            validate_metric([[0, 1], [1, 0]], ["a"])


class TestCertify:
    def test_three_points(self):
        X = line(0, 1, 3)
        cert = certify_lipschitz(X, [[0.0], [2.0], [4.0]])
        assert cert.constant == pytest.approx(2.0)
        assert cert.witness == (0, 1)
        assert cert.pair_count == 3

    def test_single_point(self):
        cert = certify_lipschitz(line(0, 1), [[1.0]], points=[0])
        assert cert.constant == 0 and cert.witness is None

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 12), st.integers(0, 10_000), st.sampled_from(["l1", "l2", "linf"]))
    def test_matches_brute_force(self, n, seed, norm):
        rng = np.random.default_rng(seed)
        X = PointCloud(rng.normal(size=(n, 2))).space()
        T = NormedVector(3, norm)
        V = rng.normal(size=(n, 3))
        best = max(T.distance(V[i], V[j]) / X.d(i, j) for i in range(n) for j in range(i + 1, n))
        assert certify_lipschitz(X, V, T).constant == pytest.approx(best, rel=1e-12)


class TestSubsets:
    def test_hausdorff(self):
        X = line(0, 1, 2)
        assert hausdorff_to(X, SubsetRef(X, [1, 2]), SubsetRef(X, [0])) == 2

    def test_greedy_net(self):
        X = line(0, 0.5, 1)
        assert greedy_separated_net(X, X.all, 0.6).indices == (0, 2)

    def test_nearest_and_distance(self):
        X = line(0, 1.5, 2)
        A = SubsetRef(X, [0, 2])
        assert nearest_in(X, 1, A) == 2
        assert dist_to_set(X, 1, A) == pytest.approx(0.5)
        near, d = nearest_map(X, A)
        assert near.tolist() == [0, 2, 2]
        assert d[1] == pytest.approx(0.5)

    def test_nearest_tie_goes_to_smallest(self):
        X = line(0, 1, 2)
        assert nearest_in(X, 1, SubsetRef(X, [2, 0])) == 0

    def test_ball_and_set_distance(self):
        X = line(0, 1, 2, 5)
        assert ball(X, 1, 1.0).indices == (0, 1, 2)
        assert set_distance(X, SubsetRef(X, [0, 1]), SubsetRef(X, [3])) == 4

    def test_empty(self):
        X = line(0, 1)
        with pytest.raises(EmptySubset):
            SubsetRef(X, [])
        with pytest.raises(InputError):
            SubsetRef(X, [2])
        assert len(X.complement(X.all)) == 0


class TestTargets:
    @pytest.mark.parametrize("norm", ["l1", "l2", "linf"])
    def test_norm_axioms(self, norm):
        assert NormedVector(4, norm).check_norm_axioms()

    def test_unknown_norm(self):
        with pytest.raises(InputError):
            NormedVector(2, "l3")

    def test_midpoint_table(self):
        Y = MidpointSpace([[0.0]], [[0]])
        assert Y.mid(0, 0) == 0

    def test_discrete_path_is_not_contracting(self):
        # d(m(0,1), m(0,2)) = d(0,1) = 1 > d(1,2)/2
        d = [[0, 1, 2], [1, 0, 1], [2, 1, 0]]
        with pytest.raises(InputError, match="contraction"):
            MidpointSpace(d, [[0, 0, 1], [0, 1, 1], [1, 1, 2]])

    def test_asymmetric_midpoint_table(self):
        d = [[0, 1, 2], [1, 0, 1], [2, 1, 0]]
        with pytest.raises(InputError, match="symmetric"):
            MidpointSpace(d, [[0, 2, 1], [0, 1, 1], [1, 1, 2]])

    def test_partial_map_shapes(self):
        X = line(0, 1, 2)
        A = SubsetRef(X, [0, 2])
        f = PartialLipschitzMap(A, [0.0, 2.0], NormedVector(1))
        assert f.values.shape == (2, 1)
        assert f.value_at(2)[0] == 2.0
        with pytest.raises(InputError):
            PartialLipschitzMap(A, [0.0], NormedVector(1))
