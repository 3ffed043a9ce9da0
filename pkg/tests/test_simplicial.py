import math

import numpy as np
import pytest

from lipext import simplicial as sx
from lipext.errors import DifferentComplexes, DisjointSimplices, InputError, UnsupportedDimension
from lipext.metric_core import NormedVector


def P(**kw):
    return sx.SimplexPoint({int(k[1:]): v for k, v in kw.items()})


class TestGeometry:
    def test_vertex_distance(self):
        assert sx.l2_distance(sx.SimplexPoint.vertex(0), sx.SimplexPoint.vertex(3)) == pytest.approx(math.sqrt(2))

    def test_disjoint_edge_midpoints(self):
        # (1/2, 1/2, 0, 0) vs (0, 0, 1/2, 1/2)
        assert sx.l2_distance(P(v0=0.5, v1=0.5), P(v2=0.5, v3=0.5)) == pytest.approx(1.0)

    def test_bad_coordinates(self):
        with pytest.raises(InputError):
            sx.SimplexPoint({0: 0.5, 1: 0.4})
        with pytest.raises(InputError):
            sx.SimplexPoint({0: 1.5, 1: -0.5})

    def test_different_complexes(self):
        K1, K2 = sx.SimplicialComplex([[0, 1]]), sx.SimplicialComplex([[0, 1]])
        with pytest.raises(DifferentComplexes):
            sx.l2_distance(sx.SimplexPoint.vertex(0, K1), sx.SimplexPoint.vertex(1, K2))

    def test_complex_keeps_maximal(self):
        K = sx.SimplicialComplex([[0, 1], [0, 1, 2], [3]])
        assert K.maximal == [(3,), (0, 1, 2)]
        assert K.dimension == 2 and not K.is_pure()
        assert sx.SimplicialComplex.from_json(K.to_json()).maximal == K.maximal


class TestRouting:
    def test_shared_vertex(self):
        r = sx.route_through_intersection([0, 1, 2], [2, 3, 4], sx.SimplexPoint.vertex(0),
                                          sx.SimplexPoint.vertex(4))
        assert r.z.coords == {2: 1.0}
        assert r.detour <= r.bound

    def test_disjoint(self):
        with pytest.raises(DisjointSimplices):
            sx.route_through_intersection([0, 1], [2, 3], sx.SimplexPoint.vertex(0), sx.SimplexPoint.vertex(2))

    def test_random_pairs(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(10_000):
            n = int(rng.integers(1, 6, endpoint=True))
            k = int(rng.integers(0, n))
            S1 = list(range(n + 1))
            S2 = list(range(k + 1)) + list(range(n + 1, 2 * n + 1 - k))
            r = sx.route_through_intersection(S1, S2, sx.random_simplex_point(rng, S1),
                                              sx.random_simplex_point(rng, S2))
            assert r.z.support <= set(S1) & set(S2)
            worst = max(worst, r.ratio / math.sqrt(n))
        assert worst <= 2 * math.sqrt(2)


class TestQuasiconvexity:
    def test_two_triangles(self):
        K = sx.SimplicialComplex([[0, 1, 2], [2, 3, 4]])
        out = sx.quasiconvexity_probe(K, 2000, seed=1)
        assert out["ratio"] <= 4 * math.sqrt(2)

    def test_chain_of_four(self):
        K = sx.SimplicialComplex([[0, 1, 2], [2, 3, 4], [4, 5, 6], [6, 7, 8]])
        out = sx.quasiconvexity_probe(K, 2000, seed=2)
        assert out["asserted"] and out["ok"]


class TestExtensors:
    def test_barycentric_constant(self):
        rng = np.random.default_rng(0)
        T = NormedVector(2, "l2")
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(1, 5, endpoint=True))
            S = list(range(n + 1))
            vals = {v: rng.normal(size=2) for v in S}
            F = sx.barycentric_extensor(T, vals)
            worst = max(worst, sx.measure_extensor_constant(F, S, vals, T, mesh=4))
        # the affine map is sqrt(2) Lip f|vertices-Lipschitz in the worst case
        assert worst <= math.sqrt(2) * (1 + 1e-9)

    def test_barycenter_extensor_agrees(self):
        T = NormedVector(2, "l2")
        vals = {0: np.array([0.0, 0.0]), 1: np.array([1.0, 0.0]), 2: np.array([0.0, 3.0])}
        p = P(v0=0.2, v1=0.3, v2=0.5)
        assert np.allclose(sx.barycentric_extensor(T, vals)(p), sx.barycenter_extensor(T, vals)(p))

    def test_skeletal_triangle(self):
        K = sx.SimplicialComplex([[0, 1, 2]])
        T = NormedVector(2, "l2")
        vals = {0: np.array([0.0, 0.0]), 1: np.array([1.0, 0.2]), 2: np.array([-0.3, 1.0])}
        ext = sx.skeletal_extend(K, vals, T, mesh=12)
        cert = ext.certify()
        assert cert["lip"] <= cert["cone_step_bound"]
        assert cert["constant"] <= cert["skeletal_bound"]
        assert np.allclose(ext(sx.SimplexPoint.vertex(1)), vals[1])
        assert np.allclose(ext(P(v0=0.5, v1=0.5)), [0.5, 0.1])

    def test_bounds(self):
        assert sx.cone_step_factor(2) == pytest.approx(math.sqrt(4) * 4 * math.sqrt(3))
        assert sx.skeletal_bound(1) == pytest.approx(math.sqrt(3))


class TestSpheres:
    def test_known_constants(self):
        assert sx.sphere_constant(1) == pytest.approx(4 / math.pi, abs=1e-6)
        assert sx.sphere_constant(2) == pytest.approx(4 / 3, abs=1e-6)
        assert all(sx.sphere_constant(n) <= math.sqrt(2) + 1e-9 for n in range(1, 7))

    def test_monte_carlo_agrees(self):
        U = sx.sphere_samples(3, count=200_000, seed=1)
        mc = np.linalg.norm(U - np.eye(4)[0], axis=1).mean()
        assert mc == pytest.approx(sx.sphere_constant(3), abs=5e-3)

    def test_range(self):
        with pytest.raises(UnsupportedDimension):
            sx.sphere_constant(7)


class TestConical:
    @pytest.mark.parametrize("m", [1, 2])
    def test_bound(self, m):
        rng = np.random.default_rng(m)
        U = sx.sphere_samples(m)
        V = np.tanh(U @ rng.normal(size=(m + 1, 2)))
        r = sx.conical_extend(U, V, NormedVector(2, "l2"), V.mean(axis=0), pairs=4000, seed=m)
        assert r.ok

    @pytest.mark.slow
    def test_wasserstein_circle_is_nearly_tight(self):
        best, target, R = sx.wasserstein_circle_tightness()
        assert best >= target - 0.05
        assert best <= target * (1 + 1e-6)
