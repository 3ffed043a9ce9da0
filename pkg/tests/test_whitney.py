import numpy as np
import pytest

from lipext import coverings as cv
from lipext import whitney as wh
from lipext.errors import EmptyComplement, InputError, OracleNotNagata, RTooSmall
from lipext.metric_core import PointCloud, SubsetRef


def line_instance(xs, a):
    cloud = PointCloud(np.asarray(xs, dtype=float)[:, None])
    X = cloud.space()
    A = SubsetRef(X, a)
    return cloud, X, A


def planar(rng, nA=8, nE=30):
    P = np.vstack([rng.normal(size=(nA, 2)), rng.normal(size=(nE, 2)) * rng.uniform(1.5, 5)])
    cloud = PointCloud(P)
    X = cloud.space()
    return cloud, X, SubsetRef(X, range(nA))


class TestBasic:
    def test_integer_line(self):
        cloud, X, A = line_instance(range(11), [0])
        W = wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A), r=1.25)
        c = cv.grid_nagata_constants(1)[1]
        assert all(b.diameter() <= 3 * (1 + c) * r for b, r in zip(W.blocks, W.r))
        assert W.is_verified
        assert sorted(set().union(*(b.indices for b in W.blocks))) == list(range(1, 11))

    def test_emitted_parameters_verify(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            cloud, X, A = planar(rng, int(rng.integers(3, 15)))
            W = wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A))
            rep = wh.verify_whitney(W.base, A, *W.params.as_tuple())
            assert rep.ok
            assert rep.max_multiplicity <= 3 * (cv.grid_nagata_constants(2)[0] + 1)

    def test_derived_gamma_needed(self):
        # frozen instance where hd(B, A) / d(B, A) = 1.68/1.125 exceeds r + eps = 1.35
        cloud, X, A = line_instance([0, 1.125, 1.25, 1.56, 1.68], [0])
        W = wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A))
        assert [b.indices for b in W.blocks] == [(1,), (1, 2, 3, 4), (3, 4)]
        assert W.params.gamma == pytest.approx(1.5)
        assert W.meta["stated_gamma"] == pytest.approx(1.35)
        assert W.meta["stated_flags"]["distance"] is False
        assert W.is_verified

    def test_constants(self):
        eps, delta, alpha, gamma = wh.basic_constants(1.25, 1.0)
        assert (eps, delta) == pytest.approx((0.1, 0.04))
        assert alpha == pytest.approx((2 * 1.35 + 2 * 1.45) / 0.9)
        assert gamma == pytest.approx(1.35 / 0.9)

    def test_large_delta_reports_witness(self):
        cloud, X, A = line_instance(range(11), [0])
        W = wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A))
        n, alpha, delta, gamma = W.params.as_tuple()
        rep = wh.verify_whitney(W.base, A, 0, alpha, 0.5, gamma)
        assert not rep.ok
        point, blocks = rep.multiplicity[0]
        assert point in range(1, 11) and len(blocks) >= 2

    def test_errors(self):
        cloud, X, A = line_instance([0, 1], [0, 1])
        with pytest.raises(EmptyComplement):
            wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A))
        cloud, X, A = line_instance([0, 1, 2], [0])
        with pytest.raises(InputError):
            wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A), r=1.0)

    def test_lying_oracle_is_caught(self):
        cloud, X, A = line_instance([0, 0.5, 1, 5, 9], [0, 1, 2])
        liar = cv.NagataOracle(X, A, 0, 0.01, lambda s: cv.Covering(X, [[0, 1, 2]]), "liar")
        with pytest.raises(OracleNotNagata):
            wh.build_whitney_cover(X, A, liar)


class TestRefined:
    def test_cluster_near_domain(self):
        rng = np.random.default_rng(0)
        P = np.vstack([rng.normal(size=(6, 2)) * 0.2, np.array([1.0, 0.0]) + rng.normal(size=(10, 2)) * 0.05])
        X = PointCloud(P).space()
        A = SubsetRef(X, range(6))
        base = cv.single_linkage_oracle(X, A)
        W = wh.build_refined_whitney_cover(X, A, cv.colored_oracle(base), 1, base.c)
        assert W.is_verified
        assert W.meta["subset_multiplicity"]["max_met"] <= 2
        assert all(hd <= W.params.gamma * r for hd, r in
                   zip(wh.block_distances(X, W.blocks, A)[1], W.r))

    @pytest.mark.parametrize("seed", range(4))
    def test_line_two_colors(self, seed):
        rng = np.random.default_rng(seed)
        xs = np.concatenate([rng.uniform(0, 10, 4), -np.exp(rng.uniform(0, 20, 10))])
        cloud, X, A = line_instance(xs, range(4))
        base = cv.grid_oracle(cloud, A)
        W = wh.build_refined_whitney_cover(X, A, cv.colored_oracle(base), 2, base.c)
        assert W.is_verified
        assert W.params.gamma == W.meta["r"] ** 2

    def test_default_r(self):
        assert wh.refined_default_r(1, 1.75) == 128
        assert wh.refined_default_r(2, 1.0) == 512
        p = wh.refined_constants(128, 1.75, 1)
        assert p.delta == pytest.approx(1 / (8 * 128 ** 2))

    def test_r_too_small(self):
        cloud, X, A = line_instance([0, 1, 5], [0, 1])
        base = cv.single_linkage_oracle(X, A)
        with pytest.raises(RTooSmall):
            wh.build_refined_whitney_cover(X, A, cv.colored_oracle(base), 1, base.c, r=10)


def test_subset_multiplicity_exhaustive():
    # E = {x, y} with diam <= theta * d(E, A) meets both singleton blocks
    cloud, X, A = line_instance([0, 10, 11], [0])
    cov = cv.Covering(X, [[1], [2]])
    assert wh.subset_multiplicity(cov, A, 0.09, 3)["max_met"] == 1
    # diam E = 1 = 0.1 * d(E, A) is admissible
    assert wh.subset_multiplicity(cov, A, 0.1, 3)["max_met"] == 2
