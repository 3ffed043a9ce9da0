import itertools
import math

import numpy as np
import pytest
from scipy.sparse.csgraph import shortest_path

from lipext import coverings as cv
from lipext.errors import BaseNotNagata, EnumerationTooLarge, InputError, NotEnumerated, SearchBudgetExceeded
from lipext.metric_core import PointCloud, SubsetRef, validate_metric


def cloud1d(xs):
    return PointCloud(np.asarray(xs, dtype=float)[:, None])


class TestMultiplicity:
    def test_two_points_small_scale(self):
        X = cloud1d([0, 1]).space()
        cov = cv.Covering(X, [[0], [1]])
        assert cv.s_multiplicity(cov, 0.5).multiplicity == 1

    def test_two_points_large_scale(self):
        X = cloud1d([0, 1]).space()
        cov = cv.Covering(X, [[0], [1]])
        rep = cv.s_multiplicity(cov, 2)
        assert rep.multiplicity == 2
        assert rep.witness == [(0, 0), (1, 1)]

    def test_budget(self):
        X = cloud1d(range(5)).space()
        with pytest.raises(SearchBudgetExceeded):
            cv.s_multiplicity(cv.Covering(X, [[i] for i in range(5)]), 1, budget=4)

    def test_matches_brute_force(self):
        # subsets of diameter < s meeting the most blocks, by exhaustion
        rng = np.random.default_rng(3)
        for _ in range(20):
            X = PointCloud(rng.normal(size=(7, 2))).space()
            blocks = [sorted(rng.choice(7, size=rng.integers(1, 4), replace=False)) for _ in range(5)]
            cov = cv.Covering(X, blocks)
            s = float(rng.uniform(0.3, 2))
            best = 0
            for k in range(1, 8):
                for E in itertools.combinations(range(7), k):
                    if k > 1 and X.dist[np.ix_(E, E)].max() >= s:
                        continue
                    best = max(best, sum(bool(set(E) & set(b)) for b in blocks))
            assert cv.s_multiplicity(cov, s).multiplicity == best


class TestGrid:
    def test_unit_line_two_blocks(self):
        X = cloud1d(range(10)).space()
        cov = cv.Covering(X, [list(range(5)), list(range(5, 10))])
        assert cv.verify_nagata(cov, 5, 1, 1)[0]
        assert not cv.verify_nagata(cov, 5, 0, 1)[0]

    def test_cube_assignment(self):
        cov = cv.grid_cover(cloud1d([0, 1, 2, 3]), 2)
        assert [b.indices for b in cov.blocks] == [(0, 1), (2, 3)]

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_certified_constants(self, d):
        rng = np.random.default_rng(d)
        for _ in range(20 if d < 3 else 7):
            cloud = PointCloud(rng.normal(size=(25, d)) * 3)
            s = float(rng.uniform(0.3, 3))
            ok, rep = cv.verify_nagata(cv.grid_cover(cloud, s), s, *cv.grid_nagata_constants(d))
            assert ok, rep

    def test_requires_l2(self):
        with pytest.raises(InputError):
            cv.grid_cover(PointCloud([[0.0], [1.0]], "l1"), 1)


class TestSingleLinkage:
    def test_constant_is_certified(self):
        rng = np.random.default_rng(0)
        X = PointCloud(rng.normal(size=(15, 2))).space()
        A = X.all
        orc = cv.single_linkage_oracle(X, A)
        assert orc.n == 0
        for s in np.geomspace(0.05, 10, 12):
            assert cv.verify_nagata(orc(s), s, 0, orc.c)[0]


class TestColored:
    def test_line_example(self):
        cloud = cloud1d(range(6))
        X = cloud.space()
        s = 1.0
        n, c = cv.grid_nagata_constants(1)
        base = cv.grid_cover(cloud, 2 * (n + 2) * s, X)
        cov = cv.colored_cover(X, s, base, n, c)
        rep = cv.check_colored(cov, s, 2 * (c + 1) * (n + 2) * s)
        assert rep["ok"]
        assert set(cov.colors) <= set(range(1, n + 2))

    def test_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            d = int(rng.integers(1, 3))
            cloud = PointCloud(rng.normal(size=(20, d)) * 4)
            A = cloud.space().all
            orc = cv.grid_oracle(cloud, A)
            s = float(rng.uniform(0.2, 2))
            cov = cv.colored_oracle(orc)(s)
            assert max(cov.diameters()) <= 2 * (orc.c + 1) * (orc.n + 2) * s + 1e-9
            assert cv.check_colored(cov, s, 2 * (orc.c + 1) * (orc.n + 2) * s)["ok"]

    def test_rejects_bad_base(self):
        X = cloud1d(range(6)).space()
        base = cv.Covering(X, [[i] for i in range(6)])
        with pytest.raises(BaseNotNagata):
            cv.colored_cover(X, 1.0, base, 0, 1)


class TestPadded:
    def test_two_points(self):
        X = cloud1d([0, 1]).space()
        cov = cv.iterative_ball_partition(X, 1)
        assert [b.indices for b in cov.blocks] == [(0, 1)]
        assert cov.counts == [2]
        rows = cv.padded_ratio_check(X, 1, cov)
        assert all(r.ok for r in rows)
        # literal reading: deep/containing = 1 against #B(x, 1/4)/#B(x, 1) = 1/2
        lit = cv.padded_ratio_check(X, 1, cov, literal=True)
        assert all(r.ok and r.deep == r.containing == 2 for r in lit)
        assert [(r.ball_pad, r.ball_outer) for r in lit] == [(1, 2), (1, 2)]

    def test_three_points(self):
        X = cloud1d([0, 1, 2]).space()
        cov = cv.iterative_ball_partition(X, 1)
        assert cov.meta["permutations"] == 6
        assert sum(cov.counts) >= 6
        assert all(r.ok for r in cv.padded_ratio_check(X, 1, cov))

    def test_counts_total_per_point(self):
        # each point lies in exactly one block per permutation
        rng = np.random.default_rng(5)
        W = np.triu(rng.uniform(0.1, 3, (5, 5)), 1)
        X = validate_metric(shortest_path(W + W.T, directed=False))
        cov = cv.iterative_ball_partition(X, 1.0)
        M = cov.membership()
        per_point = (M * np.array(cov.counts)[:, None]).sum(axis=0)
        assert (per_point == math.factorial(5)).all()

    def test_random_metrics(self):
        rng = np.random.default_rng(1)
        for _ in range(40):
            n = int(rng.integers(2, 6, endpoint=True))
            W = np.triu(rng.uniform(0.1, 3, (n, n)), 1)
            X = validate_metric(shortest_path(W + W.T, directed=False))
            for D in np.quantile(X.dist[np.triu_indices(n, 1)], (0.2, 0.5, 0.9)):
                cov = cv.iterative_ball_partition(X, float(D))
                assert max(cov.diameters()) <= 2 * D + 1e-12
                assert all(r.ok for r in cv.padded_ratio_check(X, float(D), cov))

    def test_sampling_needs_seed(self):
        X = cloud1d(range(12)).space()
        with pytest.raises(EnumerationTooLarge):
            cv.iterative_ball_partition(X, 1)
        with pytest.raises(InputError):
            cv.iterative_ball_partition(X, 1, mode="sample")
        a = cv.iterative_ball_partition(X, 1, mode="sample", count=50, seed=4)
        b = cv.iterative_ball_partition(X, 1, mode="sample", count=50, seed=4)
        assert a.to_json() == b.to_json()
        with pytest.raises(NotEnumerated):
            cv.padded_ratio_check(X, 1, a)
        assert len(cv.padded_ratio_check(X, 1, a, sampled_ok=True)) == 12


def test_covering_json_roundtrip_fields():
    X = cloud1d([0, 1, 2]).space()
    cov = cv.Covering(X, [[0, 1], [2]], scale=1.0, colors=[1, 1])
    assert cov.to_json() == {"blocks": [[0, 1], [2]], "scale": 1.0, "colors": [1, 1]}
    assert cov.covered == [0, 1, 2]
    A = SubsetRef(X, [0])
    assert 0 in A and 1 not in A
