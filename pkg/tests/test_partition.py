import numpy as np
import pytest

from lipext import coverings as cv
from lipext import partition as pt
from lipext import whitney as wh
from lipext.errors import PointInDomain
from lipext.metric_core import PointCloud, SubsetRef


def pou_for(P, a):
    cloud = PointCloud(np.asarray(P, dtype=float).reshape(len(P), -1))
    X = cloud.space()
    A = SubsetRef(X, a)
    return pt.build_partition(wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A)))


def test_integer_line_sums():
    pou = pou_for(np.arange(11.0), [0])
    assert np.abs(pou.weights.sum(axis=1) - 1).max() <= 1e-12
    w = pt.evaluate_weights(pou, 5)
    assert sum(w.values()) == pytest.approx(1, abs=1e-12)
    with pytest.raises(PointInDomain):
        pt.evaluate_weights(pou, 0)


def test_exponent():
    pou = pou_for(np.arange(11.0), [0])
    assert pou.m == pytest.approx(np.log(3 * (cv.grid_nagata_constants(1)[0] + 1)))


@pytest.mark.parametrize("seed", range(10))
def test_structure_on_planar_instances(seed):
    rng = np.random.default_rng(seed)
    P = np.vstack([rng.normal(size=(8, 2)), rng.normal(size=(40, 2)) * 4])
    pou = pou_for(P, range(8))
    chk = pt.check_partition(pou)
    assert chk["sum_error"] <= 1e-9
    assert chk["subordinate"] and chk["psi_lower_ok"]
    assert chk["max_support"] <= chk["support_bound"]


def test_lipschitz_sum_on_dense_line():
    xs = np.concatenate([[0.0], np.arange(1.0, 4.0, 0.01)])
    pou = pou_for(xs, [0])
    assert 0.01 <= 0.01 * pou.cover.r.min() + 1e-12
    rows = pt.lipschitz_sum_report(pou)
    assert min(r["margin"] for r in rows) >= 0


def test_lipschitz_sum_on_planar_patch():
    g = np.arange(0.0, 0.2, 0.01)
    patch = np.array([(1.0 + a, b) for a in g for b in g])
    P = np.vstack([[[0.0, 0.0], [0.0, 0.4]], patch])
    pou = pou_for(P, [0, 1])
    rows = pt.lipschitz_sum_report(pou)
    assert min(r["margin"] for r in rows) >= 0


def test_csv_rows_match_weights():
    pou = pou_for(np.arange(11.0), [0])
    rows = pt.weights_csv_rows(pou)
    assert len(rows) == int((pou.weights > 0).sum())
    assert all(w > 0 for _, _, w in rows)
