"""The acceptance suite, shared by ``lipext selftest`` and the test-suite.

Each check builds its own seeded instances, runs the relevant construction
and returns a :class:`CriterionResult`.  Nothing here is tuned per instance:
all tolerances are the fixed ones listed next to each check.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import shortest_path

from . import coverings as cv
from . import extenders as ex
from . import partition as pt
from . import simplicial as sx
from . import transport as tr
from . import whitney as wh
from .metric_core import NormedVector, PartialLipschitzMap, PointCloud, SubsetRef, validate_metric

DEFAULT_SEED = 7


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    seconds: float
    limit: float | None
    details: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.passed and (self.limit is None or self.seconds < self.limit)

    def line(self):
        status = "PASS" if self.ok else "FAIL"
        lim = f" (limit {self.limit:g} s)" if self.limit is not None else ""
        return f"[{status}] {self.number:2d}. {self.name}: {self.seconds:.2f} s{lim}"


# -- instance generators ------------------------------------------------------

def planar_instance(rng, nA_range=(3, 20), nX_max=60, dim_out=2, norm="l2"):
    """Random planar X with a random A and a map f on A with Lip f <= 1."""
    nA = int(rng.integers(*nA_range, endpoint=True))
    nE = int(rng.integers(5, nX_max - nA, endpoint=True))
    P = np.vstack([rng.normal(size=(nA, 2)), rng.normal(size=(nE, 2)) * rng.uniform(1.5, 5)])
    cloud = PointCloud(P)
    X = cloud.space()
    A = SubsetRef(X, range(nA))
    target = NormedVector(dim_out, norm)
    vals = np.tanh(P[:nA] @ rng.normal(size=(2, dim_out)))
    f = PartialLipschitzMap(A, vals, target)
    L = ex.domain_lipschitz(f)
    if L > 1:
        f = PartialLipschitzMap(A, vals / L, target)
    return cloud, X, A, f


def random_graph_metric(rng, n):
    W = rng.uniform(0.1, 3, size=(n, n))
    W = np.triu(W, 1)
    return validate_metric(shortest_path(W + W.T, directed=False))


# -- criteria -------------------------------------------------------------------

def c1_mcshane(seed):
    rng = np.random.default_rng(seed)
    worst, exact = -np.inf, True
    for _ in range(100):
        n = int(rng.integers(2, 40, endpoint=True))
        P = rng.normal(size=(n, 2))
        X = PointCloud(P).space()
        A = SubsetRef(X, rng.choice(n, size=int(rng.integers(1, n, endpoint=True)), replace=False))
        f = PartialLipschitzMap(A, rng.normal(size=(len(A), 1)), NormedVector(1, "l2"))
        r = ex.mcshane_extend(f)
        worst = max(worst, r.certificate.constant - r.lip_f)
        exact &= bool(np.array_equal(r.values[list(A.indices)], f.values))
    return worst <= 1e-9 and exact, {"max_excess": worst, "agrees_on_A": exact}


def c2_padded(seed):
    rng = np.random.default_rng(seed)
    points = fails = literal_fails = 0
    for _ in range(200):
        n = int(rng.integers(1, 6, endpoint=True))
        X = random_graph_metric(rng, n)
        ds = np.unique(X.dist[np.triu_indices(n, 1)]) if n > 1 else np.array([1.0])
        for q in (0.2, 0.5, 0.9):
            D = float(np.quantile(ds, q))
            cov = cv.iterative_ball_partition(X, D)
            rows = cv.padded_ratio_check(X, D, cov)
            points += len(rows)
            fails += sum(not r.ok for r in rows)
            literal_fails += sum(not r.ok for r in cv.padded_ratio_check(X, D, cov, literal=True))
    return fails == 0, {"points": points, "failures": fails, "literal_reading_failures": literal_fails}


def c3_wasserstein(seed):
    rng = np.random.default_rng(seed)
    norms = ("l1", "l2", "linf")
    err = 0.0
    for k in range(50):
        N = int(rng.integers(1, 6, endpoint=True))
        T = NormedVector(2, norms[k % 3])
        P, Q = rng.normal(size=(N, 2)), rng.normal(size=(N, 2))
        a = tr.w1_distance(tr.DiscreteMeasure.uniform(T, P), tr.DiscreteMeasure.uniform(T, Q))[0]
        err = max(err, abs(a - tr.w1_permutation(P, Q, T)))
    axiom = 0.0
    for k in range(100):
        T = NormedVector(2, norms[k % 3])
        ms = []
        for _ in range(3):
            m = int(rng.integers(1, 5, endpoint=True))
            ms.append(tr.DiscreteMeasure(T, rng.normal(size=(m, 2)), rng.dirichlet(np.ones(m))))
        d = lambda u, v: tr.w1_distance(u, v)[0]
        axiom = max(axiom, abs(d(ms[0], ms[1]) - d(ms[1], ms[0])), d(ms[0], ms[0]),
                    d(ms[0], ms[2]) - d(ms[0], ms[1]) - d(ms[1], ms[2]))
    margin = np.inf
    for k in range(200):
        n = int(rng.integers(1, 6, endpoint=True))
        T = NormedVector(2, norms[k % 3])
        ok, m, _ = tr.mixture_check(T, rng.normal(size=(n, 2)), rng.dirichlet(np.ones(n)),
                                     rng.dirichlet(np.ones(n)))
        margin = min(margin, m)
    passed = err <= 1e-9 and axiom <= 1e-9 and margin >= -1e-9
    return passed, {"oracle_error": err, "axiom_violation": axiom, "min_mixture_margin": margin}


def _dense_instances():
    """A fine 1-D grid and a planar patch, both at distance >= 1 from A."""
    line = np.concatenate([[0.0], np.arange(1.0, 6.0, 0.005)])[:, None]
    g = np.arange(0.0, 0.4, 0.005)
    patch = np.array([(1.0 + a, b) for a in g for b in g])
    plane = np.vstack([[[0.0, 0.0], [0.0, 0.5], [0.3, -0.2]], patch])
    return [(PointCloud(line), [0]), (PointCloud(plane), [0, 1, 2])]


def c4_partition(seed):
    rng = np.random.default_rng(seed)
    sum_err, sub_ok, support_ok = 0.0, True, True
    for _ in range(20):
        cloud, X, A, _ = planar_instance(rng)
        pou = pt.build_partition(wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A)))
        chk = pt.check_partition(pou)
        sum_err = max(sum_err, chk["sum_error"])
        sub_ok &= chk["subordinate"] and chk["psi_lower_ok"]
        support_ok &= chk["max_support"] <= chk["support_bound"]
    dense = []
    for cloud, a in _dense_instances():
        X = cloud.space()
        A = SubsetRef(X, a)
        pou = pt.build_partition(wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A)))
        ext = pou.exterior
        dd = X.dist[np.ix_(ext, ext)] + np.diag(np.full(len(ext), np.inf))
        mesh = float(dd.min(axis=1).max())
        rows = pt.lipschitz_sum_report(pou)
        dense.append({"points": len(ext), "mesh": mesh, "mesh_ok": mesh <= 0.01 * pou.cover.r.min(),
                      "min_margin": min(r["margin"] for r in rows)})
    dense_ok = all(d["mesh_ok"] and d["min_margin"] >= 0 for d in dense)
    passed = sum_err <= 1e-9 and sub_ok and support_ok and dense_ok
    return passed, {"sum_error": sum_err, "subordinate": sub_ok, "support_ok": support_ok, "dense": dense}


def _refined_instances(rng):
    out = []
    # cluster of 10 points near distance 1 from A, n = 1
    Apts = rng.normal(size=(6, 2)) * 0.2
    ext = np.array([1.0, 0.0]) + rng.normal(size=(10, 2)) * 0.05
    out.append((PointCloud(np.vstack([Apts, ext])), 6, 1))
    for _ in range(4):
        nA = int(rng.integers(3, 8))
        u = rng.normal(size=(12, 2))
        ext = u / np.linalg.norm(u, axis=1, keepdims=True) * np.exp(rng.uniform(0, 16, (12, 1)))
        out.append((PointCloud(np.vstack([rng.normal(size=(nA, 2)), ext])), nA, 1))
    for _ in range(5):
        nA = int(rng.integers(3, 8))
        P = np.concatenate([rng.uniform(0, 10, nA), -np.exp(rng.uniform(0, 20, 12))])[:, None]
        out.append((PointCloud(P), nA, 2))
    return out


def c5_whitney(seed):
    rng = np.random.default_rng(seed)
    basic_ok = True
    for _ in range(20):
        cloud, X, A, _ = planar_instance(rng)
        W = wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A))
        rep = wh.verify_whitney(W.base, A, *W.params.as_tuple())
        basic_ok &= rep.ok
    refined = []
    for cloud, nA, n in _refined_instances(rng):
        X = cloud.space()
        A = SubsetRef(X, range(nA))
        if n == 1:
            base = cv.single_linkage_oracle(X, A)
        else:
            base = cv.grid_oracle(cloud, A)
        W = wh.build_refined_whitney_cover(X, A, cv.colored_oracle(base), n, base.c)
        sm = W.meta["subset_multiplicity"]
        rep = wh.verify_whitney(W.base, A, *W.params.as_tuple())
        refined.append({"n": n, "blocks": len(W), "max_met": sm["max_met"], "axioms": rep.ok,
                        "ok": sm["max_met"] <= n + 1 and rep.ok})
    passed = basic_ok and all(r["ok"] for r in refined)
    return passed, {"basic_ok": basic_ok, "refined": refined}


def c6_whitney_bound(seed):
    rng = np.random.default_rng(seed)
    worst, anchors = 0.0, True
    for _ in range(20):
        cloud, X, A, f = planar_instance(rng)
        r = ex.whitney_extend(f, cv.grid_oracle(cloud, A))
        worst = max(worst, r.certificate.constant / r.bound)
        anchors &= r.checks["anchor"]["ok"]
    return worst <= 1 and anchors, {"max_ratio_to_bound": worst, "anchor_ok": anchors}


def c7_lee_naor(seed):
    rng = np.random.default_rng(seed)
    rows = []
    for nA in (16, 32, 64):
        P = np.vstack([rng.normal(size=(nA, 2)), rng.normal(size=(30, 2)) * 3])
        X = PointCloud(P).space()
        A = SubsetRef(X, range(nA))
        vals = np.tanh(P[:nA] @ rng.normal(size=(2, 2)))
        f = PartialLipschitzMap(A, vals, NormedVector(2, "l2"))
        L = ex.domain_lipschitz(f)
        f = PartialLipschitzMap(A, vals / max(L, 1.0), NormedVector(2, "l2"))
        r = ex.lee_naor_extend(f, seed=seed)
        rows.append({"n": nA, "lip_F": r.certificate.constant, "bound": r.bound,
                     "omega_sum_error": r.checks["omega_sum_error"], "deviation_ok": r.checks["deviation_ok"],
                     "ok": r.within_bound and r.checks["omega_sum_error"] <= 1e-9 and r.checks["deviation_ok"]})
    return all(r["ok"] for r in rows), {"instances": rows}


def c8_sphere(seed):
    c = [sx.sphere_constant(n) for n in range(1, 7)]
    ok = abs(c[0] - 4 / math.pi) <= 1e-6 and abs(c[1] - 4 / 3) <= 1e-6 and max(c) <= math.sqrt(2) + 1e-9
    return ok, {"c": c}


def c9_conical(seed):
    rng = np.random.default_rng(seed)
    rows = []
    for m, norm in ((1, "l1"), (2, "linf")):
        U = sx.sphere_samples(m)
        M = rng.normal(size=(m + 1, 3))
        V = np.tanh(U @ M) + 0.3 * np.sin(2 * U[:, :1])
        p = V.mean(axis=0)
        r = sx.conical_extend(U, V, NormedVector(3, norm), p, pairs=10_000, seed=seed)
        rows.append({"m": m, "lip_f": r.lip_f, "R": r.R, "lip_F": r.lip_F, "bound": r.bound, "ok": r.ok})
    best, target, R = sx.wasserstein_circle_tightness()
    tight = best >= target - 0.05
    return all(r["ok"] for r in rows) and tight, {"samples": rows, "tightness": best, "sqrt(1+R^2)": target}


def c10_routing(seed):
    rng = np.random.default_rng(seed)
    worst, inside = 0.0, True
    for _ in range(10_000):
        n = int(rng.integers(1, 6, endpoint=True))
        k = int(rng.integers(0, n))
        S1 = list(range(n + 1))
        S2 = list(range(k + 1)) + list(range(n + 1, 2 * n + 1 - k))
        x = sx.random_simplex_point(rng, S1)
        y = sx.random_simplex_point(rng, S2)
        route = sx.route_through_intersection(S1, S2, x, y)
        worst = max(worst, route.ratio / (4 * math.sqrt(n)))
        inside &= route.z.support <= (set(S1) & set(S2))
    return worst <= 1 and inside, {"max_ratio_over_4sqrt_n": worst, "z_in_intersection": inside}


def c11_nerve_bound(seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        cloud, X, A, f = planar_instance(rng)
        W = wh.build_whitney_cover(X, A, cv.grid_oracle(cloud, A))
        r = ex.nerve_extend(f, W, "barycentric")
        worst = max(worst, r.certificate.constant / r.bound)
    return worst <= 1, {"max_ratio_to_bound": worst}


CRITERIA = [
    (1, "McShane preservation", c1_mcshane, 2),
    (2, "Padded decomposition counts", c2_padded, 30),
    (3, "Wasserstein oracle equivalence", c3_wasserstein, 10),
    (4, "Partition of unity", c4_partition, 60),
    (5, "Whitney cover axioms", c5_whitney, 120),
    (6, "Whitney extension bound", c6_whitney_bound, None),
    (7, "Multiscale extension suite", c7_lee_naor, None),
    (8, "Sphere constants", c8_sphere, None),
    (9, "Conical extension", c9_conical, 120),
    (10, "Simplicial routing", c10_routing, None),
    (11, "Nerve extension bound", c11_nerve_bound, None),
]


def run_criterion(number: int, seed: int = DEFAULT_SEED) -> CriterionResult:
    num, name, fn, limit = CRITERIA[number - 1]
    t0 = time.perf_counter()
    try:
        passed, details = fn(seed)
    except Exception as exc:  # a raised property violation is a failed criterion
        passed, details = False, {"error": f"{type(exc).__name__}: {exc}"}
    return CriterionResult(num, name, bool(passed), time.perf_counter() - t0, limit, details)


def thread_cap() -> int:
    try:
        return max(1, int(os.environ.get("LIPEXT_THREADS", "1")))
    except ValueError:
        return 1


def run_all(seed: int = DEFAULT_SEED, numbers=None):
    numbers = list(numbers or range(1, len(CRITERIA) + 1))
    workers = thread_cap()
    if workers == 1:
        return [run_criterion(k, seed) for k in numbers]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda k: run_criterion(k, seed), numbers))
