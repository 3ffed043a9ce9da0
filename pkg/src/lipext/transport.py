"""Finitely supported probability measures, exact W1 distances and barycenters.

W1 is solved as the primal transportation LP with HiGHS dual simplex, which
returns a vertex-optimal plan that doubles as a witness.  For uniform
measures on N points an independent brute-force oracle minimises over all
N! matchings.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import (
    InputError,
    MixedTargetSpaces,
    NotUniform,
    TooLarge,
    UnsupportedTarget,
)
from .metric_core import MidpointSpace, NormedVector

WEIGHT_TOL = 1e-12
PLAN_TOL = 1e-10
MAX_PERMUTATION_N = 8


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure with finite support in ``target``.

    Equal support points are merged and weights within 1e-12 of summing to
    one are renormalised.  For normed targets the support is an ``(k, d)``
    array; for midpoint tables it is an array of point labels.
    """

    target: object
    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if (w < 0).any():
            raise InputError("weights must be nonnegative")
        total = w.sum()
        if abs(total - 1) > WEIGHT_TOL * max(1, len(w)):
            raise InputError(f"weights sum to {total}, not 1")
        if isinstance(self.target, NormedVector):
            pts = np.asarray(self.support, dtype=float).reshape(len(w), -1)
            if pts.shape[1] != self.target.dim:
                raise InputError("support dimension does not match the target")
            keys, inv = np.unique(pts, axis=0, return_inverse=True)
        else:
            pts = np.asarray(self.support, dtype=int).ravel()
            keys, inv = np.unique(pts, return_inverse=True)
        merged = np.zeros(len(keys))
        np.add.at(merged, inv.ravel(), w)
        keep = merged > 0
        keys, merged = keys[keep], merged[keep]
        merged = merged / merged.sum()
        keys = np.array(keys)
        keys.setflags(write=False)
        merged.setflags(write=False)
        object.__setattr__(self, "support", keys)
        object.__setattr__(self, "weights", merged)

    def __len__(self):
        return len(self.weights)

    @classmethod
    def dirac(cls, target, point):
        return cls(target, [point], [1.0])

    @classmethod
    def uniform(cls, target, points):
        k = len(points)
        return cls(target, points, np.full(k, 1.0 / k))

    def to_json(self):
        return {"support": self.support.tolist(), "weights": self.weights.tolist()}


@dataclass(frozen=True)
class TransportPlan:
    flow: np.ndarray
    cost: float


def _same_target(mu, nu):
    a, b = mu.target, nu.target
    if a is b:
        return a
    if isinstance(a, NormedVector) and isinstance(b, NormedVector) and (a.dim, a.norm) == (b.dim, b.norm):
        return a
    raise MixedTargetSpaces("measures live in different target spaces")


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure):
    target = _same_target(mu, nu)
    return target.pairwise(mu.support, nu.support)


def w1_distance(mu: DiscreteMeasure, nu: DiscreteMeasure):
    """Exact W1 distance and an optimal plan."""
    C = cost_matrix(mu, nu)
    k, l = C.shape
    a, b = mu.weights, nu.weights
    if k == 1 or l == 1:
        flow = np.outer(a, b)
        return float((flow * C).sum()), TransportPlan(flow, float((flow * C).sum()))
    A_eq = np.zeros((k + l, k * l))
    for i in range(k):
        A_eq[i, i * l:(i + 1) * l] = 1
    for j in range(l):
        A_eq[k + j, j::l] = 1
    res = linprog(C.ravel(), A_eq=A_eq[:-1], b_eq=np.concatenate([a, b])[:-1], bounds=(0, None),
                  method="highs-ds")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    flow = np.maximum(res.x.reshape(k, l), 0.0)
    cost = float((flow * C).sum())
    return cost, TransportPlan(flow, cost)


def w1_permutation(mu_points, nu_points, target) -> float:
    """``min_pi (1/N) sum d(y_i, z_pi(i))`` over all permutations (N <= 8).

    Takes raw point lists so that repeated points keep mass 1/N each.
    """
    N = len(mu_points)
    if N != len(nu_points):
        raise NotUniform("both measures need the same number of equally weighted atoms")
    if N > MAX_PERMUTATION_N:
        raise TooLarge(f"N = {N} exceeds {MAX_PERMUTATION_N}")
    C = target.pairwise(np.asarray(mu_points), np.asarray(nu_points))
    rows = np.arange(N)
    best = min(C[rows, list(p)].sum() for p in itertools.permutations(range(N)))
    return float(best) / N


def mixture_check(target, points, alpha, beta):
    """Check ``W1(sum a_i d_xi, sum b_i d_xi) <= (D/2) sum |a_i - b_i|``.

    Returns ``(ok, margin, w1)`` with margin = bound - W1.
    """
    pts = np.asarray(points)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    D = float(target.pairwise(pts).max()) if len(pts) > 1 else 0.0
    bound = D / 2 * float(np.abs(alpha - beta).sum())
    w = w1_distance(DiscreteMeasure(target, pts, alpha), DiscreteMeasure(target, pts, beta))[0]
    margin = bound - w
    return margin >= -1e-9, margin, w


def barycenter(target, mu: DiscreteMeasure):
    """Weighted average of the support; 1-Lipschitz for W1 on normed targets."""
    if isinstance(target, MidpointSpace) or not isinstance(target, NormedVector):
        raise UnsupportedTarget("barycenters are implemented for normed targets only; "
                                "midpoint-table targets have no constructive barycenter here")
    if len(mu) == 1:
        return np.array(mu.support[0], dtype=float)
    return mu.weights @ mu.support
