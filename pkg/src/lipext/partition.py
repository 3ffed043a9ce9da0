"""Lipschitz partitions of unity subordinated to Whitney neighborhoods.

For a Whitney cover with blocks ``B_i`` and ``r_i = d(B_i, A)`` the open
neighborhoods are ``U_i = {x : d(x, B_i) < delta r_i}``.  Weights are

    psi_i(x) = d(x, X \\ U_i) ** m,   phi_i = psi_i / sum_j psi_j,

evaluated on the exterior points X \\ A.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PointInDomain, UncoveredPoint
from .whitney import WhitneyCovering

SUM_TOL = 1e-9


def default_exponent(cover: WhitneyCovering) -> float:
    """``log(3(n+1))`` for basic covers, ``log2(n+2)`` for refined ones.

    ``cover.params.n + 1`` is the neighborhood multiplicity bound, which is
    ``3(n+1)`` for a basic cover built from a Nagata(n, c) witness.
    """
    if cover.kind == "basic":
        return math.log(cover.params.n + 1)
    return math.log2(cover.params.n + 2)


@dataclass
class PartitionOfUnity:
    cover: WhitneyCovering
    m: float
    anchors: np.ndarray    # one point of A per block
    exterior: np.ndarray   # point indices of X \ A, row order of the matrices below
    psi: np.ndarray        # (len(exterior), len(blocks))
    weights: np.ndarray    # phi, same shape
    radius: np.ndarray     # delta * r_i

    @property
    def space(self):
        return self.cover.base.space

    def row(self, x: int) -> int:
        k = np.searchsorted(self.exterior, x)
        if k >= len(self.exterior) or self.exterior[k] != x:
            raise PointInDomain(f"point {x} lies in A")
        return int(k)


def build_partition(cover: WhitneyCovering, m: float | None = None) -> PartitionOfUnity:
    space = cover.base.space
    A = cover.A
    m = default_exponent(cover) if m is None else float(m)
    r = cover.r
    delta = cover.params.delta
    rad = delta * r
    ext = space.complement(A).array
    dist = space.dist
    psi = np.zeros((len(ext), len(cover.blocks)))
    anchors = np.empty(len(cover.blocks), dtype=int)
    for i, b in enumerate(cover.blocks):
        dB = dist[:, b.array].min(axis=1)
        outside = np.flatnonzero(dB >= rad[i])
        if len(outside):
            depth = dist[np.ix_(ext, outside)].min(axis=1)
        else:
            depth = np.full(len(ext), rad[i])
        psi[:, i] = np.where(dB[ext] < rad[i], depth, 0.0) ** m
        sub = dist[np.ix_(b.array, A.array)]
        # nearest pair; ties go to the smallest point of A
        anchors[i] = A.array[int(np.argmin(sub.min(axis=0)))]
    total = psi.sum(axis=1)
    if (total <= 0).any():
        x = int(ext[np.flatnonzero(total <= 0)[0]])
        raise UncoveredPoint(f"point {x} lies in no neighborhood")
    return PartitionOfUnity(cover, m, anchors, ext, psi, psi / total[:, None], rad)


def evaluate_weights(pou: PartitionOfUnity, x: int) -> dict:
    """Sparse weights ``{block: phi_i(x)}`` over the active blocks."""
    row = pou.weights[pou.row(x)]
    return {int(i): float(row[i]) for i in np.flatnonzero(row > 0)}


def check_partition(pou: PartitionOfUnity):
    """Exact structural checks: unit sums, subordination, support size, psi lower bound."""
    space = pou.space
    ext = pou.exterior
    M = pou.cover.base.membership()[:, ext].T  # x in B_i
    dB = np.stack([space.dist[np.ix_(ext, b.array)].min(axis=1) for b in pou.cover.blocks], axis=1)
    sums = pou.weights.sum(axis=1)
    support = pou.weights > 0
    lower = np.where(M, pou.radius[None, :] ** pou.m, 0).max(axis=1)
    return {
        "sum_error": float(np.abs(sums - 1).max()),
        "subordinate": bool((dB[support] < np.broadcast_to(pou.radius, dB.shape)[support]).all()),
        "max_support": int(support.sum(axis=1).max()),
        "support_bound": pou.cover.params.n + 1,
        "psi_lower_ok": bool((pou.psi.sum(axis=1) >= lower * (1 - 1e-12)).all()),
    }


def lipschitz_sum_report(pou: PartitionOfUnity, radius: float | None = None):
    """Per-point ``S(x) = sum_i max_x' |phi_i(x) - phi_i(x')| / d(x, x')``.

    ``x'`` ranges over exterior points within ``radius`` of x (all of them by
    default).  The comparison value is ``6 m / (delta r_j)`` where j is the
    block containing x with the smallest ``r_j`` (the bound only needs to hold
    for some block containing x).
    """
    ext = pou.exterior
    d = pou.space.dist[np.ix_(ext, ext)]
    np.fill_diagonal(d, np.inf)
    if radius is not None:
        d = np.where(d <= radius, d, np.inf)
    W = pou.weights
    S = np.zeros(len(ext))
    for i in range(W.shape[1]):
        col = W[:, i]
        S += (np.abs(col[:, None] - col[None, :]) / d).max(axis=1)
    M = pou.cover.base.membership()[:, ext].T
    r = pou.cover.r
    rows = []
    for k, x in enumerate(ext):
        js = np.flatnonzero(M[k])
        j = int(js[np.argmin(r[js])])
        bound = 6 * pou.m / (pou.cover.params.delta * r[j])
        rows.append({"point": int(x), "S": float(S[k]), "block": j, "r_j": float(r[j]),
                     "bound": bound, "margin": bound - float(S[k])})
    return rows


def nerve_map(pou: PartitionOfUnity, x: int, complex_=None):
    """The weight vector of x as a point of the simplex space over the blocks."""
    from .simplicial import SimplexPoint

    return SimplexPoint(evaluate_weights(pou, x), complex_)


def weights_csv_rows(pou: PartitionOfUnity):
    """``(point, block, weight)`` triples of the nonzero weights."""
    out = []
    for k, x in enumerate(pou.exterior):
        for i in np.flatnonzero(pou.weights[k] > 0):
            out.append((int(x), int(i), float(pou.weights[k, i])))
    return out
