"""Nagata coverings, colored coverings and iterative ball partitions.

A :class:`Covering` is an indexed family of nonempty blocks of a finite metric
space.  Blocks may repeat (``counts`` records multiplicities), which is how the
permutation-indexed partitions of :func:`iterative_ball_partition` are stored
without materialising ``n!`` copies of identical sets.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    BaseNotNagata,
    EnumerationTooLarge,
    InputError,
    InternalCoverGap,
    NotEnumerated,
    SearchBudgetExceeded,
)
from .metric_core import FiniteMetricSpace, PointCloud, SubsetRef

DEFAULT_BLOCK_BUDGET = 64
MAX_ENUMERATE = 8


@dataclass(frozen=True, eq=False)
class Covering:
    space: FiniteMetricSpace
    blocks: list
    scale: float | None = None
    colors: list | None = None
    block_dist_to_A: list | None = None
    counts: list | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        blocks = [b if isinstance(b, SubsetRef) else SubsetRef(self.space, b) for b in self.blocks]
        object.__setattr__(self, "blocks", blocks)
        if self.colors is not None and len(self.colors) != len(blocks):
            raise InputError("one color per block required")
        if self.counts is not None and len(self.counts) != len(blocks):
            raise InputError("one count per block required")

    def __len__(self):
        return len(self.blocks)

    @property
    def covered(self):
        return sorted(set().union(*(b.indices for b in self.blocks))) if self.blocks else []

    def diameters(self):
        return [b.diameter() for b in self.blocks]

    def membership(self):
        """Boolean matrix ``M[i, x]``: point ``x`` lies in block ``i``."""
        M = np.zeros((len(self.blocks), len(self.space)), dtype=bool)
        for i, b in enumerate(self.blocks):
            M[i, b.array] = True
        return M

    def to_json(self):
        out = {"blocks": [list(b.indices) for b in self.blocks], "scale": self.scale}
        if self.colors is not None:
            out["colors"] = list(self.colors)
        if self.counts is not None:
            out["counts"] = list(self.counts)
        if self.block_dist_to_A is not None:
            out["block_dist_to_A"] = list(self.block_dist_to_A)
        return out


@dataclass(frozen=True)
class MultiplicityReport:
    s: float
    multiplicity: int
    witness: list  # (block index, representative point)


@dataclass
class NagataReport:
    ok: bool
    multiplicity: MultiplicityReport
    diameter_violations: list  # (block index, diameter)
    n: int
    c: float
    s: float


# -- s-multiplicity ---------------------------------------------------------

def s_multiplicity(covering: Covering, s: float, budget: int = DEFAULT_BLOCK_BUDGET) -> MultiplicityReport:
    """Largest number of blocks met by a subset of diameter < ``s``.

    Equivalent to the largest family of blocks admitting representatives with
    pairwise distances < ``s`` (representatives may coincide).  Exact
    branch-and-bound, seeded with the best single-point family.
    """
    if s <= 0:
        raise InputError("s must be positive")
    blocks = covering.blocks
    if len(blocks) > budget:
        raise SearchBudgetExceeded(f"{len(blocks)} blocks exceeds the exact-search budget of {budget}")
    if not blocks:
        return MultiplicityReport(s, 0, [])
    close = covering.space.dist < s
    members = [b.array for b in blocks]

    # Lower bound: all blocks through a single point.
    M = covering.membership()
    x0 = int(np.argmax(M.sum(axis=0)))
    best = [(i, x0) for i in range(len(blocks)) if M[i, x0]]

    def search(chosen, cands):
        nonlocal best
        # cands: list of (block index, admissible points) in order
        if len(chosen) + len(cands) <= len(best):
            return
        if not cands:
            best = list(chosen)
            return
        (bi, pts), rest = cands[0], cands[1:]
        for p in pts:
            nxt = []
            for bj, qs in rest:
                qs2 = qs[close[p, qs]]
                if len(qs2):
                    nxt.append((bj, qs2))
            chosen.append((bi, int(p)))
            search(chosen, nxt)
            chosen.pop()
            if len(best) == len(blocks):
                return
        search(chosen, rest)

    search([], [(i, m) for i, m in enumerate(members)])
    return MultiplicityReport(s, len(best), sorted(best))


def verify_nagata(covering: Covering, s: float, n: int, c: float, budget: int = DEFAULT_BLOCK_BUDGET):
    """Check s-multiplicity <= n+1 and every block diameter <= c*s."""
    if s <= 0 or n < 0 or c < 0:
        raise InputError("need s > 0, n >= 0, c >= 0")
    rep = s_multiplicity(covering, s, budget)
    tol = 1 + 1e-12
    bad = [(i, d) for i, d in enumerate(covering.diameters()) if d > c * s * tol]
    ok = rep.multiplicity <= n + 1 and not bad
    return ok, NagataReport(ok, rep, bad, n, c, s)


# -- concrete Nagata covers -------------------------------------------------

def grid_nagata_constants(d: int):
    """Certified ``(n, c)`` for :func:`grid_cover` in dimension ``d``."""
    return 2 ** d - 1, math.sqrt(d) * d


def grid_cover(cloud: PointCloud, s: float, space: FiniteMetricSpace | None = None, subset=None) -> Covering:
    """Cover by half-open axis cubes of side ``s*d``.

    A set of l2-diameter < s spans at most two cubes per axis, so the
    s-multiplicity is at most ``2**d`` and each block has diameter at most
    ``sqrt(d) * d * s``.  Only the points listed in ``subset`` are covered.
    """
    if cloud.norm != "l2":
        raise InputError("grid_cover requires an l2 point cloud")
    if s <= 0:
        raise InputError("s must be positive")
    space = cloud.space() if space is None else space
    idx = range(len(cloud)) if subset is None else list(subset)
    side = s * cloud.dim
    cells = {}
    for i in idx:
        key = tuple(np.floor(cloud.coords[i] / side).astype(np.int64))
        cells.setdefault(key, []).append(i)
    keys = sorted(cells)
    n, c = grid_nagata_constants(cloud.dim)
    return Covering(space, [cells[k] for k in keys], scale=s, meta={"method": "grid", "n": n, "c": c})


def single_linkage_cover(space: FiniteMetricSpace, s: float, subset=None) -> Covering:
    """Components of the graph joining points at distance < s.

    Distinct components are at distance >= s, so the s-multiplicity is one.
    """
    idx = list(range(len(space))) if subset is None else list(subset)
    sub = space.dist[np.ix_(idx, idx)]
    labels = _components(sub < s)
    groups = {}
    for k, lab in enumerate(labels):
        groups.setdefault(lab, []).append(idx[k])
    return Covering(space, [groups[g] for g in sorted(groups)], scale=s, meta={"method": "single-linkage"})


def single_linkage_constant(space: FiniteMetricSpace, subset=None) -> float:
    """Smallest c such that every single-linkage cover of the subset is (c*s)-bounded.

    Components only change at pairwise distances t; on (t_j, t_{j+1}] the
    ratio diam/s is largest as s -> t_j+, so c = max_j diam_j / t_j.
    """
    idx = list(range(len(space))) if subset is None else list(subset)
    if len(idx) < 2:
        return 0.0
    sub = space.dist[np.ix_(idx, idx)]
    ts = np.unique(sub[np.triu_indices(len(idx), 1)])
    c = 0.0
    for t in ts:
        labels = _components(sub <= t)
        for lab in set(labels):
            members = [k for k, l in enumerate(labels) if l == lab]
            if len(members) > 1:
                c = max(c, float(sub[np.ix_(members, members)].max()) / t)
    return c


def _components(adj):
    n = adj.shape[0]
    labels = [-1] * n
    cur = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = cur
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(adj[u]):
                if labels[v] < 0:
                    labels[v] = cur
                    stack.append(int(v))
        cur += 1
    return labels


@dataclass
class NagataOracle:
    """Certified Nagata(n, c) witness: ``oracle(s)`` returns a cover of ``subset``."""

    space: FiniteMetricSpace
    subset: SubsetRef
    n: int
    c: float
    build: Callable[[float], Covering]
    name: str = "custom"

    def __call__(self, s):
        return self.build(s)


def grid_oracle(cloud: PointCloud, subset: SubsetRef, space: FiniteMetricSpace | None = None) -> NagataOracle:
    space = subset.space if space is None else space
    n, c = grid_nagata_constants(cloud.dim)
    return NagataOracle(space, subset, n, c, lambda s: grid_cover(cloud, s, space, subset.indices), "grid")


def single_linkage_oracle(space: FiniteMetricSpace, subset: SubsetRef) -> NagataOracle:
    c = single_linkage_constant(space, subset.indices)
    return NagataOracle(space, subset, 0, c, lambda s: single_linkage_cover(space, s, subset.indices),
                        "single-linkage")


# -- colored covers ---------------------------------------------------------

def colored_cover(space: FiniteMetricSpace, s: float, base: Covering, n: int, c: float,
                  subset=None, budget: int = DEFAULT_BLOCK_BUDGET) -> Covering:
    """Cover with ``n+1`` colors, same-colored blocks more than ``s`` apart.

    The cubical construction is run at the inflated scale ``t = (n+2) s``:
    ``base`` must have 2t-multiplicity <= n+1 and blocks of diameter <= 2ct.
    With ``phi_i(x) = max(t - d(x, B_i), 0)`` and thresholds
    ``t_k = (1 - k/(n+2)) t``, point x joins the block of the active set J
    (color |J| = k) iff ``phi_i(x) > t_k`` on J and ``phi_j(x) <= t_{k+1}``
    off J.  Output blocks then have diameter <= 2(c+1)(n+2)s.
    """
    if s <= 0:
        raise InputError("s must be positive")
    t = (n + 2) * s
    pts = list(range(len(space))) if subset is None else list(subset)
    ok, rep = verify_nagata(base, 2 * t, n, 2 * c * (n + 2), budget)
    if not ok:
        raise BaseNotNagata(
            f"base cover fails Nagata at scale {2 * t}: multiplicity {rep.multiplicity.multiplicity}, "
            f"{len(rep.diameter_violations)} oversize blocks")
    base_blocks = [b.array for b in base.blocks]
    phi = np.stack([np.maximum(t - space.dist[np.ix_(pts, b)].min(axis=1), 0.0) for b in base_blocks], axis=1)
    thresholds = [(1 - k / (n + 2)) * t for k in range(n + 3)]
    thresholds[n + 2] = 0.0
    groups = {}
    for row, x in enumerate(pts):
        found = False
        for k in range(1, n + 2):
            J = np.flatnonzero(phi[row] > thresholds[k + 1])
            if len(J) == k and phi[row, J].min() > thresholds[k]:
                groups.setdefault(tuple(int(j) for j in J), []).append(x)
                found = True
        if not found:
            raise InternalCoverGap(f"point {x} lies in no colored block")
    keys = sorted(groups, key=lambda J: (len(J), J))
    out = Covering(space, [groups[J] for J in keys], scale=s, colors=[len(J) for J in keys],
                   meta={"method": "colored", "n": n, "c": c, "active_sets": keys})
    rep = check_colored(out, s, 2 * (c + 1) * (n + 2) * s, subset=pts)
    if not rep["ok"]:
        raise InternalCoverGap(f"colored cover failed its own guarantees: {rep}")
    return out


def check_colored(cover: Covering, s: float, diam_bound: float, subset=None):
    """Verify separation within colors, the diameter bound and coverage."""
    d = cover.space.dist
    sep_bad = []
    by_color = {}
    for i, col in enumerate(cover.colors):
        by_color.setdefault(col, []).append(i)
    for col, idx in by_color.items():
        for a, b in itertools.combinations(idx, 2):
            gap = d[np.ix_(cover.blocks[a].array, cover.blocks[b].array)].min()
            if not gap > s:
                sep_bad.append((a, b, float(gap)))
    diam_bad = [(i, dm) for i, dm in enumerate(cover.diameters()) if dm > diam_bound * (1 + 1e-12)]
    want = set(range(len(cover.space))) if subset is None else set(subset)
    missing = sorted(want - set(cover.covered))
    return {"ok": not sep_bad and not diam_bad and not missing,
            "separation_violations": sep_bad, "diameter_violations": diam_bad, "uncovered": missing}


def colored_oracle(base: NagataOracle) -> Callable[[float], Covering]:
    """Colored covers of ``base.subset`` at any scale, using ``base`` at the inflated scale."""
    n, c = base.n, base.c

    def build(s):
        b = base(2 * (n + 2) * s)
        return colored_cover(base.space, s, b, n, c, subset=base.subset.indices)

    build.n = n
    build.c = c
    return build


# -- iterative ball partitioning --------------------------------------------

def _partition_for(order, dist, radius):
    """Block index (position in ``order``) of every point for one permutation."""
    n = dist.shape[0]
    owner = np.full(n, -1)
    for k, center in enumerate(order):
        grab = (owner < 0) & (dist[center] <= radius)
        owner[grab] = k
        if owner.min() >= 0:
            break
    return owner


def iterative_ball_partition(space: FiniteMetricSpace, D: float, mode="enumerate", count: int = 2000,
                             seed: int | None = None, subset=None) -> Covering:
    """Union over permutations of the carved-ball partitions of radius ``D``.

    For each permutation pi the blocks are ``B(x_pi(k), D)`` minus all earlier
    blocks; empty blocks are dropped.  Identical blocks are merged and their
    multiplicity stored in ``counts`` so that per-point counts over all
    permutations stay exact.  Every block has diameter <= 2D.
    """
    if D <= 0:
        raise InputError("D must be positive")
    pts = np.arange(len(space)) if subset is None else np.asarray(list(subset), dtype=int)
    dist = space.dist[np.ix_(pts, pts)]
    m = len(pts)
    if mode == "enumerate":
        if m > MAX_ENUMERATE:
            raise EnumerationTooLarge(f"full enumeration needs |X| <= {MAX_ENUMERATE}, got {m}")
        perms = itertools.permutations(range(m))
        total = math.factorial(m)
    elif mode == "sample":
        if seed is None:
            raise InputError("sampled mode requires an explicit seed")
        rng = np.random.default_rng(seed)
        perms = (rng.permutation(m) for _ in range(count))
        total = count
    else:
        raise InputError(f"unknown mode {mode!r}")
    tally = {}
    for order in perms:
        owner = _partition_for(order, dist, D)
        for k in np.unique(owner):
            key = tuple(int(p) for p in pts[owner == k])
            tally[key] = tally.get(key, 0) + 1
    keys = sorted(tally)
    return Covering(space, [list(k) for k in keys], scale=D, counts=[tally[k] for k in keys],
                    meta={"method": "padded", "mode": mode, "permutations": total, "radius": D,
                          "seed": seed, "points": [int(p) for p in pts]})


@dataclass(frozen=True)
class PaddedPoint:
    point: int
    deep: int       # permutation-blocks containing B(x, pad)
    containing: int  # permutation-blocks containing x
    ball_pad: int   # #B(x, pad)
    ball_outer: int  # #B(x, bound)
    ok: bool


def padded_ratio_check(space: FiniteMetricSpace, D: float, covering: Covering, sampled_ok: bool = False,
                       literal: bool = False):
    """Integer check of ``deep/containing >= #B(x, bound/4) / #B(x, bound)``.

    The covering from :func:`iterative_ball_partition` with radius ``D`` is
    ``bound = 2D``-bounded, so the padding radius is ``D/2`` and the outer
    ball has radius ``2D``.  With ``literal=True`` the radii ``D/4`` and
    ``D`` are used instead; that variant can fail and is informational.
    Counts run over all permutation-blocks with multiplicity and are
    compared cross-multiplied.
    """
    if covering.meta.get("mode") != "enumerate" and not sampled_ok:
        raise NotEnumerated("padded ratio is exact only for fully enumerated coverings")
    pts = covering.meta.get("points", list(range(len(space))))
    dist = space.dist[np.ix_(pts, pts)]
    pos = {p: k for k, p in enumerate(pts)}
    blocks = [np.array([pos[p] for p in b.indices]) for b in covering.blocks]
    counts = covering.counts or [1] * len(blocks)
    pad, outer = (D / 4, D) if literal else (D / 2, 2 * D)
    out = []
    for k, x in enumerate(pts):
        inner = np.flatnonzero(dist[k] <= pad)
        deep = containing = 0
        for b, cnt in zip(blocks, counts):
            inside = np.isin(inner, b)
            if k in b:
                containing += cnt
                if inside.all():
                    deep += cnt
        a = len(inner)
        bb = int((dist[k] <= outer).sum())
        out.append(PaddedPoint(int(x), deep, containing, a, bb, deep * bb >= a * containing))
    return out
