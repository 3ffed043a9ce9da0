"""Whitney-type coverings of the complement X \\ A and their verification.

Two constructions are provided:

* :func:`build_whitney_cover` pulls a Nagata cover of ``A`` back along a
  nearest-point map from separated nets of the annuli
  ``R_k = {r^k <= d(x, A) < r^(k+1)}``.  Each point sees at most ``3(n+1)``
  enlarged blocks.
* :func:`build_refined_whitney_cover` uses ``n`` interleaved families of
  sub-annuli and colored covers of ``A`` so that small sets ``E`` (relative to
  their distance to ``A``) meet at most ``n+1`` blocks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coverings import Covering, NagataOracle, check_colored, verify_nagata
from .errors import (
    EmptyComplement,
    InputError,
    OracleNotColored,
    OracleNotNagata,
    PropertyViolation,
    RTooSmall,
    SearchBudgetExceeded,
)
from .metric_core import FiniteMetricSpace, SubsetRef, greedy_separated_net, nearest_map

REL_TOL = 1e-12
DEFAULT_R = 1.25
SEARCH_NODE_BUDGET = 2_000_000


@dataclass(frozen=True)
class WhitneyParams:
    n: int          # every point lies in at most n+1 neighborhoods
    alpha: float
    delta: float
    gamma: float

    def as_tuple(self):
        return (self.n, self.alpha, self.delta, self.gamma)


@dataclass
class WhitneyReport:
    ok: bool
    diameter: list = field(default_factory=list)      # (block, diam, alpha * r_i)
    multiplicity: list = field(default_factory=list)  # (point, [blocks])
    distance: list = field(default_factory=list)      # (block, hd, gamma * r_i)
    max_multiplicity: int = 0

    @property
    def flags(self):
        return {"diameter": not self.diameter, "multiplicity": not self.multiplicity,
                "distance": not self.distance}


@dataclass
class WhitneyCovering:
    base: Covering
    A: SubsetRef
    params: WhitneyParams
    verified: dict
    kind: str = "basic"
    meta: dict = field(default_factory=dict)

    @property
    def r(self):
        return np.asarray(self.base.block_dist_to_A, dtype=float)

    @property
    def blocks(self):
        return self.base.blocks

    def __len__(self):
        return len(self.base)

    @property
    def is_verified(self):
        return bool(self.verified) and all(self.verified.values())

    def to_json(self):
        out = self.base.to_json()
        n, a, d, g = self.params.as_tuple()
        out.update(kind=self.kind, domain=list(self.A.indices), n=n, alpha=a, delta=d, gamma=g,
                   verified=dict(self.verified))
        return out


def block_distances(space: FiniteMetricSpace, blocks, A: SubsetRef):
    """``r_i = d(B_i, A)`` and ``hd(B_i, A)`` for each block."""
    dA = space.dist[:, A.array].min(axis=1)
    r = [float(dA[b.array].min()) for b in blocks]
    hd = [float(dA[b.array].max()) for b in blocks]
    return r, hd


def verify_whitney(cover: Covering, A: SubsetRef, n: int, alpha: float, delta: float,
                   gamma: float) -> WhitneyReport:
    """Exact check of the three Whitney axioms.

    Multiplicity is pointwise over X \\ A: the number of ``i`` with
    ``d(x, B_i) < delta * r_i`` must not exceed ``n + 1``.
    """
    space = cover.space
    r, hd = block_distances(space, cover.blocks, A)
    rep = WhitneyReport(True)
    tol = 1 + REL_TOL
    for i, b in enumerate(cover.blocks):
        dm = b.diameter()
        if dm > alpha * r[i] * tol:
            rep.diameter.append((i, dm, alpha * r[i]))
        if hd[i] > gamma * r[i] * tol:
            rep.distance.append((i, hd[i], gamma * r[i]))
    ext = space.complement(A).array
    if len(cover.blocks) and len(ext):
        dB = np.stack([space.dist[np.ix_(ext, b.array)].min(axis=1) for b in cover.blocks], axis=1)
        active = dB < delta * np.asarray(r)[None, :]
        counts = active.sum(axis=1)
        rep.max_multiplicity = int(counts.max())
        for row in np.flatnonzero(counts > n + 1):
            rep.multiplicity.append((int(ext[row]), [int(i) for i in np.flatnonzero(active[row])]))
    rep.ok = not (rep.diameter or rep.multiplicity or rep.distance)
    return rep


# -- basic cover ------------------------------------------------------------

def basic_constants(r: float, c: float):
    """Parameters of the basic cover.

    Returns ``(eps, delta, alpha, gamma)`` where ``alpha`` and ``gamma`` are
    the values derivable from the construction: a block built at level k has
    diameter at most ``2(eps + r) r^k + c s`` with ``s = 2(2 eps + r) r^k``,
    lies at distance at least ``(1 - eps) r^k`` from A and within
    ``(r + eps) r^k`` of it.
    """
    eps = (r - 1) / (2 * r)
    delta = eps / (2 * r)
    alpha = (2 * (eps + r) + 2 * c * (2 * eps + r)) / (1 - eps)
    gamma = (r + eps) / (1 - eps)
    return eps, delta, alpha, gamma


def stated_basic_constants(r: float, c: float):
    """``(alpha, gamma) = (2(r+eps)(1+c)/(1-eps), r+eps)``, as quoted for the basic cover."""
    eps = (r - 1) / (2 * r)
    return 2 * (r + eps) * (1 + c) / (1 - eps), r + eps


def _levels(dA, base):
    """Integer k with ``base^k <= dA < base^(k+1)``, robust to rounding."""
    k = np.floor(np.log(dA) / np.log(base)).astype(int)
    k = np.where(base ** k > dA, k - 1, k)
    k = np.where(base ** (k + 1) <= dA, k + 1, k)
    return k


def build_whitney_cover(space: FiniteMetricSpace, A: SubsetRef, oracle: NagataOracle, r: float = DEFAULT_R,
                        budget: int = 64) -> WhitneyCovering:
    """Basic Whitney cover of X \\ A with multiplicity at most ``3(n+1)``.

    ``oracle(s)`` must return a ``c*s``-bounded cover of A with
    s-multiplicity at most ``n+1``; every answer is checked.
    """
    if r <= 1:
        raise InputError("r must exceed 1")
    ext = space.complement(A)
    if len(ext) == 0:
        raise EmptyComplement("A = X: nothing to cover")
    n, c = oracle.n, oracle.c
    eps, delta, alpha, gamma = basic_constants(r, c)
    near, dA = nearest_map(space, A)
    ext_idx = ext.array
    levels = _levels(dA[ext_idx], r)
    blocks, block_level = [], []
    for k in sorted(set(levels.tolist())):
        R = SubsetRef(space, ext_idx[levels == k])
        W = greedy_separated_net(space, R, eps * r ** k).array
        s = 2 * (2 * eps + r) * r ** k
        cov = oracle(s)
        ok, rep = verify_nagata(cov, s, n, c, budget)
        if not ok:
            raise OracleNotNagata(f"oracle cover at s={s} fails Nagata({n}, {c}): "
                                  f"multiplicity {rep.multiplicity.multiplicity}, "
                                  f"oversize {rep.diameter_violations}")
        rho = near[W]
        close = space.dist[np.ix_(ext_idx, W)] <= eps * r ** k
        for Ai in cov.blocks:
            hit = np.isin(rho, Ai.array)
            if not hit.any():
                continue
            members = ext_idx[close[:, hit].any(axis=1)]
            blocks.append(members)
            block_level.append(k)
    r_i, _ = block_distances(space, [SubsetRef(space, b) for b in blocks], A)
    base = Covering(space, blocks, block_dist_to_A=r_i, meta={"levels": block_level})
    mult = 3 * (n + 1) - 1
    rep = verify_whitney(base, A, mult, alpha, delta, gamma)
    if not rep.ok:
        raise PropertyViolation(f"basic Whitney cover fails its own axioms: {rep}")
    a_st, g_st = stated_basic_constants(r, c)
    rep_st = verify_whitney(base, A, mult, a_st, delta, g_st)
    return WhitneyCovering(
        base, A, WhitneyParams(mult, alpha, delta, gamma), rep.flags, "basic",
        meta={"r": r, "eps": eps, "nagata": (n, c), "oracle": oracle.name,
              "stated_alpha": a_st, "stated_gamma": g_st, "stated_flags": rep_st.flags,
              "max_multiplicity": rep.max_multiplicity})


# -- refined cover ----------------------------------------------------------

def refined_default_r(n: int, c: float) -> float:
    """Smallest power of two strictly above ``2(c+1) 4^(n+1)``."""
    need = 2 * (c + 1) * 4 ** (n + 1)
    return float(2 ** (math.floor(math.log2(need)) + 1))


def refined_constants(r: float, c: float, n: int):
    return WhitneyParams(n, 40 * r ** 3 * (c + 1) * (n + 1), 1 / (8 * r ** 2), r ** 2)


def _union_find_groups(sets, dist, thresh):
    parent = list(range(len(sets)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(len(sets)):
        for b in range(a + 1, len(sets)):
            if dist[np.ix_(sets[a], sets[b])].min() <= thresh:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for a in range(len(sets)):
        groups.setdefault(find(a), []).append(a)
    return [np.unique(np.concatenate([sets[a] for a in g])) for _, g in sorted(groups.items())]


def build_refined_whitney_cover(space: FiniteMetricSpace, A: SubsetRef, colored, n: int, c: float,
                                r: float | None = None, check_subsets: bool = True,
                                node_budget: int = SEARCH_NODE_BUDGET) -> WhitneyCovering:
    """Refined Whitney cover for A satisfying Nagata(n-1, c).

    ``colored(s)`` must return a cover of A with at most ``n`` colors, blocks
    of diameter <= ``2(c+1)(n+1) s`` and same-colored blocks more than ``s``
    apart (see :func:`lipext.coverings.colored_oracle`).
    """
    if n < 1:
        raise InputError("refined cover needs n >= 1")
    r = refined_default_r(n, c) if r is None else float(r)
    if not r > 2 * (c + 1) * 4 ** (n + 1):
        raise RTooSmall(f"r = {r} must exceed 2(c+1)4^(n+1) = {2 * (c + 1) * 4 ** (n + 1)}")
    ext = space.complement(A)
    if len(ext) == 0:
        raise EmptyComplement("A = X: nothing to cover")
    cprime = 2 * (c + 1) * (n + 1)
    near, dA = nearest_map(space, A)
    ext_idx = ext.array
    cache = {}

    def colored_at(i):
        if i not in cache:
            s = 4 * r ** (i + 1)
            cov = colored(s)
            if cov.colors is None or max(cov.colors) > n or min(cov.colors) < 1:
                raise OracleNotColored(f"colored oracle at s={s} must use colors 1..{n}")
            rep = check_colored(cov, s, cprime * s, subset=A.indices)
            if not rep["ok"]:
                raise OracleNotColored(f"colored oracle at s={s} fails: {rep}")
            cache[i] = cov
        return cache[i]

    blocks, tags = [], []
    for k in range(n):
        shift = r ** (k / n)
        lev = _levels(dA[ext_idx] / shift, r) + 1  # r^(i-1) shift <= d < r^i shift
        for i in sorted(set(lev.tolist())):
            Rki = ext_idx[lev == i]
            cands = []
            for j in (i, i + 1):
                cov = colored_at(j)
                for C, col in zip(cov.blocks, cov.colors):
                    if col - 1 != k:
                        continue
                    piece = Rki[np.isin(near[Rki], C.array)]
                    if len(piece):
                        cands.append(piece)
            for g in _union_find_groups(cands, space.dist, r ** (i + 1)):
                blocks.append(g)
                tags.append((k, i))
    r_i, _ = block_distances(space, [SubsetRef(space, b) for b in blocks], A)
    base = Covering(space, blocks, block_dist_to_A=r_i, meta={"levels": tags})
    params = refined_constants(r, c, n)
    rep = verify_whitney(base, A, *params.as_tuple())
    flags = rep.flags
    meta = {"r": r, "nagata": (n - 1, c), "max_multiplicity": rep.max_multiplicity}
    if check_subsets:
        sm = subset_multiplicity(base, A, r ** (1 / (2 * n)), n + 2, node_budget)
        meta["subset_multiplicity"] = sm
        flags["subset_multiplicity"] = sm["max_met"] <= n + 1
    out = WhitneyCovering(base, A, params, flags, "refined", meta=meta)
    if not out.is_verified:
        raise PropertyViolation(f"refined Whitney cover fails: {flags}, {rep}")
    return out


def subset_multiplicity(cover: Covering, A: SubsetRef, theta: float, target: int,
                        node_budget: int = SEARCH_NODE_BUDGET):
    """Largest number of blocks met by a set E with ``diam E <= theta * d(E, A)``.

    Searches over families of blocks with one representative each
    (representatives may coincide).  The admissibility constraint only gets
    harder as E grows, so branches violating it are pruned.  Stops early once
    ``target`` blocks are met.
    """
    space = cover.space
    dA = space.dist[:, A.array].min(axis=1)
    dist = space.dist
    members = [b.array for b in cover.blocks]
    best = {"size": 1 if members else 0, "witness": [(0, int(members[0][0]))] if members else []}
    nodes = 0

    def search(chosen, pts, diam, mind, start):
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise SearchBudgetExceeded("subset-multiplicity search exceeded its node budget")
        if len(chosen) > best["size"]:
            best["size"], best["witness"] = len(chosen), list(chosen)
        if best["size"] >= target or len(chosen) + len(members) - start <= best["size"]:
            return
        for bi in range(start, len(members)):
            if len(chosen) + len(members) - bi <= best["size"]:
                return
            cand = members[bi]
            if pts:
                new_diam = np.maximum(diam, dist[np.ix_(cand, pts)].max(axis=1))
            else:
                new_diam = np.zeros(len(cand))
            new_min = np.minimum(mind, dA[cand])
            okp = new_diam <= theta * new_min * (1 + REL_TOL)
            for p in cand[okp]:
                idx = int(np.flatnonzero(cand == p)[0])
                chosen.append((bi, int(p)))
                search(chosen, pts + [int(p)], float(new_diam[idx]), float(new_min[idx]), bi + 1)
                chosen.pop()
                if best["size"] >= target:
                    return

    search([], [], 0.0, np.inf, 0)
    return {"theta": theta, "max_met": best["size"], "witness": best["witness"], "nodes": nodes}
