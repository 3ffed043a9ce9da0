"""Finite metric spaces, subsets, target spaces and exact Lipschitz certificates.

Everything here is immutable after construction.  Distances live in a dense
``(n, n)`` float array; subsets are sorted tuples of point indices.  Ties are
always broken towards the smallest index so every construction built on top of
these primitives is deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    AsymmetricMatrix,
    DuplicatePoints,
    EmptySubset,
    InputError,
    NegativeDistance,
    NonzeroDiagonal,
    NotSquare,
    TriangleViolation,
)

METRIC_RTOL = 1e-12
CERT_ATOL = 1e-9

NORMS = ("l1", "l2", "linf")
_MINKOWSKI_P = {"l1": 1, "l2": 2, "linf": np.inf}


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """A finite set of labelled points with a validated distance matrix."""

    dist: np.ndarray
    point_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "dist", _readonly(self.dist))
        if not self.point_ids:
            object.__setattr__(self, "point_ids", tuple(range(len(self.dist))))

    def __len__(self):
        return self.dist.shape[0]

    def d(self, i, j):
        return float(self.dist[i, j])

    def subset(self, indices) -> "SubsetRef":
        return SubsetRef(self, indices)

    @property
    def all(self) -> "SubsetRef":
        return SubsetRef(self, range(len(self)))

    def complement(self, subset: "SubsetRef") -> "SubsetRef":
        mask = np.ones(len(self), dtype=bool)
        mask[list(subset.indices)] = False
        return SubsetRef(self, np.flatnonzero(mask), allow_empty=True)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points in R^d with one of the l1 / l2 / linf norms."""

    coords: np.ndarray
    norm: str = "l2"

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if c.ndim != 2:
            raise InputError("coords must be a list of vectors of common dimension")
        if self.norm not in NORMS:
            raise InputError(f"unknown norm {self.norm!r}; expected one of {NORMS}")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def dim(self):
        return self.coords.shape[1]

    def __len__(self):
        return self.coords.shape[0]

    def space(self) -> FiniteMetricSpace:
        # Norm-induced distances satisfy the triangle inequality by construction,
        # so only duplicates need checking.
        dist = cdist(self.coords, self.coords, "minkowski", p=_MINKOWSKI_P[self.norm])
        np.fill_diagonal(dist, 0.0)
        _check_duplicates(dist)
        return FiniteMetricSpace(dist)


@dataclass(frozen=True, eq=False)
class SubsetRef:
    """A sorted set of point indices of ``space``."""

    space: FiniteMetricSpace
    indices: tuple
    allow_empty: bool = field(default=False, compare=False)

    def __init__(self, space, indices, allow_empty=False):
        idx = tuple(sorted({int(i) for i in indices}))
        n = len(space)
        if idx and (idx[0] < 0 or idx[-1] >= n):
            raise InputError(f"subset index out of range 0..{n - 1}")
        if not idx and not allow_empty:
            raise EmptySubset("subset is empty")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "allow_empty", allow_empty)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in self._set

    def __eq__(self, other):
        return isinstance(other, SubsetRef) and other.space is self.space and other.indices == self.indices

    def __hash__(self):
        return hash((id(self.space), self.indices))

    def __repr__(self):
        return f"SubsetRef({list(self.indices)})"

    @property
    def _set(self):
        s = self.__dict__.get("_cached_set")
        if s is None:
            s = frozenset(self.indices)
            object.__setattr__(self, "_cached_set", s)
        return s

    @property
    def array(self):
        return np.asarray(self.indices, dtype=int)

    def diameter(self):
        if len(self.indices) < 2:
            return 0.0
        a = self.array
        return float(self.space.dist[np.ix_(a, a)].max())


# -- target spaces ----------------------------------------------------------

@dataclass(frozen=True)
class NormedVector:
    """R^dim with an l1 / l2 / linf norm."""

    dim: int
    norm: str = "l2"

    def __post_init__(self):
        if self.norm not in NORMS:
            raise InputError(f"unknown norm {self.norm!r}")

    def distance(self, u, v):
        return float(np.linalg.norm(np.asarray(u, float) - np.asarray(v, float), ord=_ORD[self.norm]))

    def pairwise(self, P, Q=None):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        Q = P if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))
        return cdist(P, Q, "minkowski", p=_MINKOWSKI_P[self.norm])

    def check_norm_axioms(self, samples=200, seed=0):
        """Spot-check homogeneity and the triangle inequality on random triples."""
        rng = np.random.default_rng(seed)
        for _ in range(samples):
            u, v, w = rng.normal(size=(3, self.dim))
            t = rng.normal()
            nu = self.distance(u, 0 * u)
            if abs(self.distance(t * u, 0 * u) - abs(t) * nu) > 1e-9 * (1 + abs(t) * nu):
                return False
            if self.distance(u, w) > self.distance(u, v) + self.distance(v, w) + 1e-12:
                return False
        return True


_ORD = {"l1": 1, "l2": 2, "linf": np.inf}


@dataclass(frozen=True, eq=False)
class MidpointSpace:
    """A finite metric space Y with a midpoint table ``midpoint[y][z]``.

    Points are referred to by their index.  The table must be symmetric, fix
    the diagonal, and satisfy ``d(m(x,y), m(x,z)) <= d(y,z)/2``.
    """

    dist: np.ndarray
    midpoint: np.ndarray

    def __post_init__(self):
        space = validate_metric(self.dist)
        m = np.asarray(self.midpoint, dtype=int)
        n = len(space)
        if m.shape != (n, n):
            raise InputError("midpoint table must be |Y| x |Y|")
        if (m < 0).any() or (m >= n).any():
            raise InputError("midpoint table refers to unknown points")
        if not np.array_equal(m, m.T):
            raise InputError("midpoint table is not symmetric")
        if not np.array_equal(np.diag(m), np.arange(n)):
            raise InputError("midpoint table must satisfy m(y, y) = y")
        d = space.dist
        for x in range(n):
            lhs = d[np.ix_(m[x], m[x])]
            if (lhs > 0.5 * d * (1 + METRIC_RTOL) + 1e-15).any():
                y, z = np.argwhere(lhs > 0.5 * d * (1 + METRIC_RTOL) + 1e-15)[0]
                raise InputError(f"midpoint contraction fails at x={x}, y={y}, z={z}")
        m.setflags(write=False)
        object.__setattr__(self, "dist", space.dist)
        object.__setattr__(self, "midpoint", m)

    def distance(self, u, v):
        return float(self.dist[int(u), int(v)])

    def pairwise(self, P, Q=None):
        P = np.asarray(P, dtype=int).ravel()
        Q = P if Q is None else np.asarray(Q, dtype=int).ravel()
        return self.dist[np.ix_(P, Q)]

    def mid(self, u, v):
        return int(self.midpoint[int(u), int(v)])


TargetSpace = NormedVector | MidpointSpace


@dataclass(frozen=True, eq=False)
class PartialLipschitzMap:
    """A map defined on ``domain`` (the set A) with values in ``target``."""

    domain: SubsetRef
    values: np.ndarray
    target: TargetSpace

    def __post_init__(self):
        v = np.asarray(self.values)
        if isinstance(self.target, NormedVector):
            v = np.asarray(v, dtype=float).reshape(len(v), -1)
            if v.shape[1] != self.target.dim:
                raise InputError(f"values have dimension {v.shape[1]}, target has {self.target.dim}")
        else:
            v = np.asarray(v, dtype=int).ravel()
        if len(v) != len(self.domain):
            raise InputError(f"{len(v)} values for a domain of {len(self.domain)} points")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def space(self):
        return self.domain.space

    def value_at(self, i):
        return self.values[self.domain.indices.index(i)]

    def as_dict(self):
        return dict(zip(self.domain.indices, self.values))


@dataclass(frozen=True)
class LipschitzCertificate:
    constant: float
    witness: tuple | None
    pair_count: int


# -- operations -------------------------------------------------------------

def _check_duplicates(dist):
    n = dist.shape[0]
    off = dist + np.eye(n)
    hits = np.argwhere(off == 0)
    if len(hits):
        i, j = hits[0]
        raise DuplicatePoints(int(min(i, j)), int(max(i, j)))


def validate_metric(dist_matrix, point_ids=None) -> FiniteMetricSpace:
    """Check the metric axioms and return a :class:`FiniteMetricSpace`.

    Raises the first violated axiom, in the order: shape, diagonal, symmetry,
    sign, distinctness, triangle inequality.  Triangle violations report the
    lexicographically smallest ``(i, j, k)`` with ``i < j`` and
    ``d(i, j) > d(i, k) + d(k, j)`` (relative tolerance 1e-12).
    """
    d = np.asarray(dist_matrix, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise NotSquare(f"distance matrix must be square, got shape {d.shape}")
    if not np.isfinite(d).all():
        raise InputError("distance matrix contains non-finite entries")
    n = d.shape[0]
    diag = np.flatnonzero(np.diag(d) != 0)
    if len(diag):
        raise NonzeroDiagonal(int(diag[0]))
    asym = np.argwhere(d != d.T)
    if len(asym):
        i, j = sorted(asym[0])
        raise AsymmetricMatrix(int(i), int(j))
    neg = np.argwhere(d < 0)
    if len(neg):
        i, j = sorted(neg[0])
        raise NegativeDistance(int(i), int(j))
    _check_duplicates(d)
    best = None
    iu = np.triu(np.ones((n, n), dtype=bool), 1)
    for k in range(n):
        bound = (d[:, k][:, None] + d[k, :][None, :]) * (1 + METRIC_RTOL)
        bad = np.argwhere((d > bound) & iu)
        if len(bad):
            cand = (int(bad[0][0]), int(bad[0][1]), k)
            if best is None or cand < best:
                best = cand
    if best is not None:
        raise TriangleViolation(*best)
    ids = tuple(point_ids) if point_ids is not None else ()
    if ids and len(ids) != n:
        raise InputError(f"{len(ids)} labels for {n} points")
    return FiniteMetricSpace(d, ids)


def certify_lipschitz(space: FiniteMetricSpace, values, target: TargetSpace | None = None,
                      points=None) -> LipschitzCertificate:
    """Exact Lipschitz constant of a total map over all unordered pairs.

    ``values[k]`` is the image of point ``points[k]`` (default: all of X in
    index order).  The witness is the lexicographically first pair attaining
    the maximum ratio.
    """
    pts = np.arange(len(space)) if points is None else np.asarray(points, dtype=int)
    m = len(pts)
    if m < 2:
        return LipschitzCertificate(0.0, None, 0)
    if target is None:
        v = np.asarray(values, dtype=float).reshape(m, -1)
        target = NormedVector(v.shape[1], "l2")
    dy = target.pairwise(values)
    dx = space.dist[np.ix_(pts, pts)]
    iu = np.triu_indices(m, 1)
    ratios = dy[iu] / dx[iu]
    k = int(np.argmax(ratios))
    const = float(ratios[k])
    witness = (int(pts[iu[0][k]]), int(pts[iu[1][k]]))
    return LipschitzCertificate(const, witness, len(ratios))


def ball(space: FiniteMetricSpace, center: int, radius: float) -> SubsetRef:
    """Closed ball ``{y : d(center, y) <= radius}``."""
    return SubsetRef(space, np.flatnonzero(space.dist[center] <= radius))


def dist_to_set(space: FiniteMetricSpace, x: int, S: SubsetRef) -> float:
    if len(S) == 0:
        raise EmptySubset("distance to an empty set")
    return float(space.dist[x, S.array].min())


def set_distance(space: FiniteMetricSpace, S: SubsetRef, T: SubsetRef) -> float:
    """Infimal distance ``d(S, T)``."""
    if len(S) == 0 or len(T) == 0:
        raise EmptySubset("distance involving an empty set")
    return float(space.dist[np.ix_(S.array, T.array)].min())


def hausdorff_to(space: FiniteMetricSpace, B: SubsetRef, A: SubsetRef) -> float:
    """Asymmetric Hausdorff distance ``sup_{b in B} d(b, A)``."""
    if len(A) == 0:
        raise EmptySubset("Hausdorff distance to an empty set")
    if len(B) == 0:
        return 0.0
    return float(space.dist[np.ix_(B.array, A.array)].min(axis=1).max())


def greedy_separated_net(space: FiniteMetricSpace, subset: SubsetRef, separation: float) -> SubsetRef:
    """Maximal ``separation``-separated subset, greedily in index order.

    A point is kept iff it is at distance >= ``separation`` from every point
    kept before it; rejected points are therefore within < ``separation`` of
    the net.
    """
    if separation <= 0:
        raise InputError("separation must be positive")
    kept = []
    for i in subset.indices:
        if not kept or space.dist[i, kept].min() >= separation:
            kept.append(i)
    return SubsetRef(space, kept, allow_empty=True)


def nearest_in(space: FiniteMetricSpace, x: int, A: SubsetRef) -> int:
    """Nearest point of ``A`` to ``x``; ties go to the smallest index."""
    if len(A) == 0:
        raise EmptySubset("nearest point in an empty set")
    a = A.array
    return int(a[np.argmin(space.dist[x, a])])


def nearest_map(space: FiniteMetricSpace, A: SubsetRef):
    """Vectorised :func:`nearest_in` for every point of the space.

    Returns ``(nearest, distance)`` arrays of length ``len(space)``.
    """
    a = A.array
    sub = space.dist[:, a]
    k = np.argmin(sub, axis=1)
    return a[k], sub[np.arange(len(space)), k]
