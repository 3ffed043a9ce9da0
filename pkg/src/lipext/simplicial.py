"""Simplicial complexes in the simplex space with the l2 metric.

Points carry sparse barycentric coordinates ``{vertex: weight}``; the l2
distance of two points is the Euclidean norm of the coordinate difference,
so distinct vertices are ``sqrt(2)`` apart.  Also contains the routing
construction through intersecting simplices, a quasiconvexity probe,
barycentric and skeletal extensors, conical extensions of sphere maps and
the mean chordal distance constants of spheres.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.spatial.distance import cdist

from .errors import (
    DifferentComplexes,
    Disconnected,
    DisjointSimplices,
    InputError,
    MissingVertexValue,
    NotPure,
    PropertyViolation,
    UnsupportedDimension,
    UnsupportedTarget,
    ZeroSamples,
)
from .metric_core import NormedVector
from .transport import DiscreteMeasure, barycenter

COORD_TOL = 1e-12
LAMBDA_NPC = math.sqrt(3)


class SimplicialComplex:
    """A finite complex given by its maximal simplices (an antichain)."""

    def __init__(self, simplices, vertex_ids=None):
        sets = {frozenset(int(v) for v in s) for s in simplices}
        if any(not s for s in sets):
            raise InputError("simplices must be nonempty")
        maximal = [s for s in sets if not any(s < t for t in sets)]
        self.maximal = sorted((tuple(sorted(s)) for s in maximal), key=lambda t: (len(t), t))
        verts = sorted(set().union(*maximal)) if maximal else []
        if vertex_ids is not None:
            extra = set(vertex_ids) - set(verts)
            if extra:
                raise InputError(f"vertices {sorted(extra)} lie in no simplex")
        self.vertices = verts
        self._sets = [frozenset(s) for s in self.maximal]

    @property
    def dimension(self):
        return max((len(s) for s in self.maximal), default=0) - 1

    def contains_face(self, face) -> bool:
        f = frozenset(face)
        return any(f <= s for s in self._sets)

    def is_pure(self):
        return len({len(s) for s in self.maximal}) <= 1

    def to_json(self):
        return {"vertices": list(self.vertices), "maximal": [list(s) for s in self.maximal]}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["maximal"], obj.get("vertices"))


class SimplexPoint:
    """A point ``sum_v w_v e_v`` with positive weights summing to one."""

    __slots__ = ("coords", "complex")

    def __init__(self, coords, complex_: SimplicialComplex | None = None):
        c = {int(k): float(v) for k, v in dict(coords).items() if v != 0}
        if not c or any(v < 0 for v in c.values()):
            raise InputError("barycentric weights must be nonnegative and not all zero")
        total = sum(c.values())
        if abs(total - 1) > COORD_TOL * max(1, len(c)):
            raise InputError(f"barycentric weights sum to {total}")
        if complex_ is not None and not complex_.contains_face(c):
            raise InputError(f"support {sorted(c)} is not a simplex of the complex")
        self.coords = c
        self.complex = complex_

    @property
    def support(self):
        return frozenset(self.coords)

    def __repr__(self):
        return f"SimplexPoint({self.coords})"

    @classmethod
    def vertex(cls, v, complex_=None):
        return cls({v: 1.0}, complex_)


def l2_distance(p: SimplexPoint, q: SimplexPoint) -> float:
    if p.complex is not None and q.complex is not None and p.complex is not q.complex:
        raise DifferentComplexes("points belong to different complexes")
    keys = p.support | q.support
    return math.sqrt(sum((p.coords.get(k, 0.0) - q.coords.get(k, 0.0)) ** 2 for k in keys))


def nerve_of_cover(pou) -> SimplicialComplex:
    """Complex spanned by the supports of the weight vectors of all exterior points."""
    supports = {tuple(np.flatnonzero(row > 0)) for row in pou.weights}
    K = SimplicialComplex(supports)
    if K.dimension > pou.cover.params.n:
        raise PropertyViolation(f"nerve has dimension {K.dimension} > {pou.cover.params.n}")
    return K


# -- routing and quasiconvexity --------------------------------------------

@dataclass(frozen=True)
class Route:
    z: SimplexPoint
    detour: float    # |x - z| + |z - y|
    direct: float    # |x - y|
    bound: float     # 4 sqrt(n) |x - y|

    @property
    def ratio(self):
        return self.detour / self.direct if self.direct > 0 else 1.0


def _toward_shared(x: SimplexPoint, shared) -> SimplexPoint:
    """Move the mass of x off ``shared`` onto the smallest shared vertex."""
    first = min(shared)
    z = {v: w for v, w in x.coords.items() if v in shared}
    nu = sum(w for v, w in x.coords.items() if v not in shared)
    z[first] = z.get(first, 0.0) + nu
    return SimplexPoint(z, x.complex)


def route_through_intersection(delta1, delta2, x: SimplexPoint, y: SimplexPoint) -> Route:
    """A point z of the common face with ``|x-z| + |z-y| <= 4 sqrt(n) |x-y|``."""
    S1, S2 = frozenset(delta1), frozenset(delta2)
    if not x.support <= S1 or not y.support <= S2:
        raise InputError("x must lie in the first simplex and y in the second")
    shared = S1 & S2
    if not shared:
        raise DisjointSimplices("simplices do not intersect")
    z = _toward_shared(x, shared)
    n = max(len(S1), len(S2)) - 1
    direct = l2_distance(x, y)
    detour = l2_distance(x, z) + l2_distance(z, y)
    bound = 4 * math.sqrt(n) * direct
    if detour > bound * (1 + 1e-12) + 1e-15:
        raise PropertyViolation(f"routing detour {detour} exceeds 4 sqrt(n)|x-y| = {bound}")
    return Route(z, detour, direct, bound)


def random_simplex_point(rng, simplex, complex_=None) -> SimplexPoint:
    w = rng.dirichlet(np.ones(len(simplex)))
    w[-1] = 1 - w[:-1].sum()
    return SimplexPoint(dict(zip(simplex, np.clip(w, 0, None))), complex_)


def _simplex_chain(K: SimplicialComplex, a: int, b: int):
    """Shortest chain of maximal simplices (sharing vertices) from a to b."""
    sets = K._sets
    prev = {a: None}
    q = deque([a])
    while q:
        u = q.popleft()
        if u == b:
            break
        for v in range(len(sets)):
            if v not in prev and sets[u] & sets[v]:
                prev[v] = u
                q.append(v)
    if b not in prev:
        raise Disconnected("complex is not connected")
    chain = [b]
    while prev[chain[-1]] is not None:
        chain.append(prev[chain[-1]])
    return chain[::-1]


def quasiconvexity_probe(K: SimplicialComplex, samples: int, seed: int):
    """Largest observed ``path length / l2 distance`` along simplex chains.

    For each sampled pair the path runs from x through the routing points of
    consecutive simplices of a shortest chain and ends with a straight
    segment to y.  Each segment lies inside one simplex.
    """
    if not K.is_pure():
        raise NotPure("complex is not pure")
    for j in range(len(K.maximal)):
        _simplex_chain(K, 0, j)
    rng = np.random.default_rng(seed)
    n = K.dimension
    N = len(K.maximal)
    worst = 1.0
    for _ in range(samples):
        a, b = rng.integers(N, size=2)
        x = random_simplex_point(rng, K.maximal[a])
        y = random_simplex_point(rng, K.maximal[b])
        direct = l2_distance(x, y)
        if direct == 0:
            continue
        chain = _simplex_chain(K, int(a), int(b))
        length, cur = 0.0, x
        for s, t in zip(chain, chain[1:]):
            nxt = _toward_shared(cur, K._sets[s] & K._sets[t])
            length += l2_distance(cur, nxt)
            cur = nxt
        length += l2_distance(cur, y)
        worst = max(worst, length / direct)
    bound = float(N) ** (10 * math.log(n)) if n >= 1 else 1.0
    return {"ratio": worst, "bound": bound, "n": n, "N": N, "asserted": n >= 2,
            "ok": worst <= bound or n < 2}


# -- extensors --------------------------------------------------------------

def _values_for(vertex_values, vertices):
    missing = [v for v in vertices if v not in vertex_values]
    if missing:
        raise MissingVertexValue(f"no value for vertices {missing}")
    return {v: np.asarray(vertex_values[v], dtype=float) for v in vertices}


def barycentric_extensor(target, vertex_values, complex_: SimplicialComplex | None = None):
    """Affine extension ``F(sum a_v e_v) = sum a_v f(v)``."""
    if not isinstance(target, NormedVector):
        raise UnsupportedTarget("barycentric extensor needs a normed target")
    vals = _values_for(vertex_values, complex_.vertices if complex_ is not None else list(vertex_values))

    def F(p: SimplexPoint):
        missing = [v for v in p.coords if v not in vals]
        if missing:
            raise MissingVertexValue(f"no value for vertices {missing}")
        return sum(w * vals[v] for v, w in p.coords.items())

    return F


def barycenter_extensor(target, vertex_values):
    """``F(p) = beta(sum p_v delta_f(v))`` with the normed barycenter."""
    def F(p: SimplexPoint):
        pts = [vertex_values[v] for v in p.coords]
        return barycenter(target, DiscreteMeasure(target, pts, list(p.coords.values())))

    return F


def simplex_grid(simplex, mesh: int):
    """Barycentric grid points ``k / mesh`` on a simplex, as SimplexPoints."""
    k = len(simplex)
    out = []
    for comp in itertools.product(range(mesh + 1), repeat=k - 1):
        s = sum(comp)
        if s <= mesh:
            w = [c / mesh for c in comp] + [(mesh - s) / mesh]
            out.append(SimplexPoint({v: x for v, x in zip(simplex, w) if x > 0}))
    return out


def points_matrix(points, order):
    pos = {v: i for i, v in enumerate(order)}
    M = np.zeros((len(points), len(order)))
    for r, p in enumerate(points):
        for v, w in p.coords.items():
            M[r, pos[v]] = w
    return M


def sampled_lipschitz(points, values, target, order) -> float:
    """Largest ratio over all pairs of sampled simplex points."""
    if len(points) < 2:
        return 0.0
    P = points_matrix(points, order)
    dx = cdist(P, P)
    dy = target.pairwise(np.asarray(values))
    iu = np.triu_indices(len(points), 1)
    ok = dx[iu] > 0
    return float((dy[iu][ok] / dx[iu][ok]).max()) if ok.any() else 0.0


def vertex_lipschitz(simplex, vals, target) -> float:
    if len(simplex) < 2:
        return 0.0
    V = np.array([vals[v] for v in simplex])
    return float(target.pairwise(V).max() / math.sqrt(2))


def measure_extensor_constant(F, simplex, vals, target, mesh=16):
    """``Lip F|simplex / Lip f|vertices`` on a barycentric grid."""
    pts = simplex_grid(simplex, mesh)
    L = sampled_lipschitz(pts, [F(p) for p in pts], target, list(simplex))
    Lv = vertex_lipschitz(simplex, vals, target)
    return L / Lv if Lv > 0 else 0.0


def skeletal_bound(n: int, lam: float = LAMBDA_NPC) -> float:
    """``lam^n * sqrt(2)^(n-1) * sqrt(n) * (n!)^2``."""
    return lam ** n * math.sqrt(2) ** (n - 1) * math.sqrt(n) * math.factorial(n) ** 2


def cone_step_factor(n: int, lam: float = LAMBDA_NPC) -> float:
    """``sqrt(2 + 2/(n-1)) * n^2 * lam``, the per-step factor for n >= 2."""
    return math.sqrt(2 + 2 / (n - 1)) * n ** 2 * lam


class SkeletalExtension:
    """Skeleton-by-skeleton extension into a normed space.

    Edges are interpolated linearly.  A k-simplex with barycenter b and
    inradius ``rho = 1/sqrt(k(k+1))`` is filled radially: a point p with
    ``u = p - b`` is sent to ``q``, the boundary point on the ray from b.
    Outside the inscribed ball ``F(p) = F(q)``; inside, F cones from the apex
    (the mean of F over the boundary grid) to ``F(q)`` linearly in ``|u|/rho``.
    """

    def __init__(self, complex_: SimplicialComplex, vertex_values, target, mesh: int = 16):
        if not isinstance(target, NormedVector):
            raise UnsupportedTarget("skeletal extension needs a normed target (linear geodesics)")
        self.complex = complex_
        self.target = target
        self.mesh = mesh
        self.vals = _values_for(vertex_values, complex_.vertices)
        self._apex = {}

    def boundary_grid(self, face):
        pts = []
        seen = set()
        for v in face:
            facet = tuple(u for u in face if u != v)
            for p in simplex_grid(facet, self.mesh):
                key = tuple(sorted(p.coords.items()))
                if key not in seen:
                    seen.add(key)
                    pts.append(p)
        return pts

    def apex(self, face):
        face = tuple(sorted(face))
        if face not in self._apex:
            vals = [self(p) for p in self.boundary_grid(face)]
            self._apex[face] = np.mean(vals, axis=0)
        return self._apex[face]

    def __call__(self, p: SimplexPoint):
        face = tuple(sorted(p.coords))
        k = len(face) - 1
        if k == 0:
            return self.vals[face[0]].copy()
        if k == 1:
            a, b = face
            return p.coords[a] * self.vals[a] + p.coords[b] * self.vals[b]
        w = np.array([p.coords[v] for v in face])
        b = np.full(k + 1, 1.0 / (k + 1))
        u = w - b
        norm_u = float(np.linalg.norm(u))
        apex = self.apex(face)
        if norm_u < 1e-15:
            return apex.copy()
        neg = u < 0
        t = float(np.min(b[neg] / -u[neg]))
        q = np.clip(b + t * u, 0, None)
        q[np.argmin(q)] = 0.0  # land exactly on a facet
        q /= q.sum()
        Fq = self(SimplexPoint({v: x for v, x in zip(face, q) if x > 0}))
        rho = 1 / math.sqrt(k * (k + 1))
        if norm_u >= rho:
            return Fq
        return apex + (norm_u / rho) * (Fq - apex)

    def certify(self, face=None, mesh: int | None = None):
        """Measured constants for one simplex against both theoretical bounds."""
        face = tuple(sorted(face if face is not None else self.complex.maximal[-1]))
        mesh = self.mesh if mesh is None else mesh
        n = len(face) - 1
        pts = simplex_grid(face, mesh)
        L = sampled_lipschitz(pts, [self(p) for p in pts], self.target, list(face))
        Lv = vertex_lipschitz(face, self.vals, self.target)
        bpts = [p for p in pts if len(p.coords) < len(face)]
        Lb = sampled_lipschitz(bpts, [self(p) for p in bpts], self.target, list(face)) if n >= 2 else Lv
        out = {"face": face, "n": n, "lip": L, "lip_vertices": Lv, "lip_boundary": Lb,
               "constant": L / Lv if Lv > 0 else 0.0, "skeletal_bound": skeletal_bound(n) if n >= 1 else 0.0}
        if n >= 2:
            out["cone_step_bound"] = cone_step_factor(n) * Lb
        return out


def skeletal_extend(complex_: SimplicialComplex, vertex_values, target, mesh: int = 16) -> SkeletalExtension:
    return SkeletalExtension(complex_, vertex_values, target, mesh)


# -- conical extensions and sphere constants ---------------------------------

def sphere_samples(m: int, count: int | None = None, seed: int = 0):
    """Deterministic samples of S^m: uniform angles for m = 1, Fibonacci lattice for m = 2."""
    if m == 1:
        count = 2048 if count is None else count
        th = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(th), np.sin(th)])
    if m == 2:
        count = 4096 if count is None else count
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5 ** 0.5) * k
        rr = np.sqrt(1 - z ** 2)
        return np.column_stack([rr * np.cos(phi), rr * np.sin(phi), z])
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(count or 4096, m + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _pairwise_max_ratio(X, Y, target, chunk=512):
    best = 0.0
    n = len(X)
    for s in range(0, n, chunk):
        dx = cdist(X[s:s + chunk], X)
        dy = target.pairwise(Y[s:s + chunk], Y)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(dx > 0, dy / dx, 0.0)
        best = max(best, float(r.max()))
    return best


@dataclass
class ConicalResult:
    ball_points: np.ndarray
    values: np.ndarray
    lip_f: float
    R: float
    lip_F: float
    bound: float

    @property
    def ok(self):
        return self.lip_F <= self.bound


def conical_value(sphere_value, apex, t):
    return apex + t * (sphere_value - apex)


def conical_extend(sphere_points, f_values, target, apex, pairs: int = 10_000, seed: int = 0) -> ConicalResult:
    """``F(t u) = p + t (f(u) - p)`` on sampled ball points, with its sampled constant.

    Half of the ``pairs`` are uniform random pairs of ball points, the other
    half are local pairs (nearby directions, nearby radii).  The comparison
    value is ``sqrt(L^2 + R^2)`` = ``sqrt(1 + (R/L)^2) * L``.
    """
    U = np.asarray(sphere_points, dtype=float)
    V = np.asarray(f_values, dtype=float).reshape(len(U), -1)
    if len(U) == 0:
        raise ZeroSamples("no sphere samples")
    p = np.asarray(apex, dtype=float)
    L = _pairwise_max_ratio(U, V, target)
    R = float(target.pairwise(p[None, :], V).max())
    rng = np.random.default_rng(seed)
    half = pairs // 2
    i = rng.integers(len(U), size=(pairs, 2))
    t = rng.uniform(0, 1, size=(pairs, 2))
    # local half: neighbouring sample directions and radii
    nn = np.argsort(cdist(U[i[half:, 0]], U), axis=1)[:, 1:4]
    i[half:, 1] = nn[np.arange(pairs - half), rng.integers(3, size=pairs - half)]
    t[half:, 1] = np.clip(t[half:, 0] + rng.normal(scale=0.02, size=pairs - half), 0, 1)
    xa = t[:, :1] * U[i[:, 0]]
    xb = t[:, 1:] * U[i[:, 1]]
    Fa = p + t[:, :1] * (V[i[:, 0]] - p)
    Fb = p + t[:, 1:] * (V[i[:, 1]] - p)
    dx = np.linalg.norm(xa - xb, axis=1)
    dy = np.array([target.distance(a, b) for a, b in zip(Fa, Fb)])
    ok = dx > 0
    lipF = float((dy[ok] / dx[ok]).max()) if ok.any() else 0.0
    bound = math.sqrt(L ** 2 + R ** 2) * (1 + 1e-6)
    pts = np.vstack([xa, xb])
    vals = np.vstack([Fa, Fb])
    return ConicalResult(pts, vals, L, R, lipF, bound)


def wasserstein_circle_tightness(K: int = 128, r: float = 0.5):
    """Sampled conical ratio for ``f(x) = delta_x`` into W1 over K circle points.

    The apex is the uniform measure.  Returns ``(best_ratio, sqrt(1+R^2), R)``.
    Candidate pairs use adjacent directions at radii ``r`` and ``r + eps``
    with ``eps`` near ``R`` times the chord, where the continuum ratio peaks.
    """
    from .transport import w1_distance

    target = NormedVector(2, "l2")
    th = 2 * np.pi * np.arange(K) / K
    U = np.column_stack([np.cos(th), np.sin(th)])
    mu = DiscreteMeasure.uniform(target, U)
    R = max(w1_distance(mu, DiscreteMeasure.dirac(target, U[k]))[0] for k in range(K))

    def F(t, k):
        w = (1 - t) * np.full(K, 1.0 / K)
        w[k] += t
        return DiscreteMeasure(target, U, w)

    chord = 2 * r * math.sin(math.pi / K)
    best = 0.0
    # adjacent directions suffice: the circle is homogeneous
    for scale in (0.9, 1.0, 1.1):
        s = min(1.0, r + scale * R * chord)
        dx = float(np.linalg.norm(r * U[0] - s * U[1]))
        best = max(best, w1_distance(F(r, 0), F(s, 1))[0] / dx)
    return best, math.sqrt(1 + R ** 2), R


@lru_cache(maxsize=None)
def sphere_constant(n: int) -> float:
    """Mean chordal distance from a fixed point of S^n to a uniform point."""
    if not 1 <= n <= 6:
        raise UnsupportedDimension("sphere constants are supported for 1 <= n <= 6")
    num = integrate.quad(lambda th: 2 * math.sin(th / 2) * math.sin(th) ** (n - 1), 0, math.pi,
                         epsabs=1e-12, epsrel=1e-12)[0]
    den = integrate.quad(lambda th: math.sin(th) ** (n - 1), 0, math.pi, epsabs=1e-12, epsrel=1e-12)[0]
    return num / den
