"""Extension pipelines and their certificates.

Every pipeline returns an :class:`ExtensionResult` whose values agree with f
on A exactly and whose Lipschitz constant is certified over all pairs of X.
Bounds are homogeneous in ``Lip f``: they are stated for 1-Lipschitz maps and
multiplied by the certified ``Lip f`` here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coverings import NagataOracle, iterative_ball_partition
from .errors import CoverNotVerified, DomainTooSmall, InputError, NonScalarTarget, PropertyViolation, UnsupportedTarget
from .metric_core import (
    CERT_ATOL,
    FiniteMetricSpace,
    LipschitzCertificate,
    NormedVector,
    PartialLipschitzMap,
    certify_lipschitz,
    nearest_map,
)
from .partition import PartitionOfUnity, build_partition
from .simplicial import SimplexPoint, nerve_of_cover, skeletal_extend
from .whitney import DEFAULT_R, WhitneyCovering, build_whitney_cover

LEE_NAOR_SAMPLES = 2000
LEE_NAOR_SEED = 20240601


@dataclass
class ExtensionResult:
    method: str
    values: np.ndarray
    certificate: LipschitzCertificate
    lip_f: float
    bound: float
    bound_label: str
    inputs: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def margin(self):
        return self.bound - self.certificate.constant

    @property
    def within_bound(self):
        return self.certificate.constant <= self.bound + CERT_ATOL

    def to_json(self):
        return {
            "method": self.method,
            "values": self.values.tolist(),
            "lip_F": self.certificate.constant,
            "witness": list(self.certificate.witness) if self.certificate.witness else None,
            "pair_count": self.certificate.pair_count,
            "lip_f": self.lip_f,
            "lip_F_normalized": self.certificate.constant / self.lip_f if self.lip_f > 0 else None,
            "bound": self.bound,
            "bound_label": self.bound_label,
            "margin": self.margin,
            "inputs": self.inputs,
            "checks": self.checks,
        }


def _require_normed(f: PartialLipschitzMap):
    if not isinstance(f.target, NormedVector):
        raise UnsupportedTarget("this pipeline needs a normed target")


def domain_lipschitz(f: PartialLipschitzMap) -> float:
    return certify_lipschitz(f.space, f.values, f.target, points=f.domain.indices).constant


def _finish(method, space, f, values, lip_f, bound, label, inputs, checks):
    values = np.array(values, dtype=float)
    values[list(f.domain.indices)] = f.values  # exact agreement on A
    cert = certify_lipschitz(space, values, f.target)
    return ExtensionResult(method, values, cert, lip_f, bound, label, inputs, checks)


# -- McShane ----------------------------------------------------------------

def mcshane_extend(f: PartialLipschitzMap) -> ExtensionResult:
    """``F(x) = min_a f(a) + L d(a, x)`` with ``L = Lip f``."""
    if not isinstance(f.target, NormedVector) or f.target.dim != 1:
        raise NonScalarTarget("McShane extension needs a real-valued map")
    space = f.space
    L = domain_lipschitz(f)
    a = f.domain.array
    F = (f.values[:, 0][None, :] + L * space.dist[:, a]).min(axis=1)
    return _finish("mcshane", space, f, F[:, None], L, L, "Lip f", {}, {})


# -- Whitney / Lang-Schlichenmaier --------------------------------------------

def whitney_bound(n: int, c: float) -> float:
    return 1000 * (c + 1) * math.log2(n + 2)


def anchor_check(pou: PartitionOfUnity, alpha: float, delta: float):
    """``d(a_i, x) <= (1 + alpha + delta) r_i`` for every active pair (x, i)."""
    space = pou.space
    worst = -np.inf
    bad = []
    for k, x in enumerate(pou.exterior):
        for i in np.flatnonzero(pou.weights[k] > 0):
            lhs = space.dist[pou.anchors[i], x]
            rhs = (1 + alpha + delta) * pou.cover.r[i]
            worst = max(worst, lhs / rhs)
            if lhs > rhs * (1 + 1e-12):
                bad.append((int(x), int(i), float(lhs), float(rhs)))
    return {"ok": not bad, "violations": bad, "max_ratio": float(worst) if np.isfinite(worst) else 0.0}


def _pou_values(pou: PartitionOfUnity, f: PartialLipschitzMap, n_points: int):
    fa = np.array([f.value_at(int(a)) for a in pou.anchors])
    values = np.zeros((n_points, f.target.dim))
    values[pou.exterior] = pou.weights @ fa
    return values


def whitney_extend(f: PartialLipschitzMap, oracle: NagataOracle, r: float = DEFAULT_R,
                   budget: int = 64) -> ExtensionResult:
    """Cover, partition of unity and barycenter of the anchor values."""
    _require_normed(f)
    space = f.space
    L = domain_lipschitz(f)
    n, c = oracle.n, oracle.c
    bound = whitney_bound(n, c) * L
    label = "1000(c+1)log2(n+2) Lip f"
    inputs = {"r": r, "n": n, "c": c, "oracle": oracle.name}
    if len(f.domain) == len(space):
        return _finish("whitney", space, f, np.array(f.values, dtype=float), L, bound, label, inputs, {})
    cover = build_whitney_cover(space, f.domain, oracle, r, budget)
    pou = build_partition(cover)
    values = _pou_values(pou, f, len(space))
    checks = {"anchor": anchor_check(pou, cover.params.alpha, cover.params.delta),
              "cover_blocks": len(cover), "whitney_params": cover.params.as_tuple(),
              "stated_flags": cover.meta["stated_flags"]}
    if not checks["anchor"]["ok"]:
        raise PropertyViolation(f"anchor inequality fails: {checks['anchor']['violations'][:3]}")
    return _finish("whitney", space, f, values, L, bound, label, inputs, checks)


# -- Lee-Naor -----------------------------------------------------------------

def lee_naor_levels(n_points: int) -> int:
    """N with ``N + 1 = max(1, floor(log2(log n)))``."""
    return max(1, math.floor(math.log2(math.log(n_points)))) - 1


def omega(t, N: int):
    """Piecewise linear cutoff: 1 on [1, 2^N], 0 outside (1/2, 2^(N+1))."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    up = (t > 0.5) & (t <= 1)
    out[up] = 2 * t[up] - 1
    out[(t > 1) & (t <= 2 ** N)] = 1
    down = (t > 2 ** N) & (t < 2 ** (N + 1))
    out[down] = -t[down] / 2 ** N + 2
    return out


@dataclass
class ScaleMap:
    m: int
    exponent: float
    points: np.ndarray   # X_m as point indices
    values: np.ndarray   # F_m on those points
    deviation: float     # max ||F_m(x) - f(a_x)|| / 2^m  (scaled by Lip f)
    blocks: int


def lee_naor_scale(space: FiniteMetricSpace, f: PartialLipschitzMap, m: int, near, dA,
                   samples: int, seed: int) -> ScaleMap:
    """F_m on X_m from a sampled (or enumerated) padded cover of A."""
    A = f.domain
    a = A.array
    Xm = np.flatnonzero(dA <= 2.0 ** m)
    mode = "enumerate" if len(a) <= 8 else "sample"
    cov = iterative_ball_partition(space, 2.0 ** (m - 1), mode=mode, count=samples, seed=seed, subset=a)
    dAA = space.dist[np.ix_(a, a)]
    ratio = (dAA <= 2.0 ** m).sum(axis=1) / (dAA <= 2.0 ** (m - 2)).sum(axis=1)
    expo = max(1.0, math.log(float(ratio.max())))
    cap = 2.0 ** m / 16
    fa_all = {int(p): f.value_at(int(p)) for p in a}
    psi = np.zeros((len(Xm), len(cov.blocks)))
    anchor_vals = np.zeros((len(cov.blocks), f.target.dim))
    counts = np.asarray(cov.counts, dtype=float)
    for i, Ai in enumerate(cov.blocks):
        inside = np.isin(near[Xm], Ai.array)
        rest = Xm[~inside]
        if len(rest):
            depth = np.minimum(space.dist[np.ix_(Xm, rest)].min(axis=1), cap)
        else:
            depth = np.full(len(Xm), cap)
        psi[:, i] = np.where(inside, depth, 0.0) ** expo * counts[i]
        anchor_vals[i] = fa_all[int(Ai.indices[0])]
    total = psi.sum(axis=1)
    if (total <= 0).any():
        raise PropertyViolation(f"scale {m}: a point of X_m lies in no block")
    vals = (psi / total[:, None]) @ anchor_vals
    dev_vals = np.array([fa_all[int(p)] for p in near[Xm]])
    dev = float(f.target.pairwise(vals, dev_vals).diagonal().max()) / 2.0 ** m
    return ScaleMap(m, expo, Xm, vals, dev, len(cov.blocks))


def lee_naor_bound(n_points: int) -> float:
    return 600 * math.log(n_points) / math.log(math.log(n_points))


def lee_naor_extend(f: PartialLipschitzMap, samples: int = LEE_NAOR_SAMPLES,
                    seed: int = LEE_NAOR_SEED) -> ExtensionResult:
    """Multiscale extension ``F = (1/(N+1)) sum_m omega_m F_m`` for |A| >= 16."""
    _require_normed(f)
    space = f.space
    nA = len(f.domain)
    if nA < 16:
        raise DomainTooSmall(f"needs |A| >= 16, got {nA}")
    L = domain_lipschitz(f)
    N = lee_naor_levels(nA)
    near, dA = nearest_map(space, f.domain)
    ext = space.complement(f.domain).array
    bound = lee_naor_bound(nA) * L
    label = "600 log n / log log n Lip f"
    inputs = {"N": N, "samples": samples, "seed": seed, "n": nA}
    if len(ext) == 0:
        return _finish("leenaor", space, f, np.array(f.values, dtype=float), L, bound, label, inputs, {})
    d = dA[ext]
    m_lo = math.floor(math.log2(8 * d.min()))
    m_hi = math.ceil(math.log2(16 * 2 ** (N + 1) * d.max()))
    F = np.zeros((len(space), f.target.dim))
    wsum = np.zeros(len(ext))
    nonzero = np.zeros(len(ext), dtype=int)
    scales = []
    for m in range(m_lo, m_hi + 1):
        w = omega(2.0 ** m / (16 * d), N)
        if not (w != 0).any():
            continue
        sm = lee_naor_scale(space, f, m, near, dA, samples, seed + m)
        scales.append(sm)
        pos = {int(p): k for k, p in enumerate(sm.points)}
        act = np.flatnonzero(w != 0)  # omega_m(x) != 0 forces x into X_m
        rows = [pos[int(x)] for x in ext[act]]
        F[ext[act]] += w[act, None] * sm.values[rows]
        wsum += w
        nonzero += w != 0
    F[ext] /= N + 1
    miracle = float(np.abs(wsum - (N + 1)).max())
    worst_dev = max((s.deviation for s in scales), default=0.0)
    checks = {
        "omega_sum_error": miracle,
        "max_nonzero_omega": int(nonzero.max()),
        "deviation_ratio": worst_dev,
        "deviation_ok": worst_dev <= L * (1 + 1e-12) + 1e-15,
        "scales": [(s.m, s.exponent, s.blocks) for s in scales],
    }
    if miracle > 1e-9 or nonzero.max() > N + 2 or not checks["deviation_ok"]:
        raise PropertyViolation(f"multiscale properties fail: {checks}")
    return _finish("leenaor", space, f, F, L, bound, label, inputs, checks)


# -- nerve pipeline -----------------------------------------------------------

def nerve_bound(n: int, alpha: float, delta: float, gamma: float, C: float = 1.0) -> float:
    return 100 * C * alpha / delta * gamma * math.log2(n + 2)


def headline_log10_constant(n: int, c: float, lam: float = math.sqrt(3)) -> float:
    """log10 of ``3e10 (c+1)^10 (1e5 lam)^(n+1) (n+1)^(6n)``; for reporting only."""
    return (math.log10(3) + 10 + 10 * math.log10(c + 1) + (n + 1) * (5 + math.log10(lam))
            + 6 * n * math.log10(n + 1))


def nerve_extend(f: PartialLipschitzMap, cover: WhitneyCovering, extensor: str = "barycentric",
                 mesh: int = 8) -> ExtensionResult:
    """``F = Psi o Phi`` off A, with Phi the nerve map and Psi a simplicial extensor."""
    _require_normed(f)
    if not cover.is_verified:
        raise CoverNotVerified("nerve pipeline needs a verified Whitney cover")
    space = f.space
    L = domain_lipschitz(f)
    n, alpha, delta, gamma = cover.params.as_tuple()
    pou = build_partition(cover, m=math.log2(n + 2))
    K = nerve_of_cover(pou)
    fa = {i: np.asarray(f.value_at(int(a)), dtype=float) for i, a in enumerate(pou.anchors)}
    checks = {"anchor": anchor_check(pou, alpha, delta), "nerve_dimension": K.dimension,
              "nerve_simplices": len(K.maximal)}
    if extensor == "barycentric":
        values = _pou_values(pou, f, len(space))
        C = 1.0
    elif extensor == "skeletal":
        ext = skeletal_extend(K, fa, f.target, mesh=mesh)
        values = np.zeros((len(space), f.target.dim))
        for k, x in enumerate(pou.exterior):
            values[x] = ext(SimplexPoint({int(i): w for i, w in enumerate(pou.weights[k]) if w > 0}))
        consts = [ext.certify(s, mesh)["constant"] for s in K.maximal if len(s) > 1]
        C = max(consts, default=1.0)
        checks["skeletal_constant"] = C
    else:
        raise InputError(f"unknown extensor {extensor!r}")
    bound = nerve_bound(n, alpha, delta, gamma, C) * L
    nagata = cover.meta.get("nagata")
    if nagata is not None:
        checks["headline_log10_constant"] = headline_log10_constant(nagata[0], nagata[1])
    inputs = {"n": n, "alpha": alpha, "delta": delta, "gamma": gamma, "C": C, "extensor": extensor}
    if not checks["anchor"]["ok"]:
        raise PropertyViolation(f"anchor inequality fails: {checks['anchor']['violations'][:3]}")
    return _finish("nerve", space, f, values, L, bound, "100 C alpha gamma log2(n+2) / delta Lip f",
                   inputs, checks)
