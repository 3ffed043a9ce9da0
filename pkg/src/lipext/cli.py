"""``lipext`` command-line front end.

All file IO lives here.  Input files follow two JSON schemas::

    space: {"points": [labels], "dist": [[...]]}  or  {"coords": [[...]], "norm": "l1|l2|linf"}
    map:   {"domain": [indices], "values": [[...]]}

Exit codes: 0 on success, 1 when a checked property fails, 2 on bad input.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import acceptance
from . import coverings as cv
from . import extenders as ex
from . import simplicial as sx
from . import whitney as wh
from .errors import EnumerationTooLarge, InputError, LipextError, MetricError, TooLarge
from .metric_core import (
    NormedVector,
    PartialLipschitzMap,
    PointCloud,
    SubsetRef,
    certify_lipschitz,
    validate_metric,
)

CSV_DIGITS = 12


class CheckFailed(Exception):
    """A property that the run asserts did not hold."""


@dataclass
class Loaded:
    space: object
    cloud: PointCloud | None
    raw: dict


# -- file formats ------------------------------------------------------------

def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{what} file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def load_space(path) -> Loaded:
    obj = _read_json(path, "space")
    if not isinstance(obj, dict):
        raise InputError(f"space file {path}: expected a JSON object")
    try:
        if "coords" in obj:
            cloud = PointCloud(obj["coords"], obj.get("norm", "l2"))
            return Loaded(cloud.space(), cloud, obj)
        if "dist" in obj:
            return Loaded(validate_metric(obj["dist"], obj.get("points")), None, obj)
    except (InputError, MetricError) as exc:
        raise InputError(f"space file {path}: {exc}") from None
    raise InputError(f"space file {path}: needs field 'coords' or 'dist'")


def load_domain(path, space) -> SubsetRef:
    obj = _read_json(path, "domain")
    idx = obj.get("domain") if isinstance(obj, dict) else obj
    if idx is None:
        raise InputError(f"domain file {path}: missing field 'domain'")
    try:
        return SubsetRef(space, idx)
    except (InputError, IndexError, TypeError, ValueError) as exc:
        raise InputError(f"domain file {path}: field 'domain': {exc}") from None


def load_map(path, space, norm="l2") -> PartialLipschitzMap:
    obj = _read_json(path, "map")
    for key in ("domain", "values"):
        if not isinstance(obj, dict) or key not in obj:
            raise InputError(f"map file {path}: missing field '{key}'")
    try:
        vals = np.asarray(obj["values"], dtype=float)
        vals = vals.reshape(len(vals), -1)
        dom = [int(i) for i in obj["domain"]]
        if len(set(dom)) != len(dom) or len(dom) != len(vals):
            raise InputError("domain must list distinct indices, one per value row")
        vals = vals[np.argsort(dom, kind="stable")]  # SubsetRef sorts its indices
        A = SubsetRef(space, dom)
        return PartialLipschitzMap(A, vals, NormedVector(vals.shape[1], obj.get("norm", norm)))
    except (InputError, IndexError, TypeError, ValueError) as exc:
        raise InputError(f"map file {path}: field 'values'/'domain': {exc}") from None


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, (np.ndarray, tuple, set, frozenset)):
        return list(x) if not isinstance(x, np.ndarray) else x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dump_json(obj, path=None):
    text = json.dumps(obj, default=_jsonable, indent=2, ensure_ascii=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def fmt(v: float) -> str:
    return f"{v:.{CSV_DIGITS}g}"


def write_values_csv(path, values):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point"] + [f"F{k}" for k in range(values.shape[1])])
        for i, row in enumerate(values):
            w.writerow([i] + [fmt(v) for v in row])


def parse_mode(text):
    """``enumerate`` or ``sample:COUNT:SEED``."""
    if text == "enumerate":
        return {"mode": "enumerate"}
    parts = text.split(":")
    if parts[0] != "sample" or len(parts) != 3:
        raise InputError(f"--mode {text!r}: expected 'enumerate' or 'sample:COUNT:SEED' (seed is mandatory)")
    try:
        count, seed = int(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"--mode {text!r}: COUNT and SEED must be integers") from None
    if count <= 0:
        raise InputError("--mode: COUNT must be positive")
    return {"mode": "sample", "count": count, "seed": seed}


def _oracle(loaded: Loaded, A: SubsetRef):
    """Grid witness for l2 clouds, single-linkage witness otherwise."""
    if loaded.cloud is not None and loaded.cloud.norm == "l2":
        return cv.grid_oracle(loaded.cloud, A, loaded.space)
    return cv.single_linkage_oracle(loaded.space, A)


def _space_json(loaded: Loaded):
    if loaded.cloud is not None:
        return {"coords": loaded.cloud.coords.tolist(), "norm": loaded.cloud.norm}
    return {"dist": loaded.space.dist.tolist()}


# -- subcommands ---------------------------------------------------------------

def cmd_validate(args):
    loaded = load_space(args.space)
    X = loaded.space
    dump_json({"points": len(X), "diameter": float(X.dist.max()), "valid": True}, args.out)
    return 0


def _need_scale(args):
    if args.scale is None or not args.scale > 0:
        raise InputError(f"--method {args.method} needs a positive --scale")
    return args.scale


def cmd_cover(args):
    loaded = load_space(args.space)
    X = loaded.space
    subset = load_domain(args.domain, X) if args.domain else X.all
    m = args.method
    if m == "grid":
        if loaded.cloud is None:
            raise InputError(f"space file {args.space}: grid covers need field 'coords'")
        cov = cv.grid_cover(loaded.cloud, _need_scale(args), X, subset.indices)
        ok, rep = cv.verify_nagata(cov, args.scale, *cv.grid_nagata_constants(loaded.cloud.dim), args.budget)
        out = dict(cov.to_json(), nagata_ok=ok, multiplicity=rep.multiplicity.multiplicity)
    elif m == "colored":
        s = _need_scale(args)
        cov = cv.colored_oracle(_oracle(loaded, subset))(s)
        out = cov.to_json()
    elif m == "padded":
        D = _need_scale(args)
        opts = parse_mode(args.mode)
        cov = cv.iterative_ball_partition(X, D, subset=subset.indices, **opts)
        rows = cv.padded_ratio_check(X, D, cov, sampled_ok=opts["mode"] == "sample")
        out = dict(cov.to_json(), mode=opts, padded=[{"point": r.point, "ok": r.ok} for r in rows])
        if opts["mode"] == "enumerate" and not all(r.ok for r in rows):
            dump_json(out, args.out)
            bad = next(r for r in rows if not r.ok)
            raise CheckFailed(f"padded-ratio inequality fails at point {bad.point}")
    elif m in ("whitney", "whitney-refined"):
        if not args.domain:
            raise InputError(f"--method {m} needs --domain")
        oracle = _oracle(loaded, subset)
        if m == "whitney":
            kw = {} if args.r is None else {"r": args.r}
            W = wh.build_whitney_cover(X, subset, oracle, budget=args.budget, **kw)
        else:
            W = wh.build_refined_whitney_cover(X, subset, cv.colored_oracle(oracle), oracle.n + 1,
                                               oracle.c, r=args.r)
        out = W.to_json()
    else:  # argparse restricts choices
        raise InputError(f"unknown method {m}")
    dump_json(out, args.out)
    return 0


def cmd_extend(args):
    loaded = load_space(args.space)
    X = loaded.space
    f = load_map(args.map, X)
    if args.domain:
        A = load_domain(args.domain, X)
        if set(A.indices) != set(f.domain.indices):
            raise InputError(f"domain file {args.domain}: field 'domain' differs from the map's domain")
    m = args.method
    if m == "mcshane":
        res = ex.mcshane_extend(f)
    elif m == "whitney":
        kw = {} if args.r is None else {"r": args.r}
        res = ex.whitney_extend(f, _oracle(loaded, f.domain), budget=args.budget, **kw)
    elif m == "leenaor":
        if args.seed is None:
            raise InputError("--method leenaor samples permutations and needs --seed")
        res = ex.lee_naor_extend(f, seed=args.seed)
    else:
        kw = {} if args.r is None else {"r": args.r}
        W = wh.build_whitney_cover(X, f.domain, _oracle(loaded, f.domain), budget=args.budget, **kw)
        res = ex.nerve_extend(f, W, args.extensor)
    out = dict(res.to_json(), space=_space_json(loaded), domain=list(f.domain.indices),
               target={"dim": f.target.dim, "norm": f.target.norm}, version=__version__)
    if args.out:
        dump_json(out, f"{args.out}.json")
        write_values_csv(f"{args.out}.csv", res.values)
    else:
        write_values_csv_stdout(res.values)
    if not res.within_bound:
        raise CheckFailed(f"Lip F = {res.certificate.constant} exceeds the bound {res.bound} "
                          f"({res.bound_label}); witness pair {res.certificate.witness}")
    return 0


def write_values_csv_stdout(values):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["point"] + [f"F{k}" for k in range(values.shape[1])])
    for i, row in enumerate(values):
        w.writerow([i] + [fmt(v) for v in row])


def cmd_certify(args):
    obj = _read_json(args.result, "result")
    for key in ("space", "values", "lip_F", "target"):
        if key not in obj:
            raise InputError(f"result file {args.result}: missing field '{key}'")
    sp = obj["space"]
    X = PointCloud(sp["coords"], sp["norm"]).space() if "coords" in sp else validate_metric(sp["dist"])
    vals = np.asarray(obj["values"], dtype=float)
    target = NormedVector(obj["target"]["dim"], obj["target"]["norm"])
    cert = certify_lipschitz(X, vals, target)
    agree = abs(cert.constant - obj["lip_F"]) <= 1e-9 * max(1.0, abs(cert.constant))
    out = {"lip_F": cert.constant, "witness": cert.witness, "recorded_lip_F": obj["lip_F"],
           "agrees": agree}
    if "bound" in obj:
        out["within_bound"] = cert.constant <= obj["bound"] + 1e-9
    dump_json(out, args.out)
    if not agree or not out.get("within_bound", True):
        raise CheckFailed("recomputed certificate does not match the recorded result")
    return 0


def cmd_constants(args):
    if args.cn is not None:
        print(f"{sx.sphere_constant(args.cn):.6f}")
    if args.nagata is not None:
        n, c = int(args.nagata[0]), args.nagata[1]
        print(f"whitney_bound {fmt(ex.whitney_bound(n, c))}")
        print(f"headline_log10 {fmt(ex.headline_log10_constant(n, c))}")
    if args.leenaor is not None:
        print(f"leenaor_bound {fmt(ex.lee_naor_bound(args.leenaor))}")
    if args.cn is None and args.nagata is None and args.leenaor is None:
        raise InputError("constants: give at least one of --cn, --nagata, --leenaor")
    return 0


def cmd_selftest(args):
    results = acceptance.run_all(args.seed)
    report = []
    for r in results:
        print(r.line())
        report.append({"criterion": r.number, "name": r.name, "passed": r.ok,
                       "runtime_ms": round(r.seconds * 1000), "details": r.details})
    if args.out:
        dump_json(report, args.out)
    failed = [r.number for r in results if not r.ok]
    if failed:
        raise CheckFailed(f"acceptance criteria failed: {failed}")
    return 0


# -- entry point ---------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="lipext", description="Lipschitz extensions on finite metric spaces.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check the metric axioms of a space file")
    v.add_argument("space")
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("cover", help="build a cover of a space or of a subset")
    c.add_argument("space")
    c.add_argument("--method", required=True,
                   choices=["grid", "colored", "padded", "whitney", "whitney-refined"])
    c.add_argument("--scale", type=float)
    c.add_argument("--mode", default="enumerate", help="enumerate | sample:COUNT:SEED")
    c.add_argument("--domain")
    c.add_argument("--r", type=float)
    c.add_argument("--budget", type=int, default=64)
    c.add_argument("--out")
    c.set_defaults(func=cmd_cover)

    e = sub.add_parser("extend", help="extend a partial map to the whole space")
    e.add_argument("space")
    e.add_argument("--method", required=True, choices=["mcshane", "whitney", "leenaor", "nerve"])
    e.add_argument("--map", required=True)
    e.add_argument("--domain")
    e.add_argument("--r", type=float)
    e.add_argument("--seed", type=int)
    e.add_argument("--extensor", default="barycentric", choices=["barycentric", "skeletal"])
    e.add_argument("--budget", type=int, default=64)
    e.add_argument("--out", help="output prefix; writes PREFIX.json and PREFIX.csv")
    e.set_defaults(func=cmd_extend)

    k = sub.add_parser("certify", help="recompute the Lipschitz certificate of a result file")
    k.add_argument("result")
    k.add_argument("--out")
    k.set_defaults(func=cmd_certify)

    t = sub.add_parser("constants", help="print explicit constants")
    t.add_argument("--cn", type=int, help="sphere constant c_n")
    t.add_argument("--nagata", type=float, nargs=2, metavar=("N", "C"))
    t.add_argument("--leenaor", type=int, metavar="N_POINTS")
    t.set_defaults(func=cmd_constants)

    s = sub.add_parser("selftest", help="run the acceptance suite")
    s.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    s.add_argument("--out")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, MetricError, EnumerationTooLarge, TooLarge) as exc:
        print(f"lipext: input error: {exc}", file=sys.stderr)
        return 2
    except (CheckFailed, LipextError) as exc:
        print(f"lipext: check failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
