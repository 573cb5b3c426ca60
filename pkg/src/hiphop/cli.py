"""Command-line front end: ``hiphop <command> [options]``.

Exit status: 0 success, 2 bad arguments, 3 numerical failure, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, replace

import numpy as np

from .classify import arrival_defect, choreography_refine, classify_point, non_choreography_check, \
    rational_match
from .continuation import (ContinuationOptions, detect_bifurcations, read_branch, switch_branch, trace_branch,
                           trace_from_seed, write_branch)
from .errors import HipHopError, NoBracket, NumericalFailure, SeedRejected
from .integrate import IntegratorOptions, export_csv, integrate
from .model import Params, derived_constants
from .shoot import ShootPoint, System, fixed_coordinate, newton_solve, trivial_seeds
from .verify import compare_reduced_full, embed_point, export_full_csv, integrate_full

log = logging.getLogger("hiphop")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


def fmt(x) -> str:
    return f"{float(x):.17g}"


def fmt_vec(v) -> str:
    return "(" + ", ".join(fmt(x) for x in v) + ")"


_ANGLE = re.compile(r"^\s*([+-]?)\s*(\d+(?:\.\d*)?)?\s*\*?\s*(pi)?\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$", re.I)


def parse_angle(text: str) -> float:
    """Parse ``5pi/3``, ``pi``, ``-2*pi/3``, ``3/2`` or a plain decimal into radians."""
    m = _ANGLE.match(text)
    if not m or (m.group(2) is None and m.group(3) is None):
        raise UsageError(f"cannot parse angle {text!r}")
    sign = -1.0 if m.group(1) == "-" else 1.0
    num = float(m.group(2)) if m.group(2) is not None else 1.0
    den = float(m.group(4)) if m.group(4) is not None else 1.0
    if den == 0:
        raise UsageError("angle denominator is zero")
    value = num * math.pi / den if m.group(3) else num / den
    return sign * value


# ---------------------------------------------------------------------------
# configuration

_PARAM_KEYS = {"N": int, "m": float, "r0": float}
_INT_KEYS = {"max_points", "max_steps", "k_max", "easy_iterations"}


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


def _coerce(key, value):
    if key in _PARAM_KEYS:
        return _PARAM_KEYS[key](value)
    if key in _INT_KEYS:
        return int(value)
    if isinstance(value, str) and value.lower() in ("none", ""):
        return None
    if isinstance(value, str) and value.lower() in ("true", "false"):
        return value.lower() == "true"
    return float(value)


class RunConfig:
    """Parameters and options merged from defaults, an optional config file and flags."""

    def __init__(self, args):
        values = {}
        if getattr(args, "config", None):
            values.update(read_config(args.config))
        for key in ("N", "m", "r0", "rel_tol", "abs_tol", "h0", "h_min", "h_max", "max_points",
                    "a_min", "T_max", "tol", "bif_angle_threshold", "k_max", "match_tol"):
            v = getattr(args, key, None)
            if v is not None:
                values[key] = v
        try:
            values = {k: _coerce(k, v) for k, v in values.items()}
        except ValueError as exc:
            raise UsageError(f"bad configuration value: {exc}") from exc
        known = set(_PARAM_KEYS) | {f.name for f in fields(IntegratorOptions)} | \
            {f.name for f in fields(ContinuationOptions)} | {"k_max", "match_tol"}
        unknown = set(values) - known
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        try:
            self.params = Params(**{k: values[k] for k in _PARAM_KEYS if k in values})
            self.integrator = IntegratorOptions(
                **{f.name: values[f.name] for f in fields(IntegratorOptions) if f.name in values})
            self.continuation = ContinuationOptions(
                **{f.name: values[f.name] for f in fields(ContinuationOptions) if f.name in values})
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
        self.k_max = int(values.get("k_max", 40))
        self.match_tol = float(values.get("match_tol", 1e-3))
        self.threads = max(1, int(os.environ.get("HIPHOP_THREADS", "1") or 1))


# ---------------------------------------------------------------------------
# commands


def cmd_seeds(cfg, args):
    dc = derived_constants(cfg.params)
    p0, q0 = trivial_seeds(cfg.params)
    print(f"p0 = {fmt_vec(p0)}")
    print(f"q0 = {fmt_vec(q0)}")
    for name in ("alpha_N", "gamma_N", "a0", "T0_I", "T0_II", "omega", "w"):
        print(f"{name} = {fmt(getattr(dc, name))}")


def cmd_solve(cfg, args):
    seed = ShootPoint(args.a, args.b, args.T)
    index = "abT".index(args.fix)
    normal, anchor = fixed_coordinate(index, seed[index])
    res = newton_solve(seed, System(args.system), cfg.params, normal, anchor,
                       cfg.continuation.tol, opts=cfg.integrator)
    print(f"point = {fmt_vec(res.point)}")
    print(f"residual = {fmt_vec(res.residual)}")
    print(f"jacobian = [{fmt_vec(res.jacobian[0])}, {fmt_vec(res.jacobian[1])}]")
    print(f"iterations = {res.iterations}")


def _parse_point(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad point {text!r}") from exc
    if len(vals) != 3:
        raise UsageError("a point needs three comma-separated values a,b,T")
    return ShootPoint(*vals)


def cmd_branch(cfg, args):
    kind = System(args.system)
    p0, q0 = trivial_seeds(cfg.params)
    if args.seed == "q0":
        seed = q0
    elif args.seed == "p0":
        seed = p0
    else:
        seed = _parse_point(args.seed)
    opts = cfg.continuation
    if args.no_escape:
        opts = replace(opts, escape_trivial=False)
    branch = trace_branch(seed, kind, cfg.params, opts, integrator=cfg.integrator)
    write_branch(branch, args.out)
    last = branch.points[-1].point
    print(f"points = {len(branch)}")
    print(f"termination = {branch.metadata['termination']}")
    print(f"last = {fmt_vec(last)}")


def _load(path):
    try:
        return read_branch(path)
    except (ValueError, KeyError) as exc:
        raise OSError(f"{path}: malformed branch file ({exc})") from exc


def cmd_bifurcate(cfg, args):
    parent = _load(args.branch)
    cands = detect_bifurcations(parent, cfg.continuation.bif_angle_threshold)
    print(f"candidates = {len(cands)}")
    prefix = args.out_prefix or os.path.splitext(args.branch)[0] + "_child"
    n = 0
    for ci, cand in enumerate(cands):
        print(f"candidate {ci} = {fmt_vec(cand.point)} indicator = {fmt(cand.extra['indicator'])}")
        try:
            seeds = switch_branch(cand, parent, parent.params, cfg.continuation, integrator=cfg.integrator)
        except HipHopError as exc:
            print(f"  no switch: {exc}")
            continue
        for seed in seeds:
            try:
                child = trace_from_seed(seed, parent.kind, parent.params, cfg.continuation, cfg.integrator)
            except SeedRejected as exc:
                print(f"  seed rejected: {exc}")
                continue
            path = f"{prefix}{n}.jsonl"
            write_branch(child, path)
            print(f"  child {n}: {len(child)} points, {child.metadata['termination']} -> {path}")
            n += 1


def _classify_one(bp, params, cfg):
    try:
        rep = classify_point(bp.point, params, cfg.k_max, cfg.match_tol, opts=cfg.integrator)
        rec = rep.as_record()
        rec["criterion"] = non_choreography_check(bp.point, params, opts=cfg.integrator).value
    except HipHopError as exc:
        rec = {"symmetry": None, "classify_error": str(exc)}
    return rec


def cmd_classify(cfg, args):
    branch = _load(args.branch)
    params = branch.params
    work = lambda bp: _classify_one(bp, params, cfg)  # noqa: E731
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            records = list(pool.map(work, branch.points))
    else:
        records = [work(bp) for bp in branch.points]
    for bp, rec in zip(branch.points, records):
        bp.extra.update(rec)
    write_branch(branch, args.out or args.branch)
    counts = {}
    for rec in records:
        counts[rec.get("symmetry")] = counts.get(rec.get("symmetry"), 0) + 1
    for k in sorted(counts, key=str):
        print(f"{k} = {counts[k]}")


def cmd_choreo(cfg, args):
    branch = _load(args.branch)
    target = parse_angle(args.target)
    point = choreography_refine(branch, target, branch.params, opts=cfg.integrator, occurrence=args.occurrence)
    print(f"point = {fmt_vec(point)}")
    print(f"target = {fmt(target)}")
    match = rational_match(target, branch.params.N, cfg.k_max, cfg.match_tol)
    if match is not None:
        print(f"k0 = {match.k0}")
        print(f"j0 = {match.j0}")
        print(f"l = {match.l}")
        print(f"arrival_defect = {fmt(arrival_defect(point, match, branch.params, cfg.integrator))}")


def cmd_verify(cfg, args):
    point = ShootPoint(args.a, args.b, args.T)
    cmp = compare_reduced_full(point, cfg.params, cfg.integrator, span=args.span)
    print(f"max_deviation = {fmt(cmp.max_deviation)}")
    print(f"energy_drift = {fmt(cmp.energy_drift)}")
    print(f"angular_momentum_drift = {fmt(cmp.angular_momentum_drift)}")
    print(f"symmetry_defect = {fmt(cmp.symmetry_defect)}")
    if args.criterion:
        print(f"criterion = {non_choreography_check(point, cfg.params, opts=cfg.integrator).value}")


def cmd_export(cfg, args):
    point = ShootPoint(args.a, args.b, args.T)
    t_end = args.span * point.T
    times = np.linspace(0.0, t_end, args.samples) if args.samples else None
    if args.full:
        _, traj = integrate_full(embed_point(point, cfg.params), t_end, cfg.params, cfg.integrator, dense=True)
        export_full_csv(traj, args.out, times)
    else:
        traj = integrate(point.a, point.b, t_end, cfg.params, cfg.integrator)
        export_csv(traj, args.out, times)
    print(f"wrote {args.out}")


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("-N", type=int, help="bodies per polygon (default 3)")
    g.add_argument("-m", type=float, help="mass of each body (default 1)")
    g.add_argument("--r0", type=float, help="initial ring radius (default 2)")
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--abs-tol", dest="abs_tol", type=float)
    g.add_argument("--tol", type=float, help="Newton residual tolerance")
    g.add_argument("--config", help="key=value file overriding defaults")
    g.add_argument("-v", "--verbose", action="count", default=0)

    cont = _Parser(add_help=False)
    c = cont.add_argument_group("continuation")
    c.add_argument("--h0", type=float)
    c.add_argument("--h-min", dest="h_min", type=float)
    c.add_argument("--h-max", dest="h_max", type=float)
    c.add_argument("--max-points", dest="max_points", type=int)
    c.add_argument("--a-min", dest="a_min", type=float)
    c.add_argument("--T-max", dest="T_max", type=float)
    c.add_argument("--bif-threshold", dest="bif_angle_threshold", type=float)

    cls = _Parser(add_help=False)
    c = cls.add_argument_group("classification")
    c.add_argument("--k-max", dest="k_max", type=int)
    c.add_argument("--match-tol", dest="match_tol", type=float)

    point = _Parser(add_help=False)
    point.add_argument("--a", type=float, required=True)
    point.add_argument("--b", type=float, required=True)
    point.add_argument("--T", type=float, required=True)

    p = _Parser(prog="hiphop", description="Hip-hop periodic orbits of the 2N-body problem.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("seeds", parents=[common], help="circular-solution seeds and constants")
    s.set_defaults(func=cmd_seeds)

    s = sub.add_parser("solve", parents=[common, point], help="one Newton solve")
    s.add_argument("--system", choices=["I", "II"], default="II")
    s.add_argument("--fix", choices=["a", "b", "T"], default="b", help="coordinate held fixed")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("branch", parents=[common, cont], help="trace a branch")
    s.add_argument("--system", choices=["I", "II"], default="II")
    s.add_argument("--seed", default="q0", help="q0, p0 or a,b,T")
    s.add_argument("--no-escape", action="store_true", help="stay on the circular line at q0/p0")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_branch)

    s = sub.add_parser("bifurcate", parents=[common, cont], help="detect branch points and switch")
    s.add_argument("--branch", required=True)
    s.add_argument("--out-prefix")
    s.set_defaults(func=cmd_bifurcate)

    s = sub.add_parser("classify", parents=[common, cls], help="append classification fields")
    s.add_argument("--branch", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("choreo", parents=[common, cls], help="refine a point with given rotation angle")
    s.add_argument("--branch", required=True)
    s.add_argument("--target", required=True, help="angle such as 5pi/3")
    s.add_argument("--occurrence", type=int, default=0)
    s.set_defaults(func=cmd_choreo)

    s = sub.add_parser("verify", parents=[common, point], help="compare with the full problem")
    s.add_argument("--span", type=float, default=2.0, help="multiples of T")
    s.add_argument("--criterion", action="store_true", help="also run the non-choreography test")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("export", parents=[common, point], help="write a trajectory CSV")
    s.add_argument("--span", type=float, default=2.0, help="multiples of T")
    s.add_argument("--samples", type=int, default=0, help="uniform samples (default: step nodes)")
    s.add_argument("--full", action="store_true", help="embedded Cartesian bodies")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = RunConfig(args)
        args.func(cfg, args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, NoBracket, SeedRejected) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except HipHopError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
