"""Command-line interface: ``rough-acs {gen,check,solve,verify,norms,oracle-beltrami}``.

Exit codes: 0 success, 2 validation failure, 3 solver non-convergence,
4 verification threshold exceeded.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import acsf
from .dbar import DbarConfig, compare_charts, cr_residual, solve_beltrami
from .errors import FormatError, NoConvergence, RoughACSError, SingularFactor
from .grid import Field, MapField, make_grid, set_threads
from .malgrange import ContinuationConfig
from .pipeline import HOLOMORPHY_TOL, build_chart
from .spaces import (
    bmo_norm,
    lipschitz_seminorm,
    regularity_profile,
    sobolev_norm,
    sup_norm,
    zygmund_norm,
)
from .structures import (
    KINDS,
    BeltramiMatrix,
    StructureField,
    beltrami_from_structure,
    cutoff_periodize,
    gen_structure,
    integrability_residual,
    inner_region,
    nijenhuis_coordinate_sup,
    structure_from_beltrami,
)

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4


class Invalid(Exception):
    """Validation failure detected by the CLI itself."""


# --------------------------------------------------------------------------
# helpers


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _emit(report: dict, path):
    text = acsf.dumps(report)
    if path:
        acsf.atomic_write(path, text)
    else:
        sys.stdout.write(text)


def _distinct(*paths):
    seen = set()
    for p in paths:
        if p is None:
            continue
        a = os.path.abspath(p)
        if a in seen:
            raise Invalid(f"path {p} is used twice")
        seen.add(a)


def _check_cutoff_args(args):
    if not 0 < args.radius <= 0.45:
        raise Invalid("--radius must lie in (0, 0.45]")
    if args.mollify is not None and not args.mollify > 0:
        raise Invalid("--mollify must be positive")


def _read_beltrami(path) -> tuple:
    obj, side = acsf.read(path)
    if isinstance(obj, BeltramiMatrix):
        return obj, side
    if isinstance(obj, StructureField):
        return beltrami_from_structure(obj), side
    if isinstance(obj, Field) and obj.ncomp == obj.grid.n ** 2:
        return BeltramiMatrix.from_field(obj), side
    raise FormatError(f"{path} does not hold Beltrami data or a structure")


def _truth_path(out):
    root, ext = os.path.splitext(out)
    return f"{root}_Ftrue{ext or '.acsf'}"


def _solver_error(exc) -> dict:
    return {"type": type(exc).__name__, "message": str(exc), "stage": getattr(exc, "stage", None)}


# --------------------------------------------------------------------------
# commands


def cmd_gen(args):
    if args.out is None:
        raise Invalid("gen needs --out")
    if args.kind is None:
        raise Invalid(f"gen needs --kind, one of {', '.join(KINDS)}")
    g = make_grid(args.n, args.N)
    params = {}
    if args.amp is not None:
        params["amp"] = args.amp
    if args.r is not None:
        params["r"] = args.r
    gs = gen_structure(args.kind, g, params, args.seed)
    truth = _truth_path(args.out) if gs.F_true is not None else None
    _distinct(args.out, truth, args.report)
    meta = gs.metadata()
    meta["grid"] = {"n": g.n, "N": g.N, "L": g.L}
    if truth:
        meta["ground_truth_path"] = os.path.basename(truth)
    acsf.write(args.out, gs.A, meta)
    if truth:
        acsf.write(truth, gs.F_true, {"role": "ground truth chart", "kind": args.kind, "seed": int(args.seed)})
    report = {"config": _config(args), "metadata": meta, "A_sup": gs.A.sup_norm(), "outputs": [p for p in (args.out, truth) if p]}
    if args.report:
        _emit(report, args.report)
    return EXIT_OK


def cmd_check(args):
    _distinct(args.input, args.report)
    A, side = _read_beltrami(args.input)
    g = A.grid
    r = 0.5 if args.r is None else args.r
    s = 1.0 if args.s is None else args.s
    p = 2.0 if args.p is None else args.p
    ir = integrability_residual(A, r, s, p)
    report = {"config": _config(args), "input_meta": side.get("meta", {}), "grid": {"n": g.n, "N": g.N, "L": g.L}}
    report["integrability"] = ir.to_dict()
    if A.sup_norm() < 1.0:
        report["nijenhuis_sup"] = nijenhuis_coordinate_sup(structure_from_beltrami(A))
    else:
        report["nijenhuis_sup"] = None
        report["nijenhuis_note"] = "||A|| >= 1: no structure to form"
    entries = {}
    for j in range(g.n):
        for k in range(g.n):
            u = A.entry(j, k)
            e = {
                "sup": sup_norm(u).value,
                "zygmund": zygmund_norm(u, r).to_dict(),
                "sobolev": sobolev_norm(u, s, p).to_dict(),
                "bmo": bmo_norm(u).value,
            }
            try:
                e["regularity"] = regularity_profile(u).to_dict()
            except RoughACSError as exc:
                e["regularity"] = {"error": str(exc)}
            entries[f"{j},{k}"] = e
    report["entries"] = entries
    report["A_sup"] = A.sup_norm()
    report["threshold"] = args.threshold
    report["integrable"] = bool(ir.sup <= args.threshold)
    report["hypothesis"] = _hypothesis(r, s, p, g.n)
    _emit(report, args.report)
    return EXIT_OK


def _cont_config(args):
    kw = {"homotopy_kind": args.homotopy}
    if args.steps is not None:
        kw["t_steps"] = args.steps
    if args.newton_tol is not None:
        kw["newton_tol"] = args.newton_tol
    return ContinuationConfig(**kw)


def cmd_solve(args):
    if args.out is None:
        raise Invalid("solve needs --out (an output directory)")
    _check_cutoff_args(args)
    cfg = _cont_config(args)
    names = {k: os.path.join(args.out, f"{k}.acsf") for k in ("H", "B", "G", "F")}
    _distinct(args.input, args.report, *names.values())
    A, side = _read_beltrami(args.input)
    report = {"config": _config(args), "continuation_config": cfg.to_dict(), "input_meta": side.get("meta", {})}
    try:
        res = build_chart(
            A, cfg, DbarConfig(), cutoff=not args.no_cutoff, radius=args.radius, mollify=args.mollify,
            r=args.r, s=args.s, p=args.p, tol=args.threshold,
        )
    except (NoConvergence, SingularFactor) as exc:
        partial = getattr(exc, "partial", None)
        if partial is not None:
            report.update(partial.report)
        report["error"] = _solver_error(exc)
        trace = getattr(exc, "trace", None)
        if trace is not None:
            report["trace"] = trace.to_dict()
        _emit(report, args.report)
        print(f"solver failed in stage {report['error']['stage']}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    report.update(res.report)
    for k in names:
        acsf.write(names[k], getattr(res, k), {"role": k, "source": os.path.basename(args.input)})
    report["outputs"] = names
    _emit(report, args.report)
    return EXIT_OK


def cmd_verify(args):
    _distinct(args.coords, args.structure, args.truth, args.report)
    F, _ = acsf.read(args.coords)
    if not isinstance(F, MapField):
        raise FormatError(f"{args.coords} does not hold a map")
    A, _ = _read_beltrami(args.structure)
    region = inner_region(A.grid, args.radius) if args.region else None
    cr = cr_residual(F, A, region=region)
    report = {"config": _config(args), "cr_residual": cr.to_dict(), "threshold": args.threshold}
    ok = cr.relative_sup <= args.threshold
    if args.truth:
        T, _ = acsf.read(args.truth)
        if not isinstance(T, MapField):
            raise FormatError(f"{args.truth} does not hold a map")
        cc = compare_charts(T, F, region)
        report["compare_charts"] = cc.to_dict()
        ok = ok and cc.ratio <= args.threshold
    report["passed"] = bool(ok)
    _emit(report, args.report)
    return EXIT_OK if ok else EXIT_VERIFY


def _hypothesis(r, s, p, n):
    m = 2 * n
    out = {"r": r, "s": s, "p": p, "m": m, "sp": s * p}
    out["sp_ge_m"] = bool(s * p >= m)
    out["sp_gt_2n"] = bool(s * p > 2 * n)
    if r is not None:
        out["r_plus_s_gt_1"] = bool(r + s > 1)
    return out


def _check_line(chk, r, n):
    line = (
        f"s={chk['s']:g} p={chk['p']:g}: sp = {chk['sp']:g} "
        f"{'>=' if chk['sp_ge_m'] else '<'} m = {chk['m']} (product lemma: {'ok' if chk['sp_ge_m'] else 'fails'}); "
        f"sp {'>' if chk['sp_gt_2n'] else '<='} 2n = {2 * n} (hypothesis: {'ok' if chk['sp_gt_2n'] else 'fails'})"
    )
    if r is not None:
        line += f"; r + s = {r + chk['s']:g} ({'ok' if chk['r_plus_s_gt_1'] else 'fails'})"
    return line


def _parse_space(spec):
    parts = spec.split(":")
    name = parts[0].lower()
    try:
        nums = [float(x) for x in parts[1:]]
    except ValueError as exc:
        raise Invalid(f"bad number in norm {spec!r}") from exc
    need = {"zygmund": 1, "sobolev": 2, "bmo": 0, "lipschitz": 0, "sup": 0, "profile": 0}
    if name not in need:
        raise Invalid(f"unknown space {name!r}; use zygmund:r, sobolev:s:p, bmo, lipschitz, sup, profile")
    if len(nums) != need[name]:
        raise Invalid(f"space {name} takes {need[name]} numbers, got {len(nums)}")
    if name == "sobolev" and not nums[1] > 1:
        raise Invalid("sobolev exponent p must exceed 1")
    return name, nums


def cmd_norms(args):
    specs = [_parse_space(s) for s in (args.spaces or ["sup"])]
    obj, _ = acsf.read(args.input)
    g = obj.grid
    if isinstance(obj, MapField):
        u = obj.displacement
    elif isinstance(obj, BeltramiMatrix):
        u = obj.as_field()
    elif isinstance(obj, StructureField):
        u = Field(g, np.moveaxis(obj.J.reshape(g.shape + (-1,)), -1, 0).astype(complex))
    else:
        u = obj
    results = []
    checks = []
    lines = []
    for name, nums in specs:
        chk = None
        if name == "zygmund":
            rep = zygmund_norm(u, nums[0]).to_dict()
        elif name == "sobolev":
            rep = sobolev_norm(u, nums[0], nums[1]).to_dict()
            chk = _hypothesis(args.r, nums[0], nums[1], g.n)
        elif name == "bmo":
            rep = bmo_norm(u).to_dict()
        elif name == "lipschitz":
            rep = lipschitz_seminorm(u).to_dict()
        elif name == "sup":
            rep = sup_norm(u).to_dict()
        else:
            try:
                rep = {"space": "profile", **regularity_profile(u).to_dict()}
            except RoughACSError as exc:
                rep = {"space": "profile", "error": str(exc)}
        results.append(rep)
        if "value" in rep:
            lines.append(f"{rep['space']} {rep['params']}: {rep['value']:.6g}")
        elif "exponent" in rep:
            lines.append(f"profile: exponent {rep['exponent']:.4g}")
        if chk is not None:
            checks.append(chk)
            lines.append(_check_line(chk, args.r, g.n))
    if args.s is not None and args.p is not None and not any(c["s"] == args.s and c["p"] == args.p for c in checks):
        chk = _hypothesis(args.r, args.s, args.p, g.n)
        checks.append(chk)
        lines.append(_check_line(chk, args.r, g.n))
    report = {"config": _config(args), "norms": results, "hypothesis_checks": checks}
    if args.report:
        _distinct(args.input, args.report)
        _emit(report, args.report)
    for ln in lines:
        print(ln)
    if not args.report:
        _emit(report, None)
    return EXIT_OK


def cmd_oracle(args):
    _check_cutoff_args(args)
    if args.out is None:
        raise Invalid("oracle-beltrami needs --out")
    _distinct(args.input, args.out, args.report)
    A, _ = _read_beltrami(args.input)
    if A.grid.n != 1:
        raise Invalid("oracle-beltrami needs n = 1")
    if not args.no_cutoff:
        A = cutoff_periodize(A, args.radius, args.mollify)
    report = {"config": _config(args), "mu_sup": A.sup_norm()}
    try:
        sol = solve_beltrami(A.entry(0, 0))
    except NoConvergence as exc:
        report["error"] = _solver_error(exc)
        _emit(report, args.report)
        print(f"oracle failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    acsf.write(args.out, sol.f, {"role": "Beltrami oracle chart", "source": os.path.basename(args.input)})
    report["neumann"] = sol.to_dict()
    report["cr_residual"] = cr_residual(sol.f, A).to_dict()
    _emit(report, args.report)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _positive_int(x):
    v = int(x)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(x):
    v = float(x)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError("must be a positive number")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rough-acs", description="Integrability checks and holomorphic charts for rough almost complex structures.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=1, help="FFT worker threads")
    common.add_argument("--report", help="JSON report path (default: stdout)")
    rsp = argparse.ArgumentParser(add_help=False)
    rsp.add_argument("--r", type=float, help="Zygmund exponent r")
    rsp.add_argument("--s", type=float, help="Sobolev exponent s")
    rsp.add_argument("--p", type=float, help="Sobolev integrability p")
    cut = argparse.ArgumentParser(add_help=False)
    cut.add_argument("--radius", type=float, default=0.4, help="cutoff radius as a fraction of the box (0, 0.45]")
    cut.add_argument("--mollify", type=_positive_float, help="band-limit scale of the optional mollifier")
    cut.add_argument("--no-cutoff", action="store_true", help="use the data as given (periodic)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate test Beltrami data")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--r", type=float)
    p.add_argument("--amp", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("check", parents=[common, rsp], help="integrability and norms of Beltrami data")
    p.add_argument("input")
    p.add_argument("--threshold", type=_positive_float, default=HOLOMORPHY_TOL, help="sup residual below which A counts as integrable")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve", parents=[common, rsp, cut], help="construct a holomorphic chart F = G o H")
    p.add_argument("input")
    p.add_argument("--steps", type=_positive_int)
    p.add_argument("--newton-tol", type=_positive_float)
    p.add_argument("--homotopy", choices=("dilate", "scale"), default="dilate")
    p.add_argument("--threshold", type=_positive_float, default=HOLOMORPHY_TOL, help="holomorphy flag threshold")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", parents=[common], help="check a chart against Beltrami data")
    p.add_argument("coords")
    p.add_argument("structure")
    p.add_argument("--truth")
    p.add_argument("--threshold", type=_positive_float, default=1e-6, help="max relative residual / chart ratio")
    p.add_argument("--region", action="store_true", help="restrict to the cutoff region")
    p.add_argument("--radius", type=float, default=0.4)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("norms", parents=[common, rsp], help="function-space norms of a stored field")
    p.add_argument("input")
    p.add_argument("spaces", nargs="*", help="zygmund:r  sobolev:s:p  bmo  lipschitz  sup  profile")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("oracle-beltrami", parents=[common, cut], help="n = 1 Neumann-series Beltrami chart")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    set_threads(args.threads)
    try:
        return args.func(args)
    except Invalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NoConvergence, SingularFactor) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RoughACSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
