"""Command-line interface: ``stabpoly <command> [flags]``.

Commands: spectrum, optimize, sip, rectangle, sweep, verify, region.
Exit codes: 0 ok, 2 usage or input error, 3 solver failure, 4 partial sweep.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import optimizer, region, spectra
from .errors import SolverError, StabPolyError
from .leastdev import SolverOptions
from .polybasis import StabilityPolynomial

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_PARTIAL = 4

SCHEMA = 1

# how each sweep family is normalised in its table
SWEEP_SCALE = {"real": 2, "imaginary": 1, "disk": 0}


class UsageError(Exception):
    pass


# -- helpers -----------------------------------------------------------------


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _report(payload, started, out):
    """Write a JSON report; timing lives under ``log`` so the rest is reproducible."""
    payload = dict(payload, schema=SCHEMA)
    payload["log"] = {
        "elapsed_seconds": round(time.perf_counter() - started, 6),
        "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", out)


def _cplx(z):
    return [float(z.real), float(z.imag)]


def _add_spectrum_args(ap, required=True):
    g = ap.add_argument_group("spectrum")
    g.add_argument("--builtin", choices=sorted(spectra.BUILTINS), help="named spectrum")
    g.add_argument("--file", help="spectrum file (CSV re,im rows or JSON [[re,im],...])")
    g.add_argument("--spectrum-format", choices=("csv", "json"), help="override file format")
    g.add_argument("--n", type=int, help="number of points (real/imaginary/disk/gap/rectangle)")
    g.add_argument("--N", type=int, help="grid size for upwind")
    g.add_argument("--dx", type=float, help="grid spacing for upwind")
    g.add_argument("--alpha", type=float, help="gap distance")
    g.add_argument("--open-gap", action="store_true", help="gap: drop the segment [-i, i]")
    g.add_argument("--beta", type=float, help="rectangle half-height")
    g.add_argument("--kappa", type=float, help="rectangle depth")
    g.add_argument("--hull", action="store_true", help="replace the points by their convex hull")
    g.add_argument("--hull-points", type=int,
                   help="with --hull: sample about this many points along the hull perimeter")
    ap.set_defaults(_spectrum_required=required)


def _check_spectrum_args(args):
    if args.hull_points is not None and not args.hull:
        raise UsageError("--hull-points requires --hull")
    if args.builtin and args.file:
        raise UsageError("--builtin and --file are mutually exclusive")
    if not (args.builtin or args.file):
        if args._spectrum_required:
            raise UsageError("one of --builtin or --file is required")
        return
    if args.file:
        params = ("n", "N", "dx", "alpha", "beta", "kappa")
        given = [f"--{p}" for p in params if getattr(args, p) is not None]
        if given or args.open_gap:
            raise UsageError(f"{', '.join(given) or '--open-gap'} only apply to --builtin")
    elif args.spectrum_format:
        raise UsageError("--spectrum-format only applies to --file")


def _load_spectrum(args):
    if args.file:
        spec = spectra.load_spectrum(args.file, args.spectrum_format)
    else:
        params = {"n": args.n, "N": args.N, "dx": args.dx, "alpha": args.alpha,
                  "beta": args.beta, "kappa": args.kappa}
        if args.builtin == "gap" and args.open_gap:
            params["closed"] = False
        spec = spectra.builtin(args.builtin, **params)
    if args.hull_points is not None:
        spec = spectra.hull_boundary(spec, args.hull_points)
    elif args.hull:
        spec = spectra.convex_hull(spec)
    return spec


def _spectrum_info(spec):
    return {"meta": spec.meta, "points": int(len(spec.full_points())), "max_abs": spec.max_abs,
            "status": spec.status}


def _solver_opts(args):
    return SolverOptions(formulation=args.formulation)


def _add_solver_args(ap, basis=True):
    ap.add_argument("-s", "--stages", type=int, required=True)
    ap.add_argument("-p", "--order", type=int, required=True)
    if basis:
        ap.add_argument("--basis", default="auto", choices=sorted(optimizer.BASIS_ALIASES))
    ap.add_argument("--eps-bisect", type=float, help="bisection tolerance (default relative)")
    ap.add_argument("--formulation", default="socp", choices=("socp", "lp"))
    ap.add_argument("-o", "--out", help="output path (default stdout)")


def _history(rows):
    return [{"h": h, "r": r, "feasible": bool(ok)} for h, r, ok in rows]


def _load_polynomial(path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(data, dict) and "polynomial" in data:
        # accept a full optimize report as well
        data = data["polynomial"]
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected an object with s, p, coeffs")
    return StabilityPolynomial.from_dict(data)


# -- commands ------------------------------------------------------------------


def cmd_spectrum(args):
    _check_spectrum_args(args)
    spec = _load_spectrum(args)
    text = spectra.write_spectrum(spec, fmt=args.format)
    _emit(text, args.out)
    info = _spectrum_info(spec)
    print(f"{info['points']} points, max|lambda| = {info['max_abs']:.6g}"
          + ("" if spec.status == "ok" else f" ({spec.status})"), file=sys.stderr)
    return EXIT_OK


def cmd_optimize(args):
    _check_spectrum_args(args)
    started = time.perf_counter()
    spec = _load_spectrum(args)
    res = optimizer.optimize_h(spec, args.stages, args.order, basis_kind=args.basis,
                               eps_bisect=args.eps_bisect, eps_feas=args.eps_feas,
                               solver_opts=_solver_opts(args))
    s = args.stages
    _report({
        "command": "optimize",
        "spectrum": _spectrum_info(spec),
        "s": s, "p": args.order, "basis": res.basis_kind,
        "H": res.H, "H_over_s": res.H / s, "H_over_s2": res.H / s ** 2,
        "bracket": list(res.bracket),
        "eps_bisect": res.eps_bisect, "eps_feas": res.eps_feas,
        "r": res.solution.r,
        "polynomial": res.polynomial.to_dict(),
        "probes": _history(res.probes),
        "history": _history(res.history),
    }, started, args.out)
    return EXIT_OK


def cmd_sip(args):
    started = time.perf_counter()
    params = {}
    if args.family == "gap":
        params = {"alpha": 20.0 if args.alpha is None else args.alpha, "closed": not args.open_gap}
    elif args.family == "rectangle":
        if args.beta is None or args.kappa is None:
            raise UsageError("--beta and --kappa are required for the rectangle family")
        params = {"beta": args.beta, "kappa": args.kappa}
    fam = spectra.family(args.family, **params)
    res = optimizer.optimize_h_sip(fam, args.stages, args.order, basis_kind=args.basis,
                                   eps_bisect=args.eps_bisect, n0=args.n0, n_cap=args.n_cap,
                                   solver_opts=_solver_opts(args))
    s = args.stages
    log = [{k: (_cplx(v) if isinstance(v, complex) else v) for k, v in e.items()}
           for e in res.log]
    _report({
        "command": "sip", "family": args.family, "family_params": params,
        "s": s, "p": args.order, "basis": res.basis_kind,
        "H": res.H, "H_over_s": res.H / s, "H_over_s2": res.H / s ** 2,
        "certified": bool(res.certified), "n_final": res.n_final,
        "bracket": list(res.bracket), "eps_bisect": res.eps_bisect,
        "polynomial": res.polynomial.to_dict(),
        "probes": _history(res.probes),
        "history": _history(res.history),
        "steps": log,
    }, started, args.out)
    return EXIT_OK


def cmd_rectangle(args):
    started = time.perf_counter()
    res = optimizer.max_kappa(args.h, args.beta, args.stages, args.order,
                              eps_bisect=args.eps_bisect, eps_feas=args.eps_feas, n=args.n,
                              solver_opts=_solver_opts(args))
    _report({
        "command": "rectangle", "h": res.h, "beta": res.beta,
        "s": args.stages, "p": args.order, "n": args.n,
        "kappa": res.kappa, "bracket": list(res.bracket), "eps_bisect": res.eps_bisect,
        "polynomial": res.polynomial.to_dict(),
        "probes": [{"kappa": k, "r": r, "feasible": bool(ok)} for k, r, ok in res.probes],
        "history": [{"kappa": k, "r": r, "feasible": bool(ok)} for k, r, ok in res.history],
    }, started, args.out)
    return EXIT_OK


def _parse_int_list(text, flag):
    """``"1-10"``, ``"3,5,7"`` or a mix such as ``"1-4,8"``."""
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                a, b = part.split("-", 1)
                out.extend(range(int(a), int(b) + 1))
            elif part:
                out.append(int(part))
    except ValueError:
        raise UsageError(f"{flag}: cannot parse {text!r} as integers or ranges") from None
    if not out or min(out) < 1:
        raise UsageError(f"{flag}: need positive integers, got {text!r}")
    return sorted(set(out))


def _sweep_cell(job):
    name, n, s, p, basis, formulation = job
    try:
        spec = spectra.builtin(name, n=n)
        res = optimizer.optimize_h(spec, s, p, basis_kind=basis,
                                   solver_opts=SolverOptions(formulation=formulation))
        return s, p, res.H, None
    except StabPolyError as exc:
        return s, p, None, f"{type(exc).__name__}: {exc}"


def cmd_sweep(args):
    s_list = _parse_int_list(args.s, "--s")
    p_list = _parse_int_list(args.p, "--p")
    jobs = [(args.family, args.n, s, p, args.basis, args.formulation)
            for s in s_list for p in p_list if p <= s]
    workers = args.jobs or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]

    power = SWEEP_SCALE.get(args.family, 0)
    table = {(s, p): (H, err) for s, p, H, err in results}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s"] + p_list)
    failures = []
    for s in s_list:
        row = [s]
        for p in p_list:
            H, err = table.get((s, p), (None, None))
            if err is not None:
                failures.append({"s": s, "p": p, "error": err})
            row.append("" if H is None else f"{H / s ** power:.6f}")
        w.writerow(row)
    _emit(buf.getvalue(), args.out)
    for f in failures:
        print(f"sweep cell s={f['s']} p={f['p']} failed: {f['error']}", file=sys.stderr)
    if args.failure_log and failures:
        Path(args.failure_log).write_text(
            "".join(json.dumps(f, sort_keys=True) + "\n" for f in failures), encoding="utf-8")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_verify(args):
    _check_spectrum_args(args)
    started = time.perf_counter()
    poly = _load_polynomial(args.poly)
    spec = _load_spectrum(args)
    if args.h is None:
        raise UsageError("--h is required")
    if not (args.h >= 0 and math.isfinite(args.h)):
        raise UsageError(f"--h must be finite and >= 0, got {args.h}")
    ok, viol, worst = region.verify_feasible(poly, spec, args.h, args.tol)
    h_stable = region.max_stable_step(poly, spec)
    _report({
        "command": "verify", "spectrum": _spectrum_info(spec),
        "h": args.h, "tol": args.tol, "feasible": bool(ok),
        "max_violation": viol, "worst_point": _cplx(worst),
        "worst_scaled_point": _cplx(args.h * worst),
        "max_stable_step": h_stable if math.isfinite(h_stable) else None,
        "polynomial": poly.to_dict(),
    }, started, args.out)
    verdict = "feasible" if ok else f"infeasible: |R| - 1 = {viol:.3e} at lambda = {worst}"
    print(verdict, file=sys.stderr)
    return EXIT_OK


def cmd_region(args):
    started = time.perf_counter()
    poly = _load_polynomial(args.poly)
    grid = region.region_grid(poly, args.re, args.im, args.res[0], args.res[1])
    if args.contour:
        Path(args.contour).write_text(grid.contour_csv(), encoding="utf-8")
    payload = grid.to_dict()
    payload.update({"command": "region", "polynomial": poly.to_dict(),
                    "contour_segments": len(grid.contour)})
    _report(payload, started, args.out)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="stabpoly",
                                 description="Optimal stability polynomials for explicit integrators.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="generate or convert a spectrum")
    _add_spectrum_args(p)
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("optimize", help="bisection on h for a sampled spectrum")
    _add_spectrum_args(p)
    _add_solver_args(p)
    p.add_argument("--eps-feas", type=float, default=optimizer.EPS_FEAS)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sip", help="certified bisection on a continuous spectrum family")
    p.add_argument("--family", required=True,
                   choices=("real", "imaginary", "disk", "gap", "rectangle"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--open-gap", action="store_true")
    p.add_argument("--beta", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--n0", type=int, default=64, help="initial sample size")
    p.add_argument("--n-cap", type=int, default=optimizer.N_CAP, help="largest sample size")
    _add_solver_args(p)
    p.set_defaults(func=cmd_sip)

    p = sub.add_parser("rectangle", help="deepest stable rectangle at fixed h and beta")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n", type=int, default=4096)
    _add_solver_args(p, basis=False)
    p.add_argument("--eps-feas", type=float, default=optimizer.EPS_FEAS)
    p.set_defaults(func=cmd_rectangle)

    p = sub.add_parser("sweep", help="table of H over an (s, p) grid")
    p.add_argument("--family", required=True, choices=("real", "imaginary", "disk"))
    p.add_argument("--s", required=True, help="stage counts, e.g. 1-10 or 3,5,7")
    p.add_argument("--p", required=True, help="orders, e.g. 1,2")
    p.add_argument("--n", type=int, help="sample size (family default if omitted)")
    p.add_argument("--basis", default="auto", choices=sorted(optimizer.BASIS_ALIASES))
    p.add_argument("--formulation", default="socp", choices=("socp", "lp"))
    p.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
    p.add_argument("--failure-log", help="JSON-lines file for failed cells")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check a polynomial against a spectrum at step h")
    p.add_argument("--poly", required=True, help="polynomial JSON {s, p, coeffs}")
    _add_spectrum_args(p)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("region", help="export |R| on a grid and the |R| = 1 contour")
    p.add_argument("--poly", required=True)
    p.add_argument("--re", type=float, nargs=2, required=True, metavar=("MIN", "MAX"))
    p.add_argument("--im", type=float, nargs=2, required=True, metavar=("MIN", "MAX"))
    p.add_argument("--res", type=int, nargs=2, default=(201, 201), metavar=("NX", "NY"))
    p.add_argument("--contour", help="write contour segments as CSV here")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_region)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        ap.error(str(exc))  # exits with 2
    except SolverError as exc:
        print(f"stabpoly: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except StabPolyError as exc:
        print(f"stabpoly: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"stabpoly: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
