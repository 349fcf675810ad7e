"""Command-line front end: ``spongedim <command> FILE [options]``.

Exit status: 0 success, 1 validation failure, 2 budget or convergence
failure (including a closed-form / variational disagreement), 64 usage.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import boxcount, hausdorff, moran, variational
from .model import BaranskiSpec, GLSpec, SelfSimilarSpec, SpecError, validate
from .specfile import load_spec, spec_to_dict

EXIT_INVALID = 1
EXIT_FAILURE = 2
EXIT_USAGE = 64
AGREEMENT_TOL = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _summary(spec) -> dict:
    if isinstance(spec, SelfSimilarSpec):
        return {"kind": spec.kind, "dimension": 1, "maps": len(spec.ratios)}
    if isinstance(spec, GLSpec):
        return {"kind": spec.kind, "dimension": spec.dimension, "maps": len(spec.maps)}
    return {"kind": spec.kind, "dimension": spec.dimension, "maps": len(spec.alphabet)}


def _blocks_top_first(P: variational.TypeProfile) -> list:
    return [[float(x) for x in b] for b in P.top_first()]


def _profile_dict(prof: moran.DimensionProfile) -> dict:
    out = {
        "values": list(prof.values),
        "permutation": list(prof.permutation),
        "box_dimension": prof.box_dimension,
        "packing_dimension": prof.packing_dimension,
    }
    if prof.per_permutation is not None:
        out["per_permutation"] = [
            {"sigma": list(s), "value": v} for s, v in sorted(prof.per_permutation.items())
        ]
    return out


class Failure(Exception):
    def __init__(self, code: int, message: str, results: dict | None = None):
        self.code = code
        self.results = results or {}
        super().__init__(message)


def cmd_validate(spec, args, warnings):
    report = validate(spec)
    results = {
        "valid": report.ok,
        "violations": [{"kind": v.kind, "indices": _jsonable(v.indices), "message": v.message}
                       for v in report.violations],
    }
    if not report.ok:
        raise Failure(EXIT_INVALID, "validation failed", results)
    return results


def _jsonable(x):
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _require_valid(spec):
    report = validate(spec)
    if not report.ok:
        raise Failure(EXIT_INVALID, "; ".join(v.message for v in report.violations))


def cmd_dim(spec, args, warnings):
    _require_valid(spec)
    prof = moran.dimension_profile(spec, check=False) if not isinstance(spec, BaranskiSpec) else \
        moran.baranski_dimension(spec, check=False, workers=args.threads)
    return {"profile": _profile_dict(prof)}


def cmd_variational(spec, args, warnings):
    _require_valid(spec)
    prof = moran.dimension_profile(spec, check=False) if not isinstance(spec, BaranskiSpec) else \
        moran.baranski_dimension(spec, check=False, workers=args.threads)
    sigma = prof.permutation if isinstance(spec, BaranskiSpec) else None
    opts = variational.OptimizeOptions(seed=args.seed, restarts=args.restarts, workers=args.threads)
    res = variational.maximize_objective(spec, opts, sigma=sigma, profile=prof)
    closed = variational.dominant_type(spec, prof, sigma=sigma)
    delta = abs(res.value - prof.box_dimension)
    results = {
        "value": res.value,
        "closed_form": prof.box_dimension,
        "agreement": delta,
        "profile_distance": res.profile.distance(closed),
        "dominant_type": _blocks_top_first(res.profile),
        "restart_spread": res.spread,
        "converged": res.converged,
    }
    if not res.converged:
        warnings.append("optimizer did not reach the stationarity tolerance")
    if delta > AGREEMENT_TOL:
        warnings.append(f"closed form and variational optimum disagree by {delta:.3g}")
        raise Failure(EXIT_FAILURE, "discrepancy between closed form and optimizer", results)
    return results


def cmd_count(spec, args, warnings):
    _require_valid(spec)
    rep = boxcount.count_cubes(spec, args.delta, types=args.types, budget=args.budget)
    out = rep.to_dict()
    if not args.per_sigma:
        out.pop("per_sigma")
    if rep.ties:
        warnings.append(f"{rep.ties} cubes have coinciding stopping levels")
    return out


def cmd_empirical(spec, args, warnings):
    _require_valid(spec)
    deltas = [d.strip() for d in args.deltas.split(",") if d.strip()]
    fit = boxcount.empirical_dimension(spec, deltas, budget=args.budget)
    return {
        "slope": fit.slope,
        "residual": fit.residual,
        "table": [{"delta": boxcount._render_delta(d), "count": str(n), "ratio": r} for d, n, r in fit.table],
    }


def cmd_hausdorff(spec, args, warnings):
    _require_valid(spec)
    if not isinstance(spec, GLSpec) or spec.dimension != 2:
        raise Failure(EXIT_USAGE, "hausdorff needs a planar Gatzouras-Lalley carpet")
    opts = variational.OptimizeOptions(seed=args.seed, restarts=args.restarts)
    res = hausdorff.hausdorff_dim_2d(spec, opts)
    fibre = hausdorff.uniform_fibre_check(spec)
    box = moran.gl_profile(spec, check=False).box_dimension
    if not res.converged:
        warnings.append("Hausdorff optimizer did not reach the stationarity tolerance")
    return {
        "hausdorff_dimension": res.value,
        "box_dimension": box,
        "uniform_fibre": fibre.is_uniform,
        "fibre_residuals": list(fibre.residuals),
        "maximizing_p": [float(x) for x in res.p],
    }


def cmd_report(spec, args, warnings):
    bundle = {"validate": cmd_validate(spec, args, warnings)}
    bundle["dim"] = cmd_dim(spec, args, warnings)
    try:
        bundle["variational"] = cmd_variational(spec, args, warnings)
    except Failure as exc:
        bundle["variational"] = exc.results
    if args.delta is not None:
        bundle["count"] = cmd_count(spec, args, warnings)
    if isinstance(spec, GLSpec) and spec.dimension == 2:
        bundle["hausdorff"] = cmd_hausdorff(spec, args, warnings)
    return bundle


COMMANDS = {
    "validate": cmd_validate,
    "dim": cmd_dim,
    "variational": cmd_variational,
    "count": cmd_count,
    "empirical": cmd_empirical,
    "hausdorff": cmd_hausdorff,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("file", help="sponge description (JSON)")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, default=0, help="seed for optimizer restarts")
    common.add_argument("--threads", type=int, default=1, help="worker cap")
    common.add_argument("--restarts", type=int, default=8)
    common.add_argument("--budget", type=int, default=None,
                        help="enumeration budget (default: $SPONGEDIM_BUDGET or 1e8)")

    parser = _Parser(prog="spongedim", description="Box dimension of self-similar sets and self-affine sponges.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate", parents=[common], help="check the structural conditions")
    sub.add_parser("dim", parents=[common], help="closed-form dimension profile")
    sub.add_parser("variational", parents=[common], help="numerical maximisation of the variational formula")
    p = sub.add_parser("count", parents=[common], help="exact approximate-cube count at one scale")
    p.add_argument("--delta", required=True)
    p.add_argument("--types", action="store_true", help="histogram by multidimensional type")
    p.add_argument("--per-sigma", action="store_true", help="counts per ordering class")
    p = sub.add_parser("empirical", parents=[common], help="slope of log N against -log delta")
    p.add_argument("--deltas", required=True, help="comma separated scales")
    sub.add_parser("hausdorff", parents=[common], help="planar Hausdorff dimension and uniform-fibre test")
    p = sub.add_parser("report", parents=[common], help="full bundle written to --out")
    p.add_argument("--out", required=True)
    p.add_argument("--delta", default=None)
    p.set_defaults(types=True, per_sigma=True)
    return parser


def _format_human(command: str, results: dict) -> str:
    lines = []
    if command == "dim" and "profile" in results:
        prof = results["profile"]
        lines.append("s = (" + ", ".join(f"{v:.10g}" for v in prof["values"]) + ")")
        if "per_permutation" in prof:
            for row in prof["per_permutation"]:
                lines.append(f"  sigma {tuple(row['sigma'])}: s_d = {row['value']:.10g}")
            lines.append(f"winning sigma = {tuple(prof['permutation'])}")
        lines.append(f"box dim = {prof['box_dimension']:.10g}")
        lines.append("packing dimension = box dimension")
    else:
        for k, v in results.items():
            if isinstance(v, float):
                lines.append(f"{k}: {v:.10g}")
            elif isinstance(v, (list, dict)) and len(json.dumps(v)) > 200:
                lines.append(f"{k}: ({len(v)} entries, use --json)")
            else:
                lines.append(f"{k}: {v}")
    return "\n".join(lines)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    warnings: list = []
    started = time.perf_counter()
    report = {"command": args.command, "file": args.file}
    code = 0
    try:
        spec = load_spec(args.file)
        report["spec"] = _summary(spec)
        results = COMMANDS[args.command](spec, args, warnings)
    except (SpecError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_INVALID if isinstance(exc, SpecError) else EXIT_USAGE
    except Failure as exc:
        results = exc.results
        code = exc.code
        print(f"error: {exc}", file=stderr)
    except boxcount.BudgetExceeded as exc:
        results = {"error": str(exc), "work": exc.work,
                   "partial_total": None if exc.partial_total is None else str(exc.partial_total)}
        code = EXIT_FAILURE
        print(f"error: {exc}", file=stderr)
    except moran.PermutationBudgetError as exc:
        results = {"error": str(exc)}
        code = EXIT_FAILURE
        print(f"error: {exc}", file=stderr)
    except ValueError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE

    report["results"] = results
    report["warnings"] = warnings
    report["timing"] = time.perf_counter() - started
    if args.command == "report":
        report["spec_document"] = spec_to_dict(spec)
        Path(args.out).write_text(json.dumps(report, indent=2), encoding="utf-8")
    if args.json:
        print(json.dumps(report, indent=2), file=stdout)
    else:
        print(_format_human(args.command, results), file=stdout)
        for w in warnings:
            print(f"warning: {w}", file=stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
