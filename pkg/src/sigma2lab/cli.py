"""Command-line front end: ``sigma2lab <subcommand> [options]``.

Exit codes: 0 success, 1 a verification check failed, 2 usage error.
Artifacts go to --out, else $SYL_OUT_DIR, else ./sigma2lab_out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .errors import Sigma2LabError
from .geometry import ModelDims
from .gluing import assemble_glued, cone_scan, cutoff_profile, residual_scan
from .indicial import indicial_spectrum, spectrum_report, spectrum_to_json
from .linearization import limit_coeffs, linearized_coeffs
from .modes import estimate_experiment, mode_half_gap
from .radial import profile_diagnostics, solve_fast_decay
from .report import DEFAULT_TOLERANCES, RunConfig, constants_summary, to_jsonable, verify_suite, write_csv, write_json

SUBCOMMANDS = ("constants", "radial", "indicial", "linearize", "modes", "glue", "verify")


class UsageError(Exception):
    pass


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from error


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sigma2lab",
        description="Numerical experiments for sigma_2 metrics singular along a p-dimensional subspace.",
        epilog="Tolerances are overridden with --tol.<name> VALUE; names: " + ", ".join(sorted(DEFAULT_TOLERANCES)),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, required=True, help="ambient dimension (integer >= 5)")
    common.add_argument("--p", type=int, required=True, help="dimension of the singular set (positive integer below P_2(n))")
    common.add_argument("--k", type=int, default=2, help="curvature order (default: 2)")
    common.add_argument("--eps", type=_float_list, default=(0.1, 0.05, 0.025), help="comma-separated scales (default: 0.1,0.05,0.025)")
    common.add_argument("--max-level", type=int, default=50, help="highest spherical level (default: 50)")
    common.add_argument("--delta", type=float, default=None, help="weight exponent for the mode experiments (default: 0.5 delta_1)")
    common.add_argument("--tau0", type=_float_list, default=(-5.0, 0.0, 5.0, 10.0), help="comma-separated starting points (default: -5,0,5,10)")
    common.add_argument("--seed", type=int, default=20240917, help="ensemble seed (default: 20240917)")
    common.add_argument("--ensemble", type=int, default=64, help="ensemble size (default: 64)")
    common.add_argument("--level", type=int, default=1, help="mode level for the estimate experiment (default: 1)")
    common.add_argument("--out", default=None, help="output directory (default: $SYL_OUT_DIR or ./sigma2lab_out)")
    common.add_argument("--format", choices=("csv", "json"), default="json", help="format of tabular artifacts (default: json)")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    helps = {
        "constants": "exact and closed-form constants",
        "radial": "fast-decay radial profile and diagnostics",
        "indicial": "indicial roots for levels 0..max-level",
        "linearize": "coefficients of the linearized operator along the profile",
        "modes": "weighted-estimate ratio table",
        "glue": "cutoff and glued approximate solution per epsilon",
        "verify": "full verification report",
    }
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
    return parser


def _parse_tolerances(extra: Sequence[str]) -> dict:
    out = {}
    items = list(extra)
    while items:
        key = items.pop(0)
        if not key.startswith("--tol."):
            raise UsageError(f"unrecognized argument {key}")
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            if not items:
                raise UsageError(f"missing value for {key}")
            value = items.pop(0)
        name = key[len("--tol."):]
        if name not in DEFAULT_TOLERANCES:
            raise UsageError(f"unknown tolerance {name!r}")
        try:
            out[name] = float(value)
        except ValueError as error:
            raise UsageError(f"tolerance {name} needs a number, got {value!r}") from error
    return out


def _config(args, tolerances) -> RunConfig:
    out = args.out or os.environ.get("SYL_OUT_DIR") or "sigma2lab_out"
    if any(e <= 0 for e in args.eps):
        raise UsageError("--eps values must be positive")
    if args.ensemble < 1 or args.max_level < 0:
        raise UsageError("--ensemble must be positive and --max-level nonnegative")
    return RunConfig(
        args.n, args.p, args.k, tuple(args.eps), args.max_level, args.delta, tuple(args.tau0), args.seed,
        args.ensemble, tolerances, out, args.format,
    )


def _stem(config: RunConfig, name: str) -> Path:
    return Path(config.out_dir) / f"{name}_n{config.n}_p{config.p}_k{config.k}"


def _table(config: RunConfig, name: str, header, rows) -> Path:
    stem = _stem(config, name)
    if config.format == "csv":
        return write_csv(stem.with_suffix(".csv"), header, rows)
    return write_json(stem.with_suffix(".json"), [dict(zip(header, row)) for row in rows])


def _run_constants(config, dims):
    summary = constants_summary(dims)
    if config.format == "csv":
        rows = [(key, json.dumps(to_jsonable(value))) for key, value in summary.items()]
        path = write_csv(_stem(config, "constants").with_suffix(".csv"), ("name", "value"), rows)
    else:
        path = write_json(_stem(config, "constants").with_suffix(".json"), summary)
    print(json.dumps(to_jsonable(summary), indent=2))
    return 0, [path]


def _run_radial(config, dims):
    profile = solve_fast_decay(dims)
    s1, s2 = profile.sigmas()
    rows = zip(profile.t, profile.v, profile.vdot, profile.vddot, s1, s2)
    table = _table(config, "radial", ("t", "v", "vdot", "vddot", "sigma1", "sigma2"), rows)
    diag = profile_diagnostics(profile)
    summary = write_json(_stem(config, "radial_diagnostics").with_suffix(".json"), diag)
    print(json.dumps(to_jsonable(diag), indent=2))
    return 0, [table, summary]


def _run_indicial(config, dims):
    spectrum = indicial_spectrum(dims, config.max_level)
    payload = spectrum_to_json(spectrum)
    checks = spectrum_report(dims, config.max_level)
    payload["checks"] = [{"name": c.name, "status": c.status, "measured": to_jsonable(c.measured)} for c in checks]
    path = write_json(_stem(config, "indicial").with_suffix(".json"), payload)
    if config.format == "csv":
        rows = []
        for item in spectrum.levels:
            rows.append((item.level, item.lam, item.mult,
                         item.gamma.minus.real, item.gamma.minus.imag, item.gamma.plus.real, item.gamma.plus.imag,
                         item.theta.minus.real, item.theta.plus.real, item.delta.minus.real, item.delta.plus.real))
        header = ("level", "lambda", "mult", "gamma_minus_re", "gamma_minus_im", "gamma_plus_re", "gamma_plus_im",
                  "theta_minus", "theta_plus", "delta_minus_re", "delta_plus_re")
        extra = write_csv(_stem(config, "indicial").with_suffix(".csv"), header, rows)
        path = [path, extra]
    first = spectrum.levels[min(1, config.max_level)]
    print(json.dumps({"level": first.level, "gamma": first.gamma.as_list(), "gammaExact": [str(x) for x in first.gamma.exact]}))
    failed = any(c.status == "fail" for c in checks)
    return (1 if failed else 0), path if isinstance(path, list) else [path]


def _run_linearize(config, dims):
    profile = solve_fast_decay(dims)
    coeffs = linearized_coeffs(profile)
    rows = zip(profile.t, *coeffs.a)
    table = _table(config, "linearize", ("t", "a0", "a1", "a2", "a3", "a4"), rows)
    plus = limit_coeffs(dims, "plus")
    minus = limit_coeffs(dims, "minus")
    limits = {"origin": list(plus.coeffs), "origin_b0_tilde": plus.b0_tilde, "infinity": list(minus.coeffs)}
    path = write_json(_stem(config, "limit_coefficients").with_suffix(".json"), limits)
    print(json.dumps(to_jsonable(limits), indent=2))
    return 0, [table, path]


def _run_modes(config, dims, level=1):
    delta_j = mode_half_gap(dims, level)
    weight = 0.5 * delta_j if config.weight_delta is None else config.weight_delta
    rows = estimate_experiment(dims, level, weight, config.tau0_list, config.ensemble, config.seed)
    header = ("tau0", "delta", "level", "max_ratio", "ensemble_size", "seed")
    table = _table(config, "modes", header, [(r.tau0, r.delta, r.level, r.max_ratio, r.ensemble_size, r.seed) for r in rows])
    for r in rows:
        print(f"tau0={r.tau0:g} delta={r.delta:.6g} level={r.level} max_ratio={r.max_ratio!r}")
    return 0, [table]


def _run_glue(config, dims):
    profile = solve_fast_decay(dims)
    cutoff = cutoff_profile(dims)
    scan = cone_scan(cutoff, dims, strict=False)
    paths = []
    summary = {
        "alpha2": cutoff.alpha2, "delta_c": cutoff.delta_c, "r0": cutoff.r0, "r1": cutoff.r1, "r2": cutoff.r2,
        "ode_identity": scan.identity_residual, "j_cone_ok": scan.ok, "largest_admissible_phi": scan.critical_phi,
        "epsilons": {},
    }
    for eps in config.eps_list:
        glued = assemble_glued(dims, eps, profile, cutoff)
        regions, relative = residual_scan(glued)
        rows = zip(glued.r, glued.u, glued.region, glued.sigma1, glued.sigma2, relative)
        stem = f"glue_eps{eps!r}"
        paths.append(_table(config, stem, ("r", "u_bar", "region", "sigma1", "sigma2", "residual"), rows))
        summary["epsilons"][repr(eps)] = {
            "m": glued.m, "rho": glued.rho, "rho1": glued.rho1, "positive": glued.positive,
            "in_cone": glued.in_cone, "cone_margins": glued.cone_margins,
            "residuals": {row.region: {"sup": row.sup_residual, "sup_relative": row.sup_relative} for row in regions},
        }
    paths.append(write_json(_stem(config, "glue_summary").with_suffix(".json"), summary))
    print(json.dumps(to_jsonable(summary), indent=2))
    return 0, paths


def _run_verify(config, dims):
    report = verify_suite(config, progress=lambda stage: print(f"... {stage}", file=sys.stderr))
    path = write_json(_stem(config, "verify").with_suffix(".json"), report.to_dict())
    print(report.table())
    return (0 if report.passed else 1), [path]


RUNNERS = {
    "constants": _run_constants,
    "radial": _run_radial,
    "indicial": _run_indicial,
    "linearize": _run_linearize,
    "modes": _run_modes,
    "glue": _run_glue,
    "verify": _run_verify,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("sigma2lab: error: a subcommand is required", file=sys.stderr)
        return 2
    try:
        tolerances = _parse_tolerances(extra)
        config = _config(args, tolerances)
        dims = ModelDims(config.n, config.p, config.k)
    except (UsageError, ValueError) as error:
        print(f"sigma2lab: error: {error}", file=sys.stderr)
        return 2
    try:
        if args.command == "modes":
            code, paths = _run_modes(config, dims, args.level)
        else:
            code, paths = RUNNERS[args.command](config, dims)
    except Sigma2LabError as error:
        print(f"sigma2lab: {type(error).__name__}: {error}", file=sys.stderr)
        return 1
    for path in paths:
        print(f"wrote {path}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
