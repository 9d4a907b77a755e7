"""Run configuration, cross-module verification suite and artifact writers."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .bessel import wronskian_defect
from .geometry import (
    DiagonalTensor,
    ModelDims,
    critical_dimension_P,
    critical_dimension_bisect,
    elementary_symmetric,
    expand_blocks,
    product_tensor,
    radial_b_tensor,
)
from .gluing import assemble_glued, cone_scan, cutoff_profile, j_matrix_eigenvalues, splice_decay
from .indicial import Check, indicial_spectrum, spectrum_report
from .linearization import (
    kernel_residual_ratios,
    kernel_tail_slopes,
    limit_coeffs,
    linearized_coeffs,
    printed_minus_coeffs,
    printed_plus_coeffs,
)
from .modes import (
    BumpForcing,
    ModeProblem,
    estimate_experiment,
    kv_weighted_monotonicity,
    mode_green_solve,
    mode_half_gap,
    random_forcing,
    relative_residual,
    solution_operator_norm,
)
from .radial import exponential_ansatz_roots, phase_jacobian, profile_diagnostics, solve_fast_decay

__all__ = [
    "DEFAULT_TOLERANCES",
    "RunConfig",
    "VerifyReport",
    "verify_suite",
    "constants_summary",
    "format_float",
    "to_jsonable",
    "write_csv",
    "write_json",
]

DEFAULT_TOLERANCES = {
    "v_inf": 1e-6,
    "alpha0_fit": 0.01,
    "ode_residual": 1e-9,
    "phase_jacobian": 1e-8,
    "root_residual": 1e-12,
    "richardson": 0.2,
    "tail_slope": 0.02,
    "wronskian": 1e-8,
    "green_residual": 1e-8,
    "bound_slack": 0.1,
    "spread": 2.0,
    "identity": 1e-12,
    "exact": 1e-12,
}


@dataclass
class RunConfig:
    n: int
    p: int
    k: int = 2
    eps_list: tuple = (0.1, 0.05, 0.025)
    max_level: int = 50
    weight_delta: Optional[float] = None
    tau0_list: tuple = (-5.0, 0.0, 5.0, 10.0)
    seed: int = 20240917
    ensemble: int = 64
    tolerances: dict = field(default_factory=dict)
    out_dir: Optional[str] = None
    format: str = "json"

    @property
    def dims(self) -> ModelDims:
        return ModelDims(self.n, self.p, self.k)

    def tol(self, name: str) -> float:
        return float(self.tolerances.get(name, DEFAULT_TOLERANCES[name]))


@dataclass
class VerifyReport:
    dims: ModelDims
    checks: list
    runtime: float = 0.0

    @property
    def failures(self) -> list:
        return [check for check in self.checks if check.status == "fail"]

    @property
    def flagged(self) -> list:
        return [check for check in self.checks if check.status == "flagged"]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "n": self.dims.n,
            "p": self.dims.p,
            "k": self.dims.k,
            "passed": self.passed,
            "runtime_seconds": round(self.runtime, 3),
            "checks": [
                {
                    "name": c.name,
                    "anchor": c.anchor,
                    "status": c.status,
                    "measured": to_jsonable(c.measured),
                    "expected": to_jsonable(c.expected),
                    "tolerance": c.tolerance,
                    "note": c.note,
                }
                for c in self.checks
            ],
        }

    def table(self) -> str:
        lines = []
        for c in self.checks:
            measured = c.measured if isinstance(c.measured, str) else json.dumps(to_jsonable(c.measured))
            if len(measured) > 70:
                measured = measured[:67] + "..."
            lines.append(f"[{c.status.upper():7s}] {c.name}: {measured}")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'} ({len(self.failures)} failed, {len(self.flagged)} flagged)")
        return "\n".join(lines)


def format_float(value: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(value))


def to_jsonable(value):
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else str(value.numerator)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        return [to_jsonable(x) for x in value.tolist()]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(x) for x in value]
    return value


def write_json(path: Path, payload) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(payload), indent=2, sort_keys=False) + "\n")
    return path


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(x) if isinstance(x, (float, np.floating)) else x for x in row])
    path.write_text(buffer.getvalue())
    return path


def constants_summary(dims: ModelDims) -> dict:
    """Exact and closed-form constants of the model, with the convention notes."""
    lo, hi = dims.alpha0_pair
    printed_c = math.comb(dims.n, 4) * dims.gauge**dims.k
    return {
        "n": dims.n,
        "p": dims.p,
        "k": dims.k,
        "N": dims.N,
        "q": dims.q,
        "c_npk": dims.c_product,
        "P2": critical_dimension_P(dims.n, 2),
        "P3": critical_dimension_P(dims.n, 3) if dims.n > 6 else None,
        "c": dims.c,
        "c_float": float(dims.c),
        "v_inf": dims.v_inf,
        "v_inf_power": Fraction(dims.c_product, math.comb(dims.n, dims.k)),
        "alpha0_minus": lo,
        "alpha0_plus": hi,
        "alpha1": dims.alpha1,
        "alpha2": dims.alpha2,
        "flags": {
            "c_constant": f"adopted C(n,k)((n-2k)/(4k))^k = {dims.c}; the variant with C(n,4) gives {printed_c}",
            "chi_inf_convention": "level-0 roots at infinity: only the alpha0^- branch is indicial",
        },
    }


def _check(checks, name, anchor, ok, measured, expected=None, tolerance=None, note=""):
    checks.append(Check(name, anchor, "pass" if ok else "fail", measured, expected, tolerance, note))


def _constant_checks(dims: ModelDims, config: RunConfig, checks: list):
    brute = elementary_symmetric(DiagonalTensor(((1, dims.N - 1), (-1, dims.p + 1))), dims.k)
    _check(checks, "c_npk equals brute-force sigma_k of the +-1 tensor", "product metric constant",
           brute == dims.c_product, dims.c_product, brute)
    half = elementary_symmetric(product_tensor(dims.n, dims.p), dims.k) * 2**dims.k
    _check(checks, "c_npk equals 2^k sigma_k of the product tensor", "product metric constant",
           half == dims.c_product, dims.c_product, half)
    closed = critical_dimension_P(dims.n, 2)
    scanned = critical_dimension_bisect(dims.n, 2)
    _check(checks, "critical codimension closed form vs bisection", "critical dimension bound",
           abs(closed - scanned) < 1e-10, closed, scanned, 1e-10)
    # independent equilibrium: sigma_k(B(v, 0, 0)) = c v^q
    v = dims.v_inf
    tensor = radial_b_tensor(v, 0.0, 0.0, dims)
    defect = abs(elementary_symmetric(tensor, dims.k) - float(dims.c) * v ** float(dims.q))
    _check(checks, "v_inf solves the equilibrium equation", "cylinder solution", defect < 1e-12 * max(1.0, v**4),
           defect, 0.0, 1e-12)
    roots = exponential_ansatz_roots(dims)
    lo, hi = dims.alpha0_pair
    gap = min(abs(r - lo) for r in roots) if roots else float("inf")
    _check(checks, "closed-form alpha0 matches the exponential ansatz root", "fast decay rate",
           gap < 1e-9, roots, [lo, hi], 1e-9)
    printed_c = math.comb(dims.n, 4) * dims.gauge**dims.k
    checks.append(Check("right-hand side constant c", "constant in the radial equation", "flagged", dims.c, printed_c,
                        note="adopted C(n,k)((n-2k)/(4k))^k, consistent with v_inf; the C(n,4) variant is inconsistent"))


def _radial_checks(dims, config, checks, profile):
    diag = profile_diagnostics(profile)
    _check(checks, "|V(t_max) - v_inf|", "convergence to the cylinder", diag["v_inf_residual"] < config.tol("v_inf"),
           diag["v_inf_residual"], 0.0, config.tol("v_inf"))
    _check(checks, "left-tail log slope", "fast decay rate", abs(diag["alpha0_fit"] - dims.alpha0) < config.tol("alpha0_fit"),
           diag["alpha0_fit"], dims.alpha0, config.tol("alpha0_fit"))
    _check(checks, "finite-difference ODE residual", "radial equation", diag["ode_residual_fd"] < config.tol("ode_residual"),
           diag["ode_residual_fd"], 0.0, config.tol("ode_residual"))
    _check(checks, "sigma_1, sigma_2 positive on the profile", "positive cone along the solution",
           diag["min_sigma1"] > 0 and diag["min_sigma2"] > 0, [diag["min_sigma1"], diag["min_sigma2"]], "> 0")
    spectrum = indicial_spectrum(dims, 0)
    gamma = spectrum.levels[0].gamma
    expected = sorted([-gamma.minus, -gamma.plus] if gamma.real else [-gamma.minus, -np.conj(gamma.minus)],
                      key=lambda z: (z.real, z.imag))
    eig = sorted(np.linalg.eigvals(phase_jacobian(dims)), key=lambda z: (z.real, z.imag))
    err = max(abs(a - b) for a, b in zip(eig, expected))
    _check(checks, "phase Jacobian eigenvalues vs level-0 indicial roots", "linearization at the cylinder",
           err < config.tol("phase_jacobian"), [complex(z) for z in eig], [complex(z) for z in expected],
           config.tol("phase_jacobian"))


def _linearization_checks(dims, config, checks, profile):
    plus = limit_coeffs(dims, "plus")
    printed = printed_plus_coeffs(dims)
    computed = {"b1": plus.coeffs[1], "b2": plus.coeffs[2], "b3": plus.coeffs[3], "b4": plus.coeffs[4]}
    agree = all(computed[name] == printed[name] for name in computed)
    agree_b0 = plus.b0_tilde is not None and all(
        printed[form] == plus.coeffs[0] for form in ("b0_long", "b0_mid", "b0_short"))
    _check(checks, "limit coefficients at the origin (exact)", "coefficients near the singular set",
           agree and agree_b0, {k: str(v) for k, v in computed.items()} | {"b0": str(plus.coeffs[0])},
           {k: str(v) for k, v in printed.items()})
    minus = limit_coeffs(dims, "minus")
    printed_minus = printed_minus_coeffs(dims)
    names = ("d0", "d1", "d2", "d3", "d4")
    err = max(abs(minus.coeffs[i] - printed_minus[name]) for i, name in enumerate(names))
    _check(checks, "limit coefficients at infinity", "coefficients far from the singular set", err < 1e-10,
           list(minus.coeffs), [printed_minus[name] for name in names], 1e-10)
    coeffs = linearized_coeffs(profile)
    _check(checks, "linearized operator elliptic along the profile", "Newton tensor positivity",
           bool(np.all(coeffs.a[2] < 0)), float(np.max(coeffs.a[2])), "< 0")
    ratios = kernel_residual_ratios(profile)
    flat = [r for key in ratios for row in ratios[key] for r in row]
    slack = config.tol("richardson")
    ok = all(abs(r - 4) <= 4 * slack for r in flat)
    _check(checks, "kernel oracle residuals converge at order two", "kernel from dilation and translation",
           ok, [min(flat), max(flat)], 4.0, slack)
    slopes = kernel_tail_slopes(profile)
    expected = {"sharp_at_infinity": -dims.alpha1, "diamond_at_origin": -1 - float(dims.shift)}
    err = max(abs(slopes[k] - expected[k]) for k in slopes)
    _check(checks, "kernel oracle tail slopes", "power laws of the kernel elements", err < config.tol("tail_slope"),
           slopes, expected, config.tol("tail_slope"))


def _mode_checks(dims, config, checks):
    grid = np.concatenate([np.geomspace(1e-3, 30.0, 400)])
    worst = 0.0
    for order in np.linspace(0.0, 10.0, 21):
        worst = max(worst, float(np.max(wronskian_defect(order, grid))))
    _check(checks, "Bessel Wronskian identity", "Wronskian of I and K", worst < config.tol("wronskian"), worst, 0.0,
           config.tol("wronskian"))
    scan = np.geomspace(1e-3, 50.0, 600)
    mono = all(kv_weighted_monotonicity(order, scan) for order in (0.25, 0.5, 1.0, 1.5, 3.0, 7.5))
    _check(checks, "s^nu K_nu nonincreasing", "monotonicity of the weighted K", mono, mono, True)

    level = 1
    delta_j = mode_half_gap(dims, level)
    weights = (0.2 * delta_j, 0.5 * delta_j, 0.8 * delta_j) if config.weight_delta is None else (config.weight_delta,)
    worst_res = 0.0
    for tau0 in config.tau0_list:
        for member in range(4):
            forcing = random_forcing(config.seed, member, tau0)
            for weight in weights + (-weights[0], -(delta_j + 0.5)):
                solution = mode_green_solve(ModeProblem(level, delta_j, weight, tau0, forcing))
                worst_res = max(worst_res, relative_residual(solution))
    _check(checks, "Green-solve residual", "mode equation", worst_res < config.tol("green_residual"), worst_res, 0.0,
           config.tol("green_residual"))
    f1, f2 = random_forcing(config.seed, 100, 0.0), random_forcing(config.seed, 101, 0.0)
    combo = f1.scaled(2.0).plus(f2.scaled(-0.5))
    s1 = mode_green_solve(ModeProblem(level, delta_j, weights[0], 0.0, combo))
    a = mode_green_solve(ModeProblem(level, delta_j, weights[0], 0.0, f1.plus(BumpForcing(f2.centers, f2.widths, (0.0,) * len(f2.centers)))))
    b = mode_green_solve(ModeProblem(level, delta_j, weights[0], 0.0, f2.plus(BumpForcing(f1.centers, f1.widths, (0.0,) * len(f1.centers)))))
    lin = float(np.max(np.abs(s1.omega - (2 * a.omega - 0.5 * b.omega))) / np.max(np.abs(s1.omega)))
    _check(checks, "Green-solve linearity", "linear solution operator", lin < 1e-12, lin, 0.0, 1e-12)

    slack = config.tol("bound_slack")
    for weight in weights:
        rows = estimate_experiment(dims, level, weight, config.tau0_list, config.ensemble, config.seed, delta_j=delta_j)
        ratios = [row.max_ratio for row in rows]
        bound = 1.0 / (delta_j**2 - weight**2)
        _check(checks, f"ratio bound at delta={weight:.4g}", "uniform weighted estimate",
               max(ratios) <= bound * (1 + slack), max(ratios), bound, slack)
        spread = max(ratios) / min(ratios)
        _check(checks, f"tau0 spread at delta={weight:.4g}", "uniformity in the starting point",
               spread < config.tol("spread"), spread, config.tol("spread"))
    contrast = [row.max_ratio for row in estimate_experiment(dims, level, -(delta_j + 0.5), config.tau0_list, 16, config.seed, delta_j=delta_j)]
    spread = max(contrast) / min(contrast)
    _check(checks, "tau0 spread for a negative weight below -delta_j", "why the weight must be positive",
           spread >= config.tol("spread"), spread, f">= {config.tol('spread')}")
    ratios, norms = [], []
    for m in range(1, 6):
        weight = delta_j * (1 - 2.0**-m)
        ratios.append(estimate_experiment(dims, level, weight, [0.0], config.ensemble, config.seed, delta_j=delta_j)[0].max_ratio)
        norms.append(solution_operator_norm(delta_j, weight))
    scaled = [norm * delta_j * 2.0**-m for m, norm in zip(range(1, 6), norms)]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    _check(checks, "ensemble ratio increases as delta approaches delta_j", "blow-up of the estimate constant",
           increasing, ratios)
    _check(checks, "solution operator norm grows like 1/(delta_j - delta)", "blow-up of the estimate constant",
           min(scaled) >= 0.5 * scaled[0], scaled, f">= {0.5 * scaled[0]:.4g}")


def _gluing_checks(dims, config, checks, profile):
    cutoff = cutoff_profile(dims)
    scan = cone_scan(cutoff, dims, strict=False)
    _check(checks, "cutoff ODE identity", "transition function ODE", scan.identity_residual < config.tol("identity"),
           scan.identity_residual, 0.0, config.tol("identity"))
    _check(checks, "closed-form J eigenvalues on the ODE segment", "eigenvalues of J",
           scan.printed_mismatch < config.tol("identity"), scan.printed_mismatch, 0.0, config.tol("identity"))
    general = j_matrix_eigenvalues(1.0, -1 / 8, 1.0, dims)
    brute = 0.0
    values = [float(v) for v in expand_blocks([b[0] for b in general.blocks], [b[1] for b in general.blocks]).expanded()]
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            brute += values[i] * values[j]
    block = float(elementary_symmetric(general, 2))
    _check(checks, "sigma_2(J) at phi = 1 vs brute force", "sigma_2 of J", abs(block - brute) < 1e-12 * max(1, abs(brute)),
           block, brute, 1e-12)
    _check(checks, "J in the positive cone on the ODE segment", "positivity of J", scan.ok,
           {"min_r2_sigma1": float(scan.sigma1.min()), "min_r4_sigma2": float(scan.sigma2.min()),
            "largest_admissible_phi": scan.critical_phi, "alpha2": cutoff.alpha2},
           "> 0", note="" if scan.ok else "sigma_2(J) < 0 where phi exceeds the largest admissible value")
    positive, cone, margins = True, True, {}
    for eps in config.eps_list:
        glued = assemble_glued(dims, eps, profile, cutoff)
        positive &= glued.positive
        cone &= glued.in_cone
        margins[str(eps)] = glued.cone_margins
    _check(checks, "glued factor positive", "positivity of the approximate solution", positive, positive, True)
    _check(checks, "glued factor in the positive cone", "cone condition of the approximate solution", cone,
           margins, "> 0", note="" if cone else "flat background: B vanishes where the factor is constant")
    eps, sups, order = splice_decay(dims, config.eps_list, profile, cutoff)
    decreasing = all(b < a for a, b in zip(sups, sups[1:]))
    _check(checks, "splice residual decreases with epsilon", "error of the approximate solution",
           decreasing and order >= 1, {"sup": sups, "order": order}, ">= 1")


def verify_suite(config: RunConfig, progress: Optional[Callable[[str], None]] = None) -> VerifyReport:
    """Run every cross-module invariant for one dimension tuple; failures are data."""
    start = time.perf_counter()
    dims = config.dims
    checks: list[Check] = []
    stages = [
        ("constants", lambda: _constant_checks(dims, config, checks)),
        ("indicial", lambda: checks.extend(spectrum_report(dims, config.max_level))),
    ]
    profile_box = {}

    def radial_stage():
        profile_box["profile"] = solve_fast_decay(dims)
        _radial_checks(dims, config, checks, profile_box["profile"])

    stages += [
        ("radial", radial_stage),
        ("linearization", lambda: _linearization_checks(dims, config, checks, profile_box["profile"])),
        ("modes", lambda: _mode_checks(dims, config, checks)),
        ("gluing", lambda: _gluing_checks(dims, config, checks, profile_box["profile"])),
    ]
    for name, stage in stages:
        if progress:
            progress(name)
        try:
            stage()
        except Exception as error:  # failures are reported, not raised
            checks.append(Check(f"{name} stage completed", "plumbing", "fail", f"{type(error).__name__}: {error}"))
    return VerifyReport(dims, checks, time.perf_counter() - start)
