"""Acceptance criteria AC1 to AC9.

Each criterion is a function returning (ok, detail).  Under pytest every
criterion is one test and the PASS/FAIL lines are printed in the terminal
summary; ``python tests/test_acceptance.py`` prints the same lines directly.
"""

from __future__ import annotations

import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from sigma2lab.bessel import wronskian_defect
from sigma2lab.geometry import ModelDims, critical_dimension_P, decay_discriminant, elementary_symmetric
from sigma2lab.gluing import assemble_glued, cone_scan, cutoff_profile, j_matrix_eigenvalues, splice_decay
from sigma2lab.indicial import indicial_spectrum, spectrum_report
from sigma2lab.linearization import kernel_residual_ratios, kernel_tail_slopes, limit_coeffs
from sigma2lab.modes import (
    ModeProblem,
    estimate_experiment,
    kv_weighted_monotonicity,
    mode_green_solve,
    random_forcing,
    relative_residual,
    solution_operator_norm,
)
from sigma2lab.radial import phase_jacobian, profile_diagnostics, solve_fast_decay
from sigma2lab.report import RunConfig, verify_suite

SMALL = ModelDims(9, 1)
LARGE = ModelDims(25, 4)
SEED = 20240917
EPSILONS = (0.1, 0.05, 0.025)
TAU0 = (-5.0, 0.0, 5.0, 10.0)
RESULTS: dict = {}

_cache: dict = {}


def small_profile():
    if "profile" not in _cache:
        _cache["profile"] = solve_fast_decay(SMALL)
    return _cache["profile"]


def all_true(items: dict) -> bool:
    return all(bool(v) for v in items.values())


def failing(items: dict) -> str:
    bad = [name for name, ok in items.items() if not ok]
    return "all sub-checks hold" if not bad else "failed: " + ", ".join(bad)


def criterion_1():
    start = time.perf_counter()
    values = [1] * (SMALL.N - 1) + [-1] * (SMALL.p + 1)
    pairs = sum(a * b for a, b in itertools.combinations(values, 2))
    disc = decay_discriminant(SMALL.n, SMALL.p)
    root = math.isqrt(disc)
    exact_alpha = (
        Fraction(SMALL.n - 4, 4) - Fraction(SMALL.p * (SMALL.n - 3), 2 * (SMALL.n - 1)) - Fraction(root, 2 * (SMALL.n - 1))
    )
    checks = {
        "c_912 = 8 by pair expansion": SMALL.c_product == pairs == 8,
        "P2(9) = 2": critical_dimension_P(9, 2) == 2,
        "P3(9) = 1": critical_dimension_P(9, 3) == 1,
        "v_inf = (2/9)^(5/16)": abs(SMALL.v_inf - (2 / 9) ** (5 / 16)) < 1e-12,
        "alpha0 = 1/2 exactly": root * root == disc and exact_alpha == Fraction(1, 2) and SMALL.alpha0 == 0.5,
    }
    elapsed = time.perf_counter() - start
    checks["runtime < 1 s"] = elapsed < 1.0
    return all_true(checks), f"{failing(checks)} ({elapsed:.3f} s)"


def criterion_2():
    start = time.perf_counter()
    profile = solve_fast_decay(SMALL)
    elapsed = time.perf_counter() - start
    _cache["profile"] = profile
    diag = profile_diagnostics(profile)
    checks = {
        "|V(t_max) - v_inf| < 1e-6": diag["v_inf_residual"] < 1e-6,
        "left-tail slope 0.5 +- 0.01": abs(diag["alpha0_fit"] - 0.5) <= 0.01,
        "ODE residual < 1e-9": diag["ode_residual_fd"] < 1e-9,
        "sigma_1, sigma_2 > 0": diag["min_sigma1"] > 0 and diag["min_sigma2"] > 0,
        "runtime < 60 s": elapsed < 60.0,
    }
    detail = (
        f"|dV|={diag['v_inf_residual']:.2e} slope={diag['alpha0_fit']:.5f} "
        f"residual={diag['ode_residual_fd']:.2e} ({elapsed:.2f} s); {failing(checks)}"
    )
    return all_true(checks), detail


def criterion_3():
    start = time.perf_counter()
    spectrum = indicial_spectrum(SMALL, 50)
    report = {c.name: c for c in spectrum_report(SMALL, 50)}
    first = spectrum.levels[1]
    plus = limit_coeffs(SMALL, "plus")
    vertex = plus.coeffs[1] / (2 * plus.coeffs[2])
    chains = [c for name, c in report.items() if name.startswith("monotone chain")]
    checks = {
        "level-1 roots {-1, p+1}": first.gamma.exact == (Fraction(-1), Fraction(SMALL.p + 1)),
        "vertex p/2": vertex == Fraction(SMALL.p, 2),
        "level-0 pair complex with Re 0.5": (not spectrum.levels[0].gamma.real)
        and abs(spectrum.levels[0].gamma.minus.real - 0.5) < 1e-12,
        "monotone chains at both ends": len(chains) == 2 and all(c.status == "pass" for c in chains),
        "chi0 level-1 minus = -2.25": abs(first.chi0.minus.real + 2.25) < 1e-12,
        "delta_1 = +-1.5": first.delta.exact == (Fraction(-3, 2), Fraction(3, 2)),
        "chi_inf level-1 minus = -2.75": abs(first.chi_inf.minus.real + 2.75) < 1e-12,
        "root residuals < 1e-12": report["root residuals"].measured < 1e-12,
    }
    elapsed = time.perf_counter() - start
    checks["runtime < 1 s"] = elapsed < 1.0
    return all_true(checks), f"{failing(checks)} ({elapsed:.3f} s)"


def criterion_4():
    gamma = indicial_spectrum(SMALL, 0).levels[0].gamma
    expected = sorted([-gamma.plus, -gamma.minus], key=lambda z: (z.real, z.imag))
    eig = sorted(np.linalg.eigvals(phase_jacobian(SMALL)), key=lambda z: (z.real, z.imag))
    error = max(abs(a - b) for a, b in zip(eig, expected))
    return error < 1e-8, f"max eigenvalue mismatch {error:.2e}"


def criterion_5():
    profile = small_profile()
    ratios = kernel_residual_ratios(profile, halvings=3)
    flat = [r for key in ratios for row in ratios[key] for r in row]
    slopes = kernel_tail_slopes(profile)
    checks = {
        "Richardson ratios 4 +- 20%": all(abs(r - 4.0) <= 0.8 for r in flat),
        "phi_sharp slope -1.75": abs(slopes["sharp_at_infinity"] + 1.75) <= 0.02,
        "phi_diamond slope -2.25": abs(slopes["diamond_at_origin"] + 2.25) <= 0.02,
    }
    detail = (
        f"ratios in [{min(flat):.3f}, {max(flat):.3f}], slopes {slopes['sharp_at_infinity']:.4f} "
        f"and {slopes['diamond_at_origin']:.4f}; {failing(checks)}"
    )
    return all_true(checks), detail


def criterion_6():
    profile = small_profile()
    cutoff = cutoff_profile(SMALL)
    scan = cone_scan(cutoff, SMALL, strict=False)
    radii = np.geomspace(1e-3, 10.0, 9)
    worst = 0.0
    for r in radii:
        values = [float(v) for v in j_matrix_eigenvalues(1.0, -1 / 8, r, SMALL).expanded()]
        brute = sum(a * b for a, b in itertools.combinations(values, 2))
        worst = max(worst, abs(brute * r**4 - 13 / 8))
    positive, in_cone = True, True
    for eps in EPSILONS:
        glued = assemble_glued(SMALL, eps, profile, cutoff)
        positive &= glued.positive
        in_cone &= glued.in_cone
    _, sups, order = splice_decay(SMALL, EPSILONS, profile, cutoff)
    checks = {
        "cutoff ODE identity": scan.identity_residual < 1e-12,
        "sigma_2(J) = 13/8 r^-4 at phi = 1": worst < 1e-12,
        "J in the positive cone on the ODE segment": scan.ok,
        "glued factor positive": positive,
        "glued factor in the positive cone": in_cone,
        "splice residual decreasing with order >= 1": all(b < a for a, b in zip(sups, sups[1:])) and order >= 1,
    }
    detail = f"largest admissible phi {scan.critical_phi:.6f} vs alpha2 {cutoff.alpha2}, splice order {order:.2f}; {failing(checks)}"
    return all_true(checks), detail


def criterion_7():
    grid = np.geomspace(1e-3, 30.0, 400)
    wronskian = max(float(np.max(wronskian_defect(order, grid))) for order in np.linspace(0.0, 10.0, 41))
    scan = np.geomspace(1e-3, 50.0, 600)
    monotone = all(kv_weighted_monotonicity(order, scan) for order in (0.1, 0.5, 1.0, 1.5, 2.5, 5.0, 10.0))
    worst = 0.0
    for tau0 in TAU0:
        for member in range(8):
            forcing = random_forcing(SEED, member, tau0)
            for weight in (0.3, 0.75, 1.2, -0.3, -2.0):
                worst = max(worst, relative_residual(mode_green_solve(ModeProblem(1, 1.5, weight, tau0, forcing))))
    checks = {"Wronskian < 1e-8": wronskian < 1e-8, "s^nu K_nu nonincreasing": monotone, "Green residual < 1e-8": worst < 1e-8}
    return all_true(checks), f"Wronskian {wronskian:.2e}, Green residual {worst:.2e}; {failing(checks)}"


def criterion_8():
    start = time.perf_counter()
    delta_j = 1.5
    bound_ok, spread_ok, worst_slack, worst_spread = True, True, -math.inf, 0.0
    for weight in (0.15, 0.5, 0.75, 1.0, 1.35):
        rows = estimate_experiment(SMALL, 1, weight, TAU0, 64, SEED, delta_j=delta_j)
        ratios = [row.max_ratio for row in rows]
        bound = 1.0 / (delta_j**2 - weight**2)
        bound_ok &= max(ratios) <= 1.1 * bound
        worst_slack = max(worst_slack, max(ratios) / bound)
        spread = max(ratios) / min(ratios)
        spread_ok &= spread < 2.0
        worst_spread = max(worst_spread, spread)
    ratios, scaled = [], []
    for m in range(1, 6):
        weight = delta_j * (1 - 2.0**-m)
        ratios.append(estimate_experiment(SMALL, 1, weight, [0.0], 64, SEED, delta_j=delta_j)[0].max_ratio)
        scaled.append(solution_operator_norm(delta_j, weight) * (delta_j - weight))
    elapsed = time.perf_counter() - start
    checks = {
        "ratio bound with 10% slack": bound_ok,
        "tau0 spread below 2": spread_ok,
        "ensemble ratio increases as delta -> delta_1": all(b > a for a, b in zip(ratios, ratios[1:])),
        "operator norm grows like 1/(delta_1 - delta)": min(scaled) >= 0.5 * scaled[0],
        "runtime < 5 min": elapsed < 300.0,
    }
    detail = (
        f"max ratio/bound {worst_slack:.3f}, max spread {worst_spread:.3f}, "
        f"divergence ratios {[round(r, 3) for r in ratios]} ({elapsed:.1f} s); {failing(checks)}"
    )
    return all_true(checks), detail


def criterion_9():
    report = verify_suite(RunConfig(LARGE.n, LARGE.p))
    names = [c.name for c in report.failures]
    detail = f"{len(report.failures)} failed, {len(report.flagged)} flagged ({report.runtime:.1f} s)"
    if names:
        detail += "; failed: " + ", ".join(names)
    return report.passed, detail


CRITERIA = {
    "AC1 constants": criterion_1,
    "AC2 radial solution": criterion_2,
    "AC3 indicial identities": criterion_3,
    "AC4 phase Jacobian spectrum": criterion_4,
    "AC5 kernel oracles": criterion_5,
    "AC6 gluing": criterion_6,
    "AC7 Bessel and mode layer": criterion_7,
    "AC8 weighted-estimate experiments": criterion_8,
    "AC9 robustness sweep n=25 p=4": criterion_9,
}


def line(name: str, ok: bool, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'} {name}: {detail}"


@pytest.mark.parametrize("name", list(CRITERIA))
def test_acceptance(name):
    ok, detail = CRITERIA[name]()
    RESULTS[name] = (ok, detail)
    print(line(name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    for criterion_name, criterion in CRITERIA.items():
        print(line(criterion_name, *criterion()), flush=True)
