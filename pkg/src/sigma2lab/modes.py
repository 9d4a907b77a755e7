"""Mode-level weighted estimates for the conjugated linearization.

After conjugation and Fourier transform in the tangential variables each
mode reduces, up to a negative constant, to

    omega'' - delta_j^2 omega - e^{-2 tau} omega = psi.

With x = e^{-tau} the homogeneous solutions are I(tau) = I_{delta_j}(x),
decaying as tau -> +inf, and K(tau) = K_{delta_j}(x), decaying as
tau -> -inf; their tau-Wronskian is I K' - I' K = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.sparse import diags
from scipy.sparse.linalg import eigsh

from .bessel import bessel_ik_scaled
from .errors import DivergentNorm, DomainError, IndicialWeight, QuadratureFailure, RegimeError
from .geometry import ModelDims
from .indicial import indicial_spectrum

__all__ = [
    "BumpForcing",
    "ModeProblem",
    "ModeSolution",
    "RatioRow",
    "DivergenceRow",
    "InjectivityReport",
    "random_forcing",
    "mode_half_gap",
    "mode_green_solve",
    "mode_residual",
    "relative_residual",
    "weighted_norm",
    "estimate_experiment",
    "divergence_experiment",
    "solution_operator_norm",
    "kv_weighted_monotonicity",
    "mode_injectivity_scan",
]

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)
_CUTOFF = math.sqrt(20 * math.log(10))  # exp(-z^2) < 1e-20 beyond |z| = _CUTOFF


@dataclass(frozen=True)
class BumpForcing:
    """Sum of Gaussian bumps a exp(-((tau-c)/w)^2), each cut off below 1e-20 of its peak."""

    centers: tuple = ()
    widths: tuple = ()
    amplitudes: tuple = ()

    @property
    def support(self) -> tuple[float, float]:
        if not self.centers:
            return (0.0, 0.0)
        lo = min(c - _CUTOFF * w for c, w in zip(self.centers, self.widths))
        hi = max(c + _CUTOFF * w for c, w in zip(self.centers, self.widths))
        return lo, hi

    @property
    def edges(self) -> list:
        """Truncation points, where the forcing jumps by 1e-20 of a peak."""
        return [c + sign * _CUTOFF * w for c, w in zip(self.centers, self.widths) for sign in (-1, 1)]

    @property
    def is_zero(self) -> bool:
        return not self.centers or all(a == 0 for a in self.amplitudes)

    def __call__(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        out = np.zeros_like(tau)
        for c, w, a in zip(self.centers, self.widths, self.amplitudes):
            z = (tau - c) / w
            inside = np.abs(z) <= _CUTOFF
            out = out + np.where(inside, a * np.exp(-np.minimum(z * z, 2 * _CUTOFF**2)), 0.0)
        return out

    def scaled(self, factor: float) -> "BumpForcing":
        return BumpForcing(self.centers, self.widths, tuple(factor * a for a in self.amplitudes))

    def plus(self, other: "BumpForcing") -> "BumpForcing":
        return BumpForcing(
            self.centers + other.centers, self.widths + other.widths, self.amplitudes + other.amplitudes
        )


def random_forcing(seed: int, member: int, tau0: float, max_bumps: int = 3, span: float = 30.0) -> BumpForcing:
    """Seeded bumps supported in (tau0, tau0 + span + 2 * margin); order-independent per member."""
    rng = np.random.default_rng([seed, member])
    count = int(rng.integers(1, max_bumps + 1))
    widths = rng.uniform(0.5, 2.0, count)
    offsets = rng.uniform(0.0, span, count)
    amplitudes = rng.uniform(-1.0, 1.0, count)
    centers = tau0 + _CUTOFF * widths + offsets + 1e-9
    return BumpForcing(tuple(centers), tuple(widths), tuple(amplitudes))


@dataclass(frozen=True)
class ModeProblem:
    level: int
    delta_j: float
    weight_delta: float
    tau0: float
    forcing: BumpForcing = field(default_factory=BumpForcing)

    def __post_init__(self):
        if self.delta_j <= 0:
            raise DomainError("delta_j must be positive")
        if abs(abs(self.weight_delta) - self.delta_j) < 1e-12:
            raise IndicialWeight(f"weight {self.weight_delta} is an indicial root")
        lo, _ = self.forcing.support
        if not self.forcing.is_zero and lo < self.tau0:
            raise DomainError("forcing must be supported in (tau0, inf)")

    @property
    def regime(self) -> str:
        if abs(self.weight_delta) < self.delta_j:
            return "two_sided"
        if self.weight_delta < -self.delta_j:
            return "forward"
        return "none"


@dataclass(frozen=True)
class ModeSolution:
    problem: ModeProblem
    tau: np.ndarray
    omega: np.ndarray
    psi: np.ndarray
    regime: str
    tail: tuple  # ((amplitude, rate), ...) describing omega beyond tau[-1]

    @property
    def step(self) -> float:
        return float(self.tau[1] - self.tau[0])


class _KernelTable:
    """Scaled Bessel values at grid points and Gauss nodes, shared by an ensemble."""

    def __init__(self, delta_j: float, tau: np.ndarray):
        self.delta_j = delta_j
        self.tau = tau
        h = tau[1] - tau[0]
        self.nodes = (tau[:-1, None] + 0.5 * h * (1 + _GAUSS_NODES[None, :])).ravel()
        self.weights = np.tile(0.5 * h * _GAUSS_WEIGHTS, tau.size - 1)
        self.x = np.exp(-tau)
        self.xn = np.exp(-self.nodes)
        ie, _, ke, _ = bessel_ik_scaled(delta_j, self.x)
        ien, _, ken, _ = bessel_ik_scaled(delta_j, self.xn)
        if not (np.all(np.isfinite(ie)) and np.all(np.isfinite(ke)) and np.all(np.isfinite(ien)) and np.all(np.isfinite(ken))):
            raise QuadratureFailure("Bessel values not finite on the grid")
        self.ie, self.ke, self.ien, self.ken = ie, ke, ien, ken
        cells = tau.size - 1
        left = np.repeat(self.x[:-1], _GAUSS_NODES.size)
        right = np.repeat(self.x[1:], _GAUSS_NODES.size)
        # e^{x_{i+1} - x'} <= 1 and e^{x' - x_i} <= 1 on cell i
        self.k_fwd = (self.ken * np.exp(right - self.xn) * self.weights).reshape(cells, -1)
        self.i_bwd = (self.ien * np.exp(self.xn - left) * self.weights).reshape(cells, -1)
        self.decay = np.exp(self.x[1:] - self.x[:-1])  # < 1
        # forward-regime factors exceed one and may overflow far left; only
        # the forward solve uses them and it rejects non-finite results
        with np.errstate(over="ignore", invalid="ignore"):
            self.i_fwd = (self.ien * np.exp(self.xn - right) * self.weights).reshape(cells, -1)
            self.growth = np.exp(self.x[:-1] - self.x[1:])  # > 1


def _grid_for(problem: ModeProblem, step: float) -> np.ndarray:
    lo, hi = problem.forcing.support if not problem.forcing.is_zero else (problem.tau0, problem.tau0)
    left = min(problem.tau0, 0.0) - 6.0
    right = max(hi, problem.tau0) + 14.0
    count = int(math.ceil((right - left) / step))
    return left + step * np.arange(count + 1)


def _solve_on_table(problem: ModeProblem, table: _KernelTable) -> ModeSolution:
    regime = problem.regime
    if regime == "none":
        raise RegimeError(
            f"weight {problem.weight_delta} > delta_j = {problem.delta_j}: no solution in the weighted space"
        )
    tau = table.tau
    psi = problem.forcing(tau)
    psi_nodes = problem.forcing(table.nodes).reshape(tau.size - 1, -1)
    cells = tau.size - 1
    a_hat = np.zeros(tau.size)
    k_part = (table.k_fwd * psi_nodes).sum(axis=1)
    for i in range(cells):
        a_hat[i + 1] = table.decay[i] * a_hat[i] + k_part[i]
    if regime == "two_sided":
        b_hat = np.zeros(tau.size)
        i_part = (table.i_bwd * psi_nodes).sum(axis=1)
        for i in range(cells - 1, -1, -1):
            b_hat[i] = table.decay[i] * b_hat[i + 1] + i_part[i]
        omega = -(table.ie * a_hat + table.ke * b_hat)
        tail = ((-table.ie[-1] * a_hat[-1], -problem.delta_j),)
    else:
        c_hat = np.zeros(tau.size)
        i_part = (table.i_fwd * psi_nodes).sum(axis=1)
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(cells):
                c_hat[i + 1] = table.growth[i] * c_hat[i] + i_part[i]
        omega = table.ke * c_hat - table.ie * a_hat
        tail = ((table.ke[-1] * c_hat[-1], problem.delta_j), (-table.ie[-1] * a_hat[-1], -problem.delta_j))
    if not np.all(np.isfinite(omega)):
        raise QuadratureFailure("solution overflowed")
    return ModeSolution(problem, tau, omega, psi, regime, tail)


def mode_green_solve(problem: ModeProblem, step: float = 0.01) -> ModeSolution:
    """Solve the forced mode equation by variation of constants.

    For |weight| < delta_j the unique solution decaying at both ends is
        omega = -[I(tau) int_{-inf}^{tau} K psi + K(tau) int_{tau}^{inf} I psi].
    For weight < -delta_j the weighted space admits both branches at
    +inf; the forward solution (zero before the support) is returned.
    Integrals are accumulated cell by cell with 8-point Gauss-Legendre rules
    using exponentially scaled Bessel functions, so every propagation factor
    stays below one in the two-sided case.
    """
    tau = _grid_for(problem, step)
    return _solve_on_table(problem, _KernelTable(problem.delta_j, tau))


def mode_residual(solution: ModeSolution) -> np.ndarray:
    """omega'' - (delta_j^2 + e^{-2 tau}) omega - psi with eighth-order differences.

    NaN near the grid ends and where the stencil straddles a truncation point
    of the forcing (the equation holds only piecewise there).
    """
    h = solution.step
    w = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
    second = np.full_like(solution.omega, np.nan)
    second[4:-4] = np.convolve(solution.omega, w[::-1], mode="valid") / (h * h)
    for edge in solution.problem.forcing.edges:
        second[np.abs(solution.tau - edge) < 4.5 * h] = np.nan
    potential = solution.problem.delta_j ** 2 + np.exp(-2 * solution.tau)
    return second - potential * solution.omega - solution.psi


def relative_residual(solution: ModeSolution) -> float:
    """sup |e^{delta tau} residual| / sup e^{delta tau} (|V omega| + |psi|).

    Normalizing by the size of the balanced terms keeps the measure meaningful
    in the forward regime, where the solution can exceed the forcing by many
    orders of magnitude once the support reaches the large-potential side.
    """
    weight = np.exp(solution.problem.weight_delta * solution.tau)
    res = mode_residual(solution) * weight
    potential = solution.problem.delta_j ** 2 + np.exp(-2 * solution.tau)
    scale = (np.abs(potential * solution.omega) + np.abs(solution.psi)) * weight
    return float(np.nanmax(np.abs(res)) / np.max(scale))


def weighted_norm(tau: np.ndarray, f: np.ndarray, weight_delta: float, tail: Optional[Sequence] = None) -> float:
    """(int f^2 e^{2 delta tau} dtau)^{1/2} over the grid plus an exponential right tail.

    ``tail`` lists (amplitude, rate) with f(tau) = sum a e^{rate (tau - tau_end)}
    beyond the grid.  Without it the rate is fitted from the last samples when
    the integrand there is not negligible.
    """
    tau = np.asarray(tau, dtype=float)
    f = np.asarray(f, dtype=float)
    if not np.any(f):
        return 0.0
    weight = np.exp(2 * weight_delta * tau)
    body = simpson(f * f * weight, x=tau)
    end = tau[-1]
    if tail is None:
        if f[-1] == 0 or f[-1] ** 2 * weight[-1] <= 1e-30 * max(body, 1e-300):
            tail = ()
        else:
            window = slice(-6, None)
            ok = np.all(f[window] != 0) and np.all(np.sign(f[window]) == np.sign(f[-1]))
            if not ok:
                raise DivergentNorm("cannot identify the tail of the integrand")
            rate = np.polyfit(tau[window], np.log(np.abs(f[window])), 1)[0]
            tail = ((f[-1], rate),)
    extra = 0.0
    for a1, r1 in tail:
        for a2, r2 in tail:
            if a1 == 0 or a2 == 0:
                continue
            expo = 2 * weight_delta + r1 + r2
            if expo >= 0:
                raise DivergentNorm(f"tail exponent {expo:.3g} is not negative")
            extra += a1 * a2 / (-expo)
    extra *= math.exp(2 * weight_delta * end)
    total = body + extra
    if not np.isfinite(total):
        raise DivergentNorm("norm is not finite")
    return math.sqrt(max(total, 0.0))


def mode_half_gap(dims: ModelDims, level: int) -> float:
    """Positive centered root delta_j at the origin; |delta_0| when the level-0 pair is complex."""
    roots = indicial_spectrum(dims, level).levels[level].delta
    return abs(roots.plus) if not roots.real else float(roots.plus.real)


@dataclass(frozen=True)
class RatioRow:
    tau0: float
    delta: float
    level: int
    max_ratio: float
    ensemble_size: int
    seed: int


def estimate_experiment(
    dims: ModelDims,
    level: int,
    weight_delta: float,
    tau0_list: Sequence[float],
    ensemble: int = 64,
    seed: int = 20240917,
    step: float = 0.01,
    delta_j: Optional[float] = None,
) -> list[RatioRow]:
    """Max of ||omega||/||psi|| in L^2_delta over a seeded ensemble, per tau0."""
    delta_j = mode_half_gap(dims, level) if delta_j is None else delta_j
    rows = []
    for tau0 in tau0_list:
        members = [random_forcing(seed, m, tau0) for m in range(ensemble)]
        support_hi = max(f.support[1] for f in members)
        template = ModeProblem(level, delta_j, weight_delta, tau0, BumpForcing((support_hi - 1.0,), (1e-3,), (0.0,)))
        tau = _grid_for(template, step)
        table = _KernelTable(delta_j, tau)
        best = 0.0
        for forcing in members:
            problem = ModeProblem(level, delta_j, weight_delta, tau0, forcing)
            sol = _solve_on_table(problem, table)
            num = weighted_norm(sol.tau, sol.omega, weight_delta, sol.tail)
            den = weighted_norm(sol.tau, sol.psi, weight_delta, ())
            if den > 0:
                best = max(best, num / den)
        rows.append(RatioRow(float(tau0), float(weight_delta), level, best, ensemble, seed))
    return rows


def solution_operator_norm(delta_j: float, weight_delta: float, left: float = -5.0, length: float = 400.0, step: float = 0.05) -> float:
    """1/sigma_min of the conjugated operator on a Dirichlet box.

    With omega = e^{-delta tau} u the weighted estimate becomes an unweighted
    one for u'' - 2 delta u' + (delta^2 - delta_j^2 - e^{-2 tau}) u.
    """
    count = int(length / step)
    tau = left + step * np.arange(1, count)
    main = -2.0 / step**2 + weight_delta**2 - delta_j**2 - np.exp(-2 * tau)
    upper = np.full(tau.size - 1, 1.0 / step**2 - weight_delta / step)
    lower = np.full(tau.size - 1, 1.0 / step**2 + weight_delta / step)
    op = diags([lower, main, upper], [-1, 0, 1], format="csc")
    gram = (op.T @ op).tocsc()
    smallest = eigsh(gram, k=1, sigma=0.0, which="LM", return_eigenvectors=False)[0]
    return 1.0 / math.sqrt(smallest)


@dataclass(frozen=True)
class DivergenceRow:
    m: int
    delta: float
    max_ratio: float
    operator_norm: float
    scaled_norm: float  # operator_norm * (delta_j - delta)


def divergence_experiment(
    dims: ModelDims, level: int, steps: Sequence[int] = (1, 2, 3, 4, 5), tau0: float = 0.0, ensemble: int = 64, seed: int = 20240917
) -> list[DivergenceRow]:
    """Ratios and solution-operator norms along delta = delta_j (1 - 2^{-m})."""
    delta_j = mode_half_gap(dims, level)
    rows = []
    for m in steps:
        delta = delta_j * (1 - 2.0 ** (-m))
        ratio = estimate_experiment(dims, level, delta, [tau0], ensemble, seed, delta_j=delta_j)[0].max_ratio
        norm = solution_operator_norm(delta_j, delta)
        rows.append(DivergenceRow(m, delta, ratio, norm, norm * (delta_j - delta)))
    return rows


def kv_weighted_monotonicity(order: float, s_grid: np.ndarray, tol: float = 1e-12) -> bool:
    """Whether s^nu K_nu(s) is nonincreasing on the grid."""
    if order <= 0:
        raise DomainError("order must be positive")
    s = np.asarray(s_grid, dtype=float)
    ke = bessel_ik_scaled(order, s)[2]
    values = np.exp(order * np.log(s) - s) * ke
    steps = np.diff(values)
    return bool(np.all(steps <= tol * np.maximum(np.abs(values[:-1]), 1e-300)))


@dataclass(frozen=True)
class InjectivityReport:
    level: int
    delta_j: complex
    updelta: float
    origin_slopes: dict  # d log|branch| / dtau deep at tau -> +inf
    infinity_growth: dict  # d log|branch| / d(-tau) at tau -> -inf
    admissible_at_origin: list
    admissible_at_infinity: list
    trivial_kernel: bool
    note: str = ""


def mode_injectivity_scan(dims: ModelDims, level: int, updelta: float) -> InjectivityReport:
    """Classify the homogeneous branches of the mode equation at both ends.

    A branch is admissible at the origin (tau -> +inf) when it decays at
    least like e^{-updelta tau}, and admissible at infinity when it stays
    bounded as tau -> -inf.  The kernel is trivial when no branch is
    admissible at both ends.
    """
    if updelta <= 0:
        raise DomainError("updelta must be positive")
    roots = indicial_spectrum(dims, level).levels[level].delta
    if roots.real:
        dj = float(roots.plus.real)
        far = np.linspace(25.0, 35.0, 41)
        near = np.linspace(-3.0, -2.0, 41)
        slopes, growth = {}, {}
        for name, idx in (("I", 0), ("K", 2)):
            vals_far = bessel_ik_scaled(dj, np.exp(-far))
            vals_near = bessel_ik_scaled(dj, np.exp(-near))
            sign = 1.0 if idx == 0 else -1.0  # undo the exponential scaling
            log_far = np.log(vals_far[idx]) + sign * np.exp(-far)
            log_near = np.log(vals_near[idx]) + sign * np.exp(-near)
            slopes[name] = float(np.polyfit(far, log_far, 1)[0])
            growth[name] = float(-np.polyfit(near, log_near, 1)[0])
        at_origin = [b for b in ("I", "K") if slopes[b] <= -updelta + 1e-6]
        at_infinity = [b for b in ("I", "K") if growth[b] <= 0]
        trivial = not set(at_origin) & set(at_infinity)
        note = f"origin admits {at_origin or 'no branch'}; infinity admits {at_infinity or 'no branch'}"
        return InjectivityReport(level, dj, updelta, slopes, growth, at_origin, at_infinity, trivial, note)
    # complex half-gap: integrate the mode equation directly and fit the envelope
    dj2 = (roots.plus * roots.plus).real  # negative: oscillatory as tau -> +inf

    def rhs(tau, y):
        return [y[1], (dj2 + math.exp(-2 * tau)) * y[0]]

    envelopes = {}
    for name, start in (("cos", [1.0, 0.0]), ("sin", [0.0, 1.0])):
        sol = solve_ivp(rhs, (0.0, 40.0), start, method="DOP853", rtol=1e-11, atol=1e-13, dense_output=True)
        grid = np.linspace(20.0, 40.0, 2001)
        y, dy = sol.sol(grid)
        energy = np.sqrt(y * y + dy * dy / max(-dj2, 1e-300))
        envelopes[name] = float(np.polyfit(grid, np.log(energy), 1)[0])
    at_origin = [b for b, slope in envelopes.items() if slope <= -updelta + 1e-6]
    trivial = not at_origin
    return InjectivityReport(
        level,
        complex(roots.plus),
        updelta,
        envelopes,
        {},
        at_origin,
        [],
        trivial,
        "complex half-gap: every solution oscillates with a non-decaying envelope at the origin",
    )
