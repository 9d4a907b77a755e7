"""Cutoff of the conformal factor near the singular set and the glued approximate solution.

Flat model: background g_E on R^n with u_0 = 1, singular set R^p at r = 0.
The cutoff factor is u_* = exp(-(n-4)/4 * omega) with omega' = phi / r,
phi = alpha2 near r = 0 and phi = 0 for r >= r0.  The glued factor splices
the exact radial solution U_eps with the rescaled cutoff factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, InvalidJunctions, MarginViolation, RegionOverlap
from .geometry import DiagonalTensor, ModelDims, elementary_symmetric, radial_b_tensor
from .radial import RadialProfile, rescale_translate, solve_fast_decay

__all__ = [
    "CutoffProfile",
    "cutoff_profile",
    "ode_phi",
    "j_matrix_eigenvalues",
    "printed_j_eigenvalues",
    "ConeScan",
    "cone_scan",
    "GluedProfile",
    "assemble_glued",
    "RegionResidual",
    "residual_scan",
    "splice_decay",
    "REGIONS",
]

REGIONS = ("inner", "neck", "transition", "cutoff", "outer")


def _smoothstep(u):
    """Quintic smoothstep with its first two derivatives, clamped to [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    value = u**3 * (10 - 15 * u + 6 * u * u)
    first = 30 * u * u * (1 - u) ** 2
    second = 60 * u * (1 - u) * (1 - 2 * u)
    return value, first, second


def ode_phi(r, delta_c: float):
    """phi = 2 delta / (delta + r^{1/4}) and r phi'(r)."""
    r = np.asarray(r, dtype=float)
    root = r**0.25
    phi = 2 * delta_c / (delta_c + root)
    r_dphi = -0.5 * delta_c * root / (delta_c + root) ** 2
    return phi, r_dphi


def _bump(y):
    inside = np.abs(y) < 1
    safe = np.where(inside, 1 - y * y, 1.0)
    value = np.where(inside, np.exp(-1.0 / safe), 0.0)
    slope = np.where(inside, value * (-2 * y) / safe**2, 0.0)
    return value, slope


@dataclass
class CutoffProfile:
    """Transition function phi on a uniform log r table, with omega = -int_r^1 phi ds/s."""

    dims: ModelDims
    alpha2: float
    delta_c: float
    phi_r1: float
    r0: float
    r1: float
    r2: float
    width: float  # mollifier half-width in log r
    log_r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray  # d phi / d log r
    omega: np.ndarray
    mollified: bool = True
    _phi_spline: Optional[CubicHermiteSpline] = field(default=None, repr=False)
    _omega_spline: Optional[CubicHermiteSpline] = field(default=None, repr=False)

    def __post_init__(self):
        self._phi_spline = CubicHermiteSpline(self.log_r, self.phi, self.dphi)
        self._omega_spline = CubicHermiteSpline(self.log_r, self.omega, self.phi)

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.log_r)

    @property
    def inner_constant(self) -> float:
        """omega - alpha2 log r on the constant plateau near r = 0."""
        return float(self.omega[0] - self.alpha2 * self.log_r[0])

    def raw(self, r):
        """Unmollified (phi, r phi')."""
        r = np.asarray(r, dtype=float)
        ode, ode_slope = ode_phi(r, self.delta_c)
        span = math.log(self.r0 / self.r1)
        step, step_slope, _ = _smoothstep(np.log(np.maximum(r, 1e-300) / self.r1) / span)
        hand = self.phi_r1 * (1 - step)
        hand_slope = -self.phi_r1 * step_slope / span
        phi = np.select([r <= self.r2, r < self.r1, r < self.r0], [self.alpha2, ode, hand], 0.0)
        slope = np.select([r <= self.r2, r < self.r1, r < self.r0], [0.0, ode_slope, hand_slope], 0.0)
        return phi, slope

    def evaluate(self, r):
        """(phi, r phi', omega) of the stored profile at radii r > 0."""
        x = np.log(np.asarray(r, dtype=float))
        lo, hi = self.log_r[0], self.log_r[-1]
        inner = x < lo
        outer = x > hi
        xc = np.clip(x, lo, hi)
        phi = self._phi_spline(xc)
        slope = np.interp(xc, self.log_r, self.dphi)
        omega = self._omega_spline(xc)
        phi = np.where(inner, self.alpha2, np.where(outer, 0.0, phi))
        slope = np.where(inner | outer, 0.0, slope)
        omega = np.where(inner, self.alpha2 * x + self.inner_constant, np.where(outer, 0.0, omega))
        return phi, slope, omega


def cutoff_profile(
    dims: ModelDims,
    alpha2: Optional[float] = None,
    r0: float = 0.5,
    phi_r1: float = 0.1,
    r1: Optional[float] = None,
    mollify: bool = True,
    step: float = 2e-4,
) -> CutoffProfile:
    """Build phi: alpha2 on (0, r2], ODE solution on (r2, r1), smoothstep down to 0 on [r1, r0).

    delta_c follows from continuity phi(r1) = phi_r1 and r2 from phi(r2) = alpha2.
    Mollification convolves phi in log r with a smooth bump of half-width
    (smallest junction gap) / 10.
    """
    alpha2 = dims.alpha2 if alpha2 is None else float(alpha2)
    if not 0 < alpha2 < 2:
        raise DomainError(f"alpha2 = {alpha2} must lie in (0, 2)")
    if not 0 < phi_r1 < alpha2:
        raise DomainError("phi_r1 must lie in (0, alpha2)")
    r1 = r0 / 2 if r1 is None else r1
    if not 0 < r1 < r0 < 1:
        raise InvalidJunctions(f"need 0 < r1 < r0 < 1, got r1={r1}, r0={r0}")
    delta_c = phi_r1 * r1**0.25 / (2 - phi_r1)
    r2 = (delta_c * (2 - alpha2) / alpha2) ** 4
    if not 0 < r2 < r1:
        raise InvalidJunctions(f"r2 = {r2} is not inside (0, r1)")
    width = min(math.log(r1 / r2), math.log(r0 / r1)) / 10 if mollify else 0.0
    margin = 3.0 + width
    x_lo, x_hi = math.log(r2) - margin, math.log(r0) + margin
    count = int(math.ceil((x_hi - x_lo) / step))
    x = x_lo + step * np.arange(count + 1)
    stub = CutoffProfile.__new__(CutoffProfile)
    stub.alpha2, stub.delta_c, stub.phi_r1, stub.r0, stub.r1, stub.r2 = alpha2, delta_c, phi_r1, r0, r1, r2
    phi, slope = CutoffProfile.raw(stub, np.exp(x))
    if mollify:
        half = int(math.ceil(width / step))
        offsets = step * np.arange(-half, half + 1)
        kernel, kernel_slope = _bump(offsets / width)
        norm = kernel.sum()
        padded = np.concatenate([np.full(half, alpha2), phi, np.zeros(half)])
        phi = np.convolve(padded, kernel / norm, mode="valid")
        slope = np.convolve(padded, kernel_slope / (norm * width), mode="valid")
    omega = -cumulative_trapezoid(phi[::-1], -x[::-1], initial=0.0)[::-1]  # -int_x^{x_hi} phi
    return CutoffProfile(dims, alpha2, delta_c, phi_r1, r0, r1, r2, width, x, phi, slope, omega, mollify)


def j_matrix_eigenvalues(phi, r_dphi, r, dims: ModelDims) -> DiagonalTensor:
    """Eigenvalues of J = diag(J_0, J_1) with the actual phi'.

    Radial phi'/r - (2 phi - phi^2)/(2 r^2), angular (2 phi - phi^2)/(2 r^2)
    with multiplicity N - 1, tangential -phi^2/(2 r^2) with multiplicity p.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("radius must be positive")
    gap = 2 * phi - phi * phi
    radial = r_dphi / r**2 - gap / (2 * r**2)
    angular = gap / (2 * r**2)
    tangential = -phi * phi / (2 * r**2)
    return DiagonalTensor(((radial, 1), (angular, dims.N - 1), (tangential, dims.p)))


def printed_j_eigenvalues(phi, r, dims: ModelDims) -> DiagonalTensor:
    """Closed-form eigenvalues valid where 4 r phi' = -(2 phi - phi^2)/2."""
    r = np.asarray(r, dtype=float)
    gap = 2 * phi - phi * phi
    return DiagonalTensor(
        ((-5 / 8 * gap / r**2, 1), (gap / (2 * r**2), dims.N - 1), (-phi * phi / (2 * r**2), dims.p))
    )


def _sigma_lower_bounds(tensor: DiagonalTensor, spread):
    """Lower bounds of sigma_1, sigma_2 over eigenvalue perturbations of size <= spread.

    sigma_2(lambda + eta) = sigma_2 + sum eta_i (sigma_1 - lambda_i) + sigma_2(eta).
    """
    dim = tensor.dim
    s1 = elementary_symmetric(tensor, 1)
    s2 = elementary_symmetric(tensor, 2)
    linear = sum(mult * np.abs(s1 - value) for value, mult in tensor.blocks)
    return s1 - dim * spread, s2 - spread * linear - math.comb(dim, 2) * spread**2


@dataclass(frozen=True)
class ConeScan:
    r: np.ndarray
    phi: np.ndarray
    sigma1: np.ndarray  # r^2 sigma_1(J)
    sigma2: np.ndarray  # r^4 sigma_2(J)
    lower1: np.ndarray  # margin-adjusted, same scaling
    lower2: np.ndarray
    identity_residual: float  # sup |4 r phi'/(2 phi - phi^2) + 1/2|
    printed_mismatch: float  # sup |printed - general| r^2
    grad_omega0_bound: float
    critical_phi: Optional[float]  # largest phi with sigma_2 > 0 on the segment, if the segment exceeds it

    @property
    def ok(self) -> bool:
        return bool(np.all(self.lower1 > 0) and np.all(self.lower2 > 0))

    @property
    def first_failure(self) -> Optional[float]:
        bad = np.nonzero((self.lower1 <= 0) | (self.lower2 <= 0))[0]
        return float(self.r[bad[0]]) if bad.size else None


def cone_scan(
    profile: CutoffProfile, dims: ModelDims, grad_omega0_bound: float = 0.0, samples: int = 4001, strict: bool = True
) -> ConeScan:
    """Scan sigma_1(J), sigma_2(J) on the ODE segment (r2, r1).

    A symmetric perturbation with |E| <= tau phi / r^2 moves each eigenvalue by
    at most tau phi / r^2; the reported lower bounds cover all such moves.
    Raises MarginViolation at the first failing radius when ``strict``.
    """
    if grad_omega0_bound < 0:
        raise DomainError("perturbation bound must be nonnegative")
    r = np.exp(np.linspace(math.log(profile.r2), math.log(profile.r1), samples))[1:-1]
    phi, r_dphi = ode_phi(r, profile.delta_c)
    identity = np.abs(4 * r_dphi / (2 * phi - phi * phi) + 0.5)
    general = j_matrix_eigenvalues(phi, r_dphi, r, dims).scaled(r**2)
    printed = printed_j_eigenvalues(phi, r, dims).scaled(r**2)
    mismatch = max(float(np.max(np.abs(a - b))) for (a, _), (b, _) in zip(general.blocks, printed.blocks))
    s1 = elementary_symmetric(general, 1)
    s2 = elementary_symmetric(general, 2)
    low1, low2 = _sigma_lower_bounds(general, grad_omega0_bound * phi)
    critical = None
    if np.any(s2 <= 0):
        good = phi[s2 > 0]
        critical = float(good.max()) if good.size else 0.0
    scan = ConeScan(r, phi, s1, s2, low1, low2, float(identity.max()), mismatch, grad_omega0_bound, critical)
    if strict and not scan.ok:
        raise MarginViolation(
            f"J leaves the positive cone on the ODE segment (tau={grad_omega0_bound})", scan.first_failure
        )
    return scan


@dataclass
class GluedProfile:
    """Glued factor on a uniform t = -log r grid, stored in the cylindrical picture v = r^{(n-4)/4} u."""

    dims: ModelDims
    epsilon: float
    m: float
    rho: float
    rho1: float
    scale: float
    splice: tuple  # (r_lo, r_hi) of the partition of unity
    t: np.ndarray
    v: np.ndarray
    vdot: np.ndarray
    vddot: np.ndarray
    region: np.ndarray
    sigma1: np.ndarray
    sigma2: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return np.exp(-self.t)

    @property
    def u(self) -> np.ndarray:
        return np.exp(float(self.dims.shift) * self.t) * self.v

    @property
    def cone_margins(self) -> dict:
        out = {}
        for name in REGIONS:
            mask = self.region == name
            if np.any(mask):
                out[name] = (float(self.sigma1[mask].min()), float(self.sigma2[mask].min()))
        return out

    @property
    def positive(self) -> bool:
        return bool(np.all(self.v > 0))

    @property
    def in_cone(self) -> bool:
        return bool(np.all(self.sigma1 > 0) and np.all(self.sigma2 > 0))


def _outer_factor(t, dims: ModelDims, cutoff: CutoffProfile, scale: float, amplitude: float):
    """W in the v-picture with (W, W', W''); equals amplitude e^{alpha0 t} where phi = alpha2."""
    gauge = float(dims.shift)
    s = np.exp(-t) / scale
    phi, s_dphi, omega = cutoff.evaluate(s)
    alpha1 = dims.alpha1
    # on the plateau omega = alpha2 log s + inner_constant and gauge alpha2 = alpha1, so F = 1 there
    log_w = math.log(amplitude) + dims.alpha0 * t + alpha1 * np.log(s) - gauge * (omega - cutoff.inner_constant)
    value = np.exp(log_w)
    slope = -gauge + gauge * phi
    curvature = -gauge * s_dphi
    return value, value * slope, value * (curvature + slope * slope)


def assemble_glued(
    dims: ModelDims,
    epsilon: float,
    radial: Optional[RadialProfile] = None,
    cutoff: Optional[CutoffProfile] = None,
    rho: Optional[float] = None,
    step: float = 0.01,
    m: Optional[float] = None,
) -> GluedProfile:
    """Splice U_eps and W = C eps^{alpha0} r^{-alpha1} F(r/R) over [rho/10, rho].

    F is the cutoff factor normalized to 1 on its power-law plateau and R is
    chosen so that the plateau (and the mollifier's reach) covers the splice.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    radial = solve_fast_decay(dims) if radial is None else radial
    cutoff = cutoff_profile(dims) if cutoff is None else cutoff
    m = radial.region_constant() if m is None else m
    rho = 100.0 * m if rho is None else rho
    if rho / (m * epsilon) < 10:
        raise RegionOverlap(f"rho/(m eps) = {rho / (m * epsilon):.3g} < 10")
    scale = rho * math.exp(2 * cutoff.width) / cutoff.r2
    rho1 = scale * cutoff.r0
    profile = rescale_translate(radial, epsilon)
    amplitude = radial.tail_constant * epsilon**dims.alpha0

    t_lo = -math.log(rho1) - 2.0
    t_hi = -math.log(epsilon / (10 * m))
    count = int(math.ceil((t_hi - t_lo) / step))
    t = t_lo + step * np.arange(count + 1)
    big, big_d, big_dd = profile.evaluate(t)
    small, small_d, small_dd = _outer_factor(t, dims, cutoff, scale, amplitude)
    t_out, t_in = -math.log(rho), -math.log(rho / 10)
    width = t_in - t_out
    chi, chi_d, chi_dd = _smoothstep((t - t_out) / width)
    chi_d, chi_dd = chi_d / width, chi_dd / width**2
    gap, gap_d, gap_dd = big - small, big_d - small_d, big_dd - small_dd
    v = small + chi * gap
    vd = small_d + chi * gap_d + chi_d * gap
    vdd = small_dd + chi * gap_dd + 2 * chi_d * gap_d + chi_dd * gap

    r = np.exp(-t)
    region = np.select(
        [r < epsilon / m, r <= m * epsilon, r < rho, r < rho1], ["inner", "neck", "transition", "cutoff"], "outer"
    )
    s1, s2 = _normalized_sigmas(vd / v, vdd / v, dims)
    return GluedProfile(dims, epsilon, m, rho, rho1, scale, (rho / 10, rho), t, v, vd, vdd, region, s1, s2)


def _normalized_sigmas(log_slope, ratio2, dims: ModelDims):
    """sigma_1(B)/v^2 and sigma_2(B)/v^4 from v'/v and v''/v (B is quadratic in v)."""
    tensor = radial_b_tensor(1.0, log_slope, ratio2, dims)
    return elementary_symmetric(tensor, 1), elementary_symmetric(tensor, 2)


def _fd_derivatives(f: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    first_w = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
    second_w = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])
    first = np.full_like(f, np.nan)
    second = np.full_like(f, np.nan)
    first[4:-4] = np.convolve(f, first_w[::-1], mode="valid") / h
    second[4:-4] = np.convolve(f, second_w[::-1], mode="valid") / (h * h)
    return first, second


@dataclass(frozen=True)
class RegionResidual:
    region: str
    sup_residual: float  # sup |sigma_2(B) - c u^q| for the Euclidean factor u
    sup_relative: float  # sup of |sigma_2(B) - c u^q| / (sigma_1(B)^2 + c u^q)


def residual_scan(glued: GluedProfile, dims: Optional[ModelDims] = None) -> tuple[list, np.ndarray]:
    """Finite-difference residual of the glued factor, per region.

    Eighth-order differences of log v in t feed the normalized tensor; the
    Euclidean residual r^{-n} v^4 (sigma_2(B)/v^4 - c v^{q-4}) is assembled in
    log form to avoid overflow.  The relative residual divides by
    sigma_1(B)^2 + c u^q, the natural size of both terms, so it stays
    meaningful where sigma_2(B) nearly cancels.  Returns the region table and
    the pointwise relative residual (NaN at the grid ends).
    """
    dims = glued.dims if dims is None else dims
    h = float(glued.t[1] - glued.t[0])
    log_v = np.log(glued.v)
    slope, curvature = _fd_derivatives(log_v, h)
    sigma1, sigma2 = _normalized_sigmas(slope, curvature + slope * slope, dims)
    q = float(dims.q)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore", under="ignore"):
        source = float(dims.c) * np.exp((q - 4) * log_v)
        defect = sigma2 - source
        relative = np.abs(defect) / (sigma1 * sigma1 + source)
        absolute = np.exp(dims.n * glued.t + 4 * log_v + np.log(np.abs(defect)))
    rows = []
    r = glued.r
    for name in list(REGIONS) + ["splice"]:
        if name == "splice":
            mask = (r >= glued.splice[0]) & (r <= glued.splice[1])
        else:
            mask = glued.region == name
        mask = mask & np.isfinite(relative)
        if not np.any(mask):
            continue
        rows.append(RegionResidual(name, float(np.max(absolute[mask])), float(np.max(np.abs(relative[mask])))))
    return rows, relative


def splice_decay(dims: ModelDims, eps_list: Sequence[float] = (0.1, 0.05, 0.025), radial=None, cutoff=None):
    """Sup splice residual per epsilon and the fitted log-log order."""
    radial = solve_fast_decay(dims) if radial is None else radial
    cutoff = cutoff_profile(dims) if cutoff is None else cutoff
    m = radial.region_constant()
    sups = []
    for eps in eps_list:
        glued = assemble_glued(dims, eps, radial, cutoff, m=m)
        rows, _ = residual_scan(glued)
        sups.append(next(row.sup_residual for row in rows if row.region == "splice"))
    order = float(np.polyfit(np.log(eps_list), np.log(sups), 1)[0])
    return list(eps_list), sups, order
