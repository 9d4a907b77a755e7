"""Linearization of the radial sigma_k equation around a profile.

In the cylindrical picture the linearized operator on a mode with angular
eigenvalue lambda and tangential frequency zeta reads

    L w = a0 w + a1 w' + a2 w'' - a3 lambda w - a4 e^{-2t} |zeta|^2 w,

with coefficients built from the Newton tensor T^{k-1} of B (block values
S1, S2, S3).  The Euclidean picture is reached through w = r^g phi,
g = (n-2k)/(2k), and the operator identity  Lcal phi = r^{-n} L[r^g phi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import ConeViolation, DomainError, GridMismatch
from .geometry import DiagonalTensor, ModelDims, _symmetric_coefficients, newton_tensor
from .radial import RadialProfile

__all__ = [
    "LinearizedCoeffs",
    "LimitCoeffs",
    "KernelOracles",
    "RPictureCoeffs",
    "state_coefficients",
    "linearized_coeffs",
    "limit_coeffs",
    "printed_plus_coeffs",
    "printed_minus_coeffs",
    "apply_mode_operator",
    "apply_limit_operator",
    "kernel_oracles",
    "kernel_residual_ratios",
    "kernel_tail_slopes",
    "r_picture_coeffs",
    "integrating_factor",
    "apply_r_operator",
    "weighted_inner_product",
]


def _ratios(dims: ModelDims, exact: bool):
    n, k = dims.n, dims.k
    if exact:
        return Fraction(n - k, n - 2 * k), Fraction(k, n - 2 * k), Fraction(dims.gauge)
    return (n - k) / (n - 2 * k), k / (n - 2 * k), float(dims.gauge)


def state_coefficients(v, vdot, vddot, dims: ModelDims, source, exact: bool = False):
    """Coefficients (a0..a4) and Newton block values (S1, S2, S3) at a state.

    ``source`` is c v^(q-1); pass 0 to drop the right-hand side.  The
    zero-order coefficient uses the on-shell identity
    trace(T^{k-1} B) = k sigma_k(B) = k c v^q.
    """
    a, b, g = _ratios(dims, exact)
    k, q, N, p = dims.k, dims.q, dims.N, dims.p
    if not exact:
        q = float(q)
    k1 = -g * v * v - v * vddot + a * vdot * vdot
    k2 = g * v * v - b * vdot * vdot
    k3 = -g * v * v - v * vdot - b * vdot * vdot
    tensor = DiagonalTensor(((k1, 1), (k2, N - 1), (k3, p)))
    s1, s2, s3 = newton_tensor(tensor, k - 1).values
    grad = vdot * vdot / v
    a0 = (
        (k - q) * source
        - a * s1 * grad
        + b * (N - 1) * s2 * grad
        + b * p * s3 * grad
        - g * s1 * v
        + (N - 1) * g * s2 * v
        - p * g * s3 * v
    )
    a1 = 2 * a * vdot * s1 - 2 * b * (N - 1) * vdot * s2 + p * (-v - 2 * b * vdot) * s3
    a2 = -v * s1
    a3 = -v * s2
    a4 = -v * s3
    return (a0, a1, a2, a3, a4), (s1, s2, s3), tensor


@dataclass(frozen=True)
class LinearizedCoeffs:
    dims: ModelDims
    t: np.ndarray
    v: np.ndarray
    a: tuple  # a0..a4 per sample
    newton: tuple  # S1, S2, S3 per sample

    @property
    def grid(self) -> np.ndarray:
        return self.t

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0])

    def normalized(self) -> tuple:
        """a_l / V^(2k-1): the coefficients whose limits are b_l and d_l."""
        scale = self.v ** (2 * self.dims.k - 1)
        return tuple(c / scale for c in self.a)


def linearized_coeffs(
    profile: RadialProfile, dims: Optional[ModelDims] = None, check_cone: bool = True
) -> LinearizedCoeffs:
    """Linearization coefficients along a profile."""
    dims = dims or profile.dims
    v, vd, vdd = profile.v, profile.vdot, profile.vddot
    source = float(dims.c) * v ** (float(dims.q) - 1)
    coeffs, newton, tensor = state_coefficients(v, vd, vdd, dims, source)
    if check_cone:
        sig = _symmetric_coefficients(tensor, dims.k)
        for order in range(1, dims.k + 1):
            bad = np.nonzero(np.asarray(sig[order]) <= 0)[0]
            if bad.size:
                raise ConeViolation(f"sigma_{order} <= 0 at t = {profile.t[bad[0]]:.6g}")
    return LinearizedCoeffs(dims=dims, t=profile.t, v=v, a=coeffs, newton=newton)


@dataclass(frozen=True)
class LimitCoeffs:
    side: str  # "plus_infinity" (t -> +inf) or "minus_infinity" (t -> -inf)
    coeffs: tuple  # b0..b4 or d0..d4
    newton: tuple  # normalized S1, S2, S3
    b0_tilde: object = None
    alpha0: Optional[float] = None

    def __getitem__(self, index: int):
        return self.coeffs[index]


def limit_coeffs(dims: ModelDims, side: str, alpha0: Optional[float] = None) -> LimitCoeffs:
    """Limits of a_l / V^(2k-1) at either end of the cylinder.

    The plus side is exact: with V = v_inf the normalized source term
    c v_inf^(q-2k) equals c_{n,p,k} g^k, a rational.  The minus side evaluates
    the coefficients on the tail V = e^{alpha0 t}, where the source term is of
    higher order and drops out.
    """
    if side in ("plus", "plus_infinity", "+"):
        g = Fraction(dims.gauge)
        source = dims.c_product * g ** dims.k
        coeffs, newton, _ = state_coefficients(Fraction(1), Fraction(0), Fraction(0), dims, source, exact=True)
        b0, b1, b2 = coeffs[0], coeffs[1], coeffs[2]
        return LimitCoeffs("plus_infinity", coeffs, newton, b0_tilde=b0 - b1 * b1 / (4 * b2))
    if side in ("minus", "minus_infinity", "-"):
        alpha = dims.alpha0 if alpha0 is None else float(alpha0)
        coeffs, newton, _ = state_coefficients(1.0, alpha, alpha * alpha, dims, 0.0)
        return LimitCoeffs("minus_infinity", tuple(float(c) for c in coeffs), tuple(float(s) for s in newton), alpha0=alpha)
    raise DomainError(f"unknown side {side!r}")


def printed_plus_coeffs(dims: ModelDims) -> dict:
    """Closed-form plus-side coefficients for k = 2, in three equivalent forms for b0."""
    if dims.k != 2:
        raise DomainError("closed forms are stated for k = 2")
    n, p, N = dims.n, dims.p, dims.N
    g = Fraction(n - 4, 8)
    q = dims.q
    c_times_power = dims.c * Fraction(dims.c_product, math.comb(n, 2))  # c v_inf^(q-4)
    b0_long = (2 - q) * c_times_power - g * g * (n - 2 * p - 1) + (N - 1) * g * g * (n - 2 * p - 3) - p * g * g * (n - 2 * p - 1)
    b0_mid = g * g * ((2 - q) * dims.c_product - (p + 1) * (n - 2 * p - 1) + (N - 1) * (n - 2 * p - 3))
    b0_short = -g * (4 * p * p + 8 * p - 4 * n * p - 5 * n + 4 + n * n)
    return {
        "b0_long": b0_long,
        "b0_mid": b0_mid,
        "b0_short": b0_short,
        "b1": -p * g * (n - 2 * p - 1),
        "b2": -g * (n - 2 * p - 1),
        "b3": -g * (n - 2 * p - 3),
        "b4": -g * (n - 2 * p - 1),
    }


def printed_minus_coeffs(dims: ModelDims, alpha0: Optional[float] = None) -> dict:
    """Closed-form minus-side Newton scalars and coefficients for k = 2."""
    if dims.k != 2:
        raise DomainError("closed forms are stated for k = 2")
    n, p = dims.n, dims.p
    al = dims.alpha0 if alpha0 is None else alpha0
    g = (n - 4) / 8
    s1 = g * (n - 2 * p - 1) - al * p + al * al * 2 * (1 - n) / (n - 4)
    s2 = g * (n - 2 * p - 3) - al * p + al * al * 2 * (3 - n) / (n - 4)
    s3 = g * (n - 2 * p - 1) - al * (p - 1) + al * al * 2 * (3 - n) / (n - 4)
    d0 = (
        -(n - 2) / (n - 4) * s1 * al * al
        + 2 / (n - 4) * (n - p - 1) * s2 * al * al
        + 2 / (n - 4) * p * s3 * al * al
        - g * s1
        + (n - p - 1) * g * s2
        - p * g * s3
    )
    d1 = 2 * (n - 2) / (n - 4) * al * s1 - 4 / (n - 4) * (n - p - 1) * al * s2 + p * (-1 - 4 / (n - 4) * al) * s3
    return {"s1": s1, "s2": s2, "s3": s3, "d0": d0, "d1": d1, "d2": -s1, "d3": -s2, "d4": -s3}


def _sphere_lambda(level: int, N: int) -> int:
    if level < 0:
        raise DomainError("mode level must be nonnegative")
    return level * (level + N - 2)


def _derivatives(w: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    # second-order centered differences, second-order one-sided at the ends
    first = np.gradient(w, h, edge_order=2)
    second = np.empty_like(w)
    second[1:-1] = (w[2:] - 2 * w[1:-1] + w[:-2]) / (h * h)
    second[0] = (2 * w[0] - 5 * w[1] + 4 * w[2] - w[3]) / (h * h)
    second[-1] = (2 * w[-1] - 5 * w[-2] + 4 * w[-3] - w[-4]) / (h * h)
    return first, second


def apply_mode_operator(coeffs: LinearizedCoeffs, level: int, w: np.ndarray, zeta: float = 0.0) -> np.ndarray:
    """Finite-difference application of the mode operator to samples of w."""
    w = np.asarray(w, dtype=float)
    if w.shape != coeffs.t.shape:
        raise GridMismatch(f"grid function has shape {w.shape}, coefficients {coeffs.t.shape}")
    if w.size < 5:
        raise GridMismatch("need at least five samples")
    lam = _sphere_lambda(level, coeffs.dims.N)
    a0, a1, a2, a3, a4 = coeffs.a
    first, second = _derivatives(w, coeffs.step)
    return a0 * w + a1 * first + a2 * second - a3 * lam * w - a4 * np.exp(-2 * coeffs.t) * zeta * zeta * w


def apply_limit_operator(limit: LimitCoeffs, lam, w, dw, d2w, t=None, zeta=0):
    """Constant-coefficient limit operator applied to given derivatives (exact when inputs are)."""
    c0, c1, c2, c3, c4 = limit.coeffs
    out = c0 * w + c1 * dw + c2 * d2w - c3 * lam * w
    if zeta:
        out = out - c4 * np.exp(-2 * t) * zeta * zeta * w
    return out


@dataclass(frozen=True)
class KernelOracles:
    t: np.ndarray
    r: np.ndarray
    w_sharp: np.ndarray  # dilation generator, mode 0
    w_diamond: np.ndarray  # translation generator, mode 1 with zeta = 0
    phi_sharp: np.ndarray
    phi_diamond: np.ndarray


def kernel_oracles(profile: RadialProfile, dims: Optional[ModelDims] = None) -> KernelOracles:
    """Kernel elements from the symmetries of the base solution.

    phi_sharp = r U' + g U generates dilations; in the t-picture it is -V'.
    phi_diamond = U' generates translations across the singular set; in the
    t-picture it is -e^t (g V + V').
    """
    dims = dims or profile.dims
    if profile.epsilon != 1.0:
        raise DomainError("kernel oracles are defined for the base solution")
    g = float(dims.shift)
    t = profile.t
    r = np.exp(-t)
    w_sharp = -profile.vdot
    w_diamond = -np.exp(t) * (g * profile.v + profile.vdot)
    return KernelOracles(
        t=t,
        r=r,
        w_sharp=w_sharp,
        w_diamond=w_diamond,
        phi_sharp=r ** (-g) * w_sharp,
        phi_diamond=r ** (-g) * w_diamond,
    )


def kernel_residual_ratios(
    profile: RadialProfile, centers=(-5.0, 0.0, 5.0), base_step: float = 0.1, halvings: int = 3
) -> dict:
    """Successive ratios of the pointwise FD residual of both kernel oracles.

    The oracles solve the continuous equations, so the residual at a fixed
    point is pure truncation error and the ratios approach 4 for the
    second-order stencil.  Each grid is t = center + j h, j = -3..3.
    """
    out = {"sharp": [], "diamond": []}
    for center in centers:
        sharp, diamond = [], []
        for index in range(halvings + 1):
            h = base_step / 2**index
            t = center + np.arange(-3, 4) * h
            local = profile.resample(t)
            coeffs = linearized_coeffs(local)
            oracles = kernel_oracles(local)
            sharp.append(apply_mode_operator(coeffs, 0, oracles.w_sharp)[3])
            diamond.append(apply_mode_operator(coeffs, 1, oracles.w_diamond)[3])
        out["sharp"].append([a / b for a, b in zip(sharp[:-1], sharp[1:])])
        out["diamond"].append([a / b for a, b in zip(diamond[:-1], diamond[1:])])
    return out


def kernel_tail_slopes(profile: RadialProfile, span: float = 3.0) -> dict:
    """Log-log slopes of phi_sharp as r -> inf and phi_diamond as r -> 0 on the stored samples."""
    oracles = kernel_oracles(profile)
    log_r = np.log(oracles.r)
    far = profile.t <= profile.t[0] + span
    near = profile.t >= profile.t[-1] - span
    sharp = float(np.polyfit(log_r[far], np.log(np.abs(oracles.phi_sharp[far])), 1)[0])
    diamond = float(np.polyfit(log_r[near], np.log(np.abs(oracles.phi_diamond[near])), 1)[0])
    return {"sharp_at_infinity": sharp, "diamond_at_origin": diamond}


@dataclass(frozen=True)
class RPictureCoeffs:
    """Lcal phi = A0 phi + A1 phi'/r + A2 phi'' + A3 Delta_theta phi / r^2 + A4 Delta_z phi."""

    dims: ModelDims
    t: np.ndarray
    r: np.ndarray
    A: tuple
    sign: float  # +1: the operator r^{-n} L[r^g .]; -1: its negative


def r_picture_coeffs(coeffs: LinearizedCoeffs, positive: bool = True) -> RPictureCoeffs:
    """Euclidean-picture coefficients from the cylindrical ones.

    With w = r^g phi and d/dt = -r d/dr,
        w'  = -r^g (g phi + r phi'),
        w'' =  r^g (g^2 phi + (2g+1) r phi' + r^2 phi''),
    and e^{-2t} = r^2, so r^{-n} L[r^g phi] has the coefficients below with
    the common factor f = r^(g-n+2).  ``positive=True`` returns the negated
    operator, whose second-order coefficient is positive in the cone.
    """
    dims = coeffs.dims
    g = float(dims.shift)
    n = dims.n
    t = coeffs.t
    r = np.exp(-t)
    a0, a1, a2, a3, a4 = coeffs.a
    # factor r^(g-n+2) written as exp(-(g-n+2) t) to stay finite at large |t|
    f = np.exp(-(g - n + 2) * t)
    sign = -1.0 if positive else 1.0
    A0 = sign * f * (a0 - g * a1 + g * g * a2) / (r * r)
    A1 = sign * f * ((2 * g + 1) * a2 - a1)
    A2 = sign * f * a2
    A3 = sign * f * a3
    A4 = sign * f * a4
    return RPictureCoeffs(dims=dims, t=t, r=r, A=(A0, A1, A2, A3, A4), sign=sign)


def _cumulative_simpson(y: np.ndarray, h: float) -> np.ndarray:
    # trapezoid with end corrections: fourth order on smooth data
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]))
    dy = np.gradient(y, h, edge_order=2)
    out -= h * h / 12 * (dy - dy[0])
    return out


def integrating_factor(rc: RPictureCoeffs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(r, H1, H) with H1 = exp int A1/(s A2) ds and H = H1 / A2.

    Then A2 phi'' + A1 phi'/r = H^{-1} (H1 phi')'.  The integral is taken in
    log r, anchored at the largest r of the grid.
    """
    A1, A2 = rc.A[1], rc.A[2]
    if np.any(A2 <= 0):
        raise ConeViolation("second-order coefficient must be positive")
    s = -rc.t  # log r, decreasing along the grid
    order = np.argsort(s)
    h = float(s[order][1] - s[order][0])
    integrand = (A1 / A2)[order]
    log_h1 = _cumulative_simpson(integrand, h)
    log_h1 -= log_h1[-1]
    H1 = np.empty_like(log_h1)
    H1[order] = np.exp(log_h1)
    return rc.r, H1, H1 / A2


def apply_r_operator(rc: RPictureCoeffs, level: int, phi: np.ndarray, zeta: float = 0.0, form: str = "direct") -> np.ndarray:
    """Apply the Euclidean-picture mode operator on the log-uniform r-grid.

    ``form="direct"`` differentiates phi directly; ``form="divergence"`` uses
    H^{-1} (H1 phi')' with a conservative three-point stencil.  Both are
    second-order accurate; only interior samples are returned (ends are NaN).
    """
    A0, A1, A2, A3, A4 = rc.A
    lam = _sphere_lambda(level, rc.dims.N)
    s = -rc.t
    h = float(s[1] - s[0])  # may be negative; formulas below are sign-safe
    r = rc.r
    out = np.full_like(phi, np.nan)
    inner = slice(1, -1)
    if form == "direct":
        d_s = (phi[2:] - phi[:-2]) / (2 * h)
        d_ss = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / (h * h)
        # phi' = phi_s / r,  phi'' = (phi_ss - phi_s) / r^2
        body = A2[inner] * (d_ss - d_s) / r[inner] ** 2 + A1[inner] * d_s / r[inner] ** 2
    elif form == "divergence":
        _, H1, H = integrating_factor(rc)
        flux_weight = H1 / r  # (H1 phi')' = (1/r) d_s (H1/r phi_s)
        mid = np.sqrt(flux_weight[1:] * flux_weight[:-1])
        flux = mid * (phi[1:] - phi[:-1]) / h
        body = (flux[1:] - flux[:-1]) / h / (r[inner] * H[inner])
    else:
        raise DomainError(f"unknown form {form!r}")
    out[inner] = body + (A0[inner] - A3[inner] * lam / r[inner] ** 2 - A4[inner] * zeta * zeta) * phi[inner]
    return out


def weighted_inner_product(rc: RPictureCoeffs, f: np.ndarray, g: np.ndarray) -> float:
    """Discrete int H f g dr on the log-uniform grid (dr = r ds)."""
    _, _, H = integrating_factor(rc)
    h = abs(float(rc.t[1] - rc.t[0]))
    integrand = H * f * g * rc.r
    mask = ~(np.isnan(integrand))
    return float(np.sum(integrand[mask]) * h)
