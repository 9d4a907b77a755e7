"""Fast-decay radial solution of the sigma_k equation on the cylinder.

The unknown is v(t) with t = -log r.  Writing y = v'/v and s = c v^(q-2k), the
equation sigma_k(B) = c v^q is linear in v'' and becomes the autonomous planar
system

    (log v)' = y,    y' = F(y, s) - y^2.

Equilibria with s = 0 are the exponential tails v ~ C e^{alpha t}; the
equilibrium (y, v) = (0, v_inf) is the cylinder.  The fast-decay solution is
the unstable manifold of the saddle at (alpha0, s = 0), integrated forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DegenerateCoefficient, DomainError, ShootingFailed
from .geometry import (
    DiagonalTensor,
    ModelDims,
    _symmetric_coefficients,
    elementary_symmetric,
    radial_b_tensor,
)

__all__ = [
    "PhaseState",
    "RadialTolerances",
    "RadialProfile",
    "second_derivative_closure",
    "exponential_ansatz_roots",
    "solve_fast_decay",
    "rescale_translate",
    "to_u_picture",
    "from_u_picture",
    "profile_diagnostics",
    "ode_residual",
    "phase_jacobian",
    "equilibrium_profile",
]


@dataclass(frozen=True)
class PhaseState:
    v: float
    vdot: float
    t: float = 0.0


@dataclass(frozen=True)
class RadialTolerances:
    launch_fraction: float = 1e-8  # v at launch, relative to v_inf
    rtol: float = 1e-12
    atol: float = 1e-14
    converge: float = 1e-10  # |v - v_inf| + |v'| stopping threshold
    max_span: float = 60.0  # allowed t-length after the gauge crossing
    grid_step: float = 0.01
    rate: float = 0.01  # tolerance on the measured decay rate
    tail: float = 1e-3  # relative tolerance defining the tail-entry points
    resolve: float = 1e-12  # smallest c v^(q-2k) kept on the sampled grid


def _closure_parts(y, dims: ModelDims):
    n, k = dims.n, dims.k
    g = float(dims.gauge)
    a = (n - k) / (n - 2 * k)
    b = k / (n - 2 * k)
    head = -g + a * y * y
    k2 = g - b * y * y
    k3 = -g - y - b * y * y
    rest = DiagonalTensor(((k2, dims.N - 1), (k3, dims.p)))
    coeffs = _symmetric_coefficients(rest, k)
    return head, coeffs[k - 1], coeffs[k]


def _normalized_vddot(y, s, dims: ModelDims):
    """v''/v from y = v'/v and s = c v^(q-2k); sigma_k is affine in kappa_1."""
    head, lead, tail = _closure_parts(y, dims)
    if np.any(np.abs(lead) < 1e-14):
        raise DegenerateCoefficient("coefficient of v'' vanished")
    kappa1 = (s - tail) / lead
    return head - kappa1


def _source(v, dims: ModelDims):
    return float(dims.c) * v ** float(dims.q - 2 * dims.k)


def second_derivative_closure(state: PhaseState, dims: ModelDims) -> float:
    """The unique v'' with sigma_k(B(v, v', v'')) = c v^q."""
    if state.v <= 0:
        raise DomainError("v must be positive")
    y = state.vdot / state.v
    return state.v * _normalized_vddot(y, _source(state.v, dims), dims)


def _ansatz_polynomial(dims: ModelDims) -> np.polynomial.Polynomial:
    # sigma_k(B)/v^{2k} for v = e^{alpha t}, dropping the source term.
    degree = 2 * dims.k
    nodes = np.cos(np.pi * (np.arange(4 * degree + 1) + 0.5) / (4 * degree + 1)) * (dims.n + 2)
    values = []
    for alpha in nodes:
        head, lead, tail = _closure_parts(alpha, dims)
        values.append((head - alpha * alpha) * lead + tail)
    return np.polynomial.Polynomial.fit(nodes, values, degree).convert()


def exponential_ansatz_roots(dims: ModelDims) -> list[float]:
    """Positive real exponents alpha for which e^{alpha t} solves the source-free equation."""
    poly = _ansatz_polynomial(dims)
    deriv = poly.deriv()
    out = []
    for root in poly.roots():
        if abs(root.imag) > 1e-7 or root.real <= 1e-12:
            continue
        x = root.real
        for _ in range(4):
            d = deriv(x)
            if d == 0:
                break
            x -= poly(x) / d
        if all(abs(x - other) > 1e-9 for other in out):
            out.append(float(x))
    return sorted(out)


@dataclass
class RadialProfile:
    """Samples of V_eps on a uniform t-grid, with the underlying dense solution."""

    dims: ModelDims
    epsilon: float
    t: np.ndarray
    v: np.ndarray
    vdot: np.ndarray
    vddot: np.ndarray
    v_inf: float
    alpha0: float
    alpha0_stderr: float
    tail_constant: float
    candidates: list = field(default_factory=list)
    dense: Optional[Callable] = field(default=None, repr=False)
    t_offset: float = 0.0  # raw integration time of the gauge crossing
    t_range: tuple = (0.0, 0.0)  # raw integration interval
    tail_rate: float = float("nan")  # launch exponent of the analytic left tail

    @property
    def grid(self) -> np.ndarray:
        return self.t

    @property
    def step(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def kappa(self) -> DiagonalTensor:
        return radial_b_tensor(self.v, self.vdot, self.vddot, self.dims)

    @property
    def kappa_grid(self) -> np.ndarray:
        return np.stack([value for value, _ in self.kappa.blocks], axis=1)

    def sigmas(self) -> tuple[np.ndarray, np.ndarray]:
        tensor = self.kappa
        return elementary_symmetric(tensor, 1), elementary_symmetric(tensor, 2)

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(V, V', V'') of V_eps at arbitrary t.

        Left of the integration window the launch tail C e^{alpha t} is used
        (relative error of order v^(q-4) < 1e-20); right of it the profile is
        frozen at v_inf (error below the convergence threshold).
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.dense is None:
            raise DomainError("profile carries no dense solution")
        raw = t + math.log(self.epsilon) + self.t_offset
        lo, hi = self.t_range
        v = np.empty_like(raw)
        vd = np.empty_like(raw)
        vdd = np.empty_like(raw)
        left = raw < lo
        right = raw > hi
        mid = ~(left | right)
        if np.any(mid):
            ell, y = self.dense(raw[mid])
            vm = np.exp(ell)
            v[mid] = vm
            vd[mid] = vm * y
            vdd[mid] = vm * _normalized_vddot(y, _source(vm, self.dims), self.dims)
        if np.any(left):
            rate = self.alpha0 if math.isnan(self.tail_rate) else self.tail_rate
            base = self.tail_constant * self.epsilon**rate
            vl = base * np.exp(rate * t[left])
            v[left] = vl
            vd[left] = rate * vl
            vdd[left] = rate**2 * vl
        if np.any(right):
            v[right] = self.v_inf
            vd[right] = 0.0
            vdd[right] = 0.0
        return v, vd, vdd

    def resample(self, t: np.ndarray) -> "RadialProfile":
        v, vd, vdd = self.evaluate(t)
        return replace(self, t=np.asarray(t, dtype=float), v=v, vdot=vd, vddot=vdd)

    def tail_entry(self, tol: Optional[float] = None) -> tuple[float, float]:
        """Return (T_plus, T_minus): |V/v_inf - 1| <= tol for t >= T_plus and
        |V e^{-alpha0 t}/C_eps - 1| <= tol for t <= T_minus."""
        tol = 1e-3 if tol is None else tol
        ratio_plus = np.abs(self.v / self.v_inf - 1.0)
        bad = np.nonzero(ratio_plus > tol)[0]
        t_plus = self.t[bad[-1] + 1] if bad.size and bad[-1] + 1 < self.t.size else self.t[0]
        base = self.tail_constant * self.epsilon ** self.alpha0
        ratio_minus = np.abs(self.v * np.exp(-self.alpha0 * self.t) / base - 1.0)
        bad = np.nonzero(ratio_minus > tol)[0]
        t_minus = self.t[bad[0] - 1] if bad.size and bad[0] > 0 else self.t[-1]
        return float(t_plus), float(t_minus)

    def region_constant(self, tol: Optional[float] = None) -> float:
        """The constant m with both tails entered for |t - log(1/eps)| >= log m."""
        t_plus, t_minus = self.tail_entry(tol)
        shift = -math.log(self.epsilon)
        return math.exp(max(t_plus - shift, shift - t_minus, 0.0))


def _integrate_candidate(alpha: float, dims: ModelDims, tol: RadialTolerances):
    v_inf = dims.v_inf
    power = float(dims.q - 2 * dims.k)
    c = float(dims.c)
    ell0 = math.log(tol.launch_fraction * v_inf)
    ell_cross = math.log(v_inf / 2)

    def rhs(_, state):
        ell, y = state
        s = c * math.exp(power * ell)
        return [y, _normalized_vddot(y, s, dims) - y * y]

    def cross(_, state):
        return state[0] - ell_cross

    cross.direction = 1

    def converged(_, state):
        v = math.exp(state[0])
        return abs(v - v_inf) + abs(v * state[1]) - tol.converge

    converged.terminal = True
    converged.direction = -1

    def degenerate(_, state):
        return abs(_closure_parts(state[1], dims)[1]) - 1e-8

    degenerate.terminal = True

    def runaway(_, state):
        return min(50.0 - abs(state[1]), math.log(50 * v_inf) - state[0])

    runaway.terminal = True

    rise = (ell_cross - ell0) / alpha
    t_end = 4 * rise + tol.max_span + 20
    sol = solve_ivp(
        rhs,
        (0.0, t_end),
        [ell0, alpha],
        method="DOP853",
        rtol=tol.rtol,
        atol=tol.atol,
        dense_output=True,
        events=[cross, converged, degenerate, runaway],
    )
    info = {"alpha": alpha, "status": "failed", "message": sol.message}
    if not sol.success:
        return info, None
    crossings = sol.t_events[0]
    if crossings.size == 0:
        info["message"] = "never reached v_inf/2"
        return info, None
    if sol.t_events[2].size:
        info["message"] = "degenerate closure coefficient"
        return info, None
    if sol.t_events[3].size:
        info["message"] = "trajectory left the admissible region"
        return info, None
    if sol.t_events[1].size == 0:
        info["message"] = "no convergence to v_inf"
        return info, None
    t_cross = float(crossings[0])
    t_conv = float(sol.t_events[1][0])
    if t_conv - t_cross > tol.max_span:
        info["message"] = f"convergence took {t_conv - t_cross:.3g} > {tol.max_span}"
        return info, None
    info.update(status="converged", message="ok", t_cross=t_cross, t_converged=t_conv)
    return info, sol


def solve_fast_decay(dims: ModelDims, tol: Optional[RadialTolerances] = None) -> RadialProfile:
    """Integrate the unstable manifold of every positive tail exponent and keep
    the connection that converges to v_inf with the fast rate alpha0^-."""
    tol = tol or RadialTolerances()
    expected = dims.alpha0
    candidates = []
    chosen = None
    for alpha in exponential_ansatz_roots(dims):
        info, sol = _integrate_candidate(alpha, dims, tol)
        candidates.append(info)
        if sol is not None and abs(alpha - expected) <= tol.rate:
            if chosen is None or abs(alpha - expected) < abs(chosen[0]["alpha"] - expected):
                chosen = (info, sol)
    if chosen is None:
        raise ShootingFailed(f"no admissible connection; candidates: {candidates}")
    info, sol = chosen
    info["selected"] = True
    alpha = info["alpha"]
    h = tol.grid_step
    t_cross = info["t_cross"]
    k_lo = math.ceil(-t_cross / h)
    k_hi = math.floor((info["t_converged"] - t_cross) / h)
    t = np.arange(k_lo, k_hi + 1) * h
    ell, y = sol.sol(t + t_cross)
    # Below this level sigma_k(B) = c v^q is smaller than the rounding error of
    # its evaluation from (v, v', v''); that stretch is the exact exponential tail.
    resolved = np.nonzero(_source(np.exp(ell), dims) >= tol.resolve)[0]
    start = resolved[0] if resolved.size else 0
    t, ell, y = t[start:], ell[start:], y[start:]
    v = np.exp(ell)
    vdot = v * y
    vddot = v * _normalized_vddot(y, _source(v, dims), dims)
    # launch state is exactly (log v, v'/v) = (ell0, alpha) at raw time 0, i.e. t = -t_cross
    tail_constant = float(math.exp(float(sol.y[0][0]) + alpha * t_cross))
    profile = RadialProfile(
        dims=dims,
        epsilon=1.0,
        t=t,
        v=v,
        vdot=vdot,
        vddot=vddot,
        v_inf=dims.v_inf,
        alpha0=alpha,
        alpha0_stderr=0.0,
        tail_constant=tail_constant,
        candidates=candidates,
        dense=sol.sol,
        t_offset=t_cross,
        t_range=(float(sol.t[0]), float(sol.t[-1])),
        tail_rate=alpha,
    )
    fit, err = _left_tail_rate(profile)
    profile.alpha0 = fit
    profile.alpha0_stderr = err
    return profile


def _left_tail_rate(profile: RadialProfile, decade: float = 10.0) -> tuple[float, float]:
    # slope of log V over the lowest decade of samples, provided it is a genuine tail
    if profile.v[0] > 1e-3 * profile.v_inf:
        return float("nan"), float("nan")
    mask = profile.v <= decade * profile.v[0]
    if mask.sum() < 3:
        return float("nan"), float("nan")
    x = profile.t[mask]
    yv = np.log(profile.v[mask])
    coef, cov = np.polyfit(x, yv, 1, cov=True)
    return float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0)))


def rescale_translate(profile: RadialProfile, epsilon: float) -> RadialProfile:
    """V_eps(t) = V_1(t + log eps): the same samples on a shifted grid."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    shift = math.log(epsilon / profile.epsilon)
    return replace(profile, epsilon=epsilon, t=profile.t - shift)


def to_u_picture(profile: RadialProfile) -> tuple[np.ndarray, np.ndarray]:
    """(r, U) with r = e^{-t} and U = r^{-(n-2k)/(2k)} V."""
    shift = float(profile.dims.shift)
    r = np.exp(-profile.t)
    return r, np.exp(shift * profile.t) * profile.v


def from_u_picture(r: np.ndarray, u: np.ndarray, dims: ModelDims) -> tuple[np.ndarray, np.ndarray]:
    shift = float(dims.shift)
    return -np.log(r), r ** shift * u


def _first_derivative_fd(f: np.ndarray, h: float) -> np.ndarray:
    # eighth-order central differences, NaN within four points of the ends
    weights = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
    out = np.full_like(f, np.nan)
    out[4:-4] = np.convolve(f, weights[::-1], mode="valid") / h
    return out


def ode_residual(profile: RadialProfile, method: str = "fd") -> np.ndarray:
    """sigma_k(B) - c v^q along the profile.

    ``method="fd"`` rebuilds v'' from eighth-order differences of the sampled
    v' (independent of the integrator's closure); ``"closure"`` uses the
    stored v''.
    """
    dims = profile.dims
    if method == "fd":
        vddot = _first_derivative_fd(profile.vdot, profile.step)
        keep = ~np.isnan(vddot)
        v, vd, vdd = profile.v[keep], profile.vdot[keep], vddot[keep]
    elif method == "closure":
        v, vd, vdd = profile.v, profile.vdot, profile.vddot
    else:
        raise DomainError(f"unknown method {method!r}")
    tensor = radial_b_tensor(v, vd, vdd, dims)
    return elementary_symmetric(tensor, dims.k) - float(dims.c) * v ** float(dims.q)


def phase_jacobian(dims: ModelDims, v: Optional[float] = None, vdot: float = 0.0) -> np.ndarray:
    """Jacobian of (v, v') -> (v', v'') by complex-step differentiation."""
    v = dims.v_inf if v is None else v
    h = 1e-20

    def accel(vv, vd):
        y = vd / vv
        return vv * _normalized_vddot(y, float(dims.c) * vv ** float(dims.q - 2 * dims.k), dims)

    d_v = accel(complex(v, h), complex(vdot, 0.0)).imag / h
    d_vd = accel(complex(v, 0.0), complex(vdot, h)).imag / h
    return np.array([[0.0, 1.0], [d_v, d_vd]])


def equilibrium_profile(dims: ModelDims, t: np.ndarray) -> RadialProfile:
    """The cylinder V = v_inf sampled on ``t`` (no tail, no dense solution)."""
    t = np.asarray(t, dtype=float)
    ones = np.ones_like(t)
    return RadialProfile(
        dims=dims,
        epsilon=1.0,
        t=t,
        v=dims.v_inf * ones,
        vdot=0 * ones,
        vddot=0 * ones,
        v_inf=dims.v_inf,
        alpha0=float("nan"),
        alpha0_stderr=float("nan"),
        tail_constant=float("nan"),
    )


def profile_diagnostics(profile: RadialProfile) -> dict:
    """Measured asymptotics, cone margins and ODE residuals of a profile."""
    s1, s2 = profile.sigmas()
    alpha_fit, alpha_err = _left_tail_rate(profile)
    flags = []
    if math.isnan(alpha_fit):
        flags.append("alpha0 fit undefined: no left tail")
    peak = int(np.argmax(profile.v))
    res_fd = ode_residual(profile, "fd")
    res_cl = ode_residual(profile, "closure")
    scale = float(profile.dims.c) * profile.v_inf ** float(profile.dims.q)
    report = {
        "v_inf": profile.v_inf,
        "v_inf_residual": float(abs(profile.v[-1] - profile.v_inf)),
        "alpha0_fit": alpha_fit,
        "alpha0_stderr": alpha_err,
        "alpha0_closed_form": profile.dims.alpha0,
        "sup_r_shift_u": float(profile.v[peak]),
        "sup_location_t": float(profile.t[peak]),
        "min_sigma1": float(np.min(s1)),
        "min_sigma2": float(np.min(s2)),
        "ode_residual_fd": float(np.max(np.abs(res_fd))) if res_fd.size else float("nan"),
        "ode_residual_fd_relative": float(np.max(np.abs(res_fd)) / scale) if res_fd.size else float("nan"),
        "ode_residual_closure": float(np.max(np.abs(res_cl))),
        "tail_constant": profile.tail_constant,
        "flags": flags,
    }
    if profile.dense is not None:
        report["region_constant_m"] = profile.region_constant()
    return report
