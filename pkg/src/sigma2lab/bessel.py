"""Modified Bessel functions I_nu and K_nu of real order nu >= 0.

Exponentially scaled values are the primary output so that arguments from
1e-40 to 1e4 can be handled without overflow:

    Ie(x) = e^{-x} I_nu(x),    Ke(x) = e^{x} K_nu(x).

I_nu: the ascending series (all terms positive, so no cancellation) for
x <= 30 + nu^2, the Hankel expansion beyond.  K_nu: Temme's series for
x <= 2 and Steed's continued fraction for x > 2, both at the reduced order
mu = nu - round(nu), followed by forward recurrence in the order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "BesselPair",
    "bessel_pair",
    "bessel_ik_scaled",
    "bessel_i",
    "bessel_k",
    "wronskian_defect",
    "SERIES_CROSSOVER",
]

SERIES_CROSSOVER = 30.0  # plus nu^2: switch point from series to Hankel expansion for I_nu
TEMME_CROSSOVER = 2.0
_EPS = 1e-17
_MAX_TERMS = 100_000

# Taylor coefficients of 1/Gamma(z) = sum_{k>=1} c_k z^k
_RECIP_GAMMA = (
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
)


def _temme_gammas(mu: float) -> tuple[float, float, float, float]:
    """gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu) for |mu| <= 1/2."""
    plus = 0.0  # 1/Gamma(1+mu) = sum c_k mu^{k-1}
    minus = 0.0  # 1/Gamma(1-mu) = sum c_k (-mu)^{k-1}
    gam1 = 0.0  # (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) = -sum_{k even} c_k mu^{k-2}
    gam2 = 0.0  # (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2 = sum_{k odd} c_k mu^{k-1}
    for index, coeff in enumerate(_RECIP_GAMMA):
        k = index + 1
        power = mu ** (k - 1)
        plus += coeff * power
        minus += coeff * power * (-1) ** (k - 1)
        if k % 2 == 0:
            gam1 -= coeff * mu ** (k - 2)
        else:
            gam2 += coeff * power
    return gam1, gam2, plus, minus


def _k_temme(mu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """K_mu and K_{mu+1} for 0 < x <= 2 (unscaled)."""
    half = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < 1e-15 else pimu / math.sin(pimu)
    d = -np.log(half)
    e = mu * d
    fact2 = np.where(np.abs(e) < 1e-15, 1.0, np.sinh(e) / np.where(e == 0, 1.0, e))
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    dd = half * half
    total1 = p.copy()
    mu2 = mu * mu
    for i in range(1, _MAX_TERMS):
        ff = (i * ff + p + q) / (i * i - mu2)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        total = total + delta
        total1 = total1 + c * (p - i * ff)
        if np.all(np.abs(delta) < np.abs(total) * _EPS):
            break
    return total, total1 * 2.0 / x


def _k_steed(mu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scaled e^x K_mu and e^x K_{mu+1} for x > 2 (Steed's CF2).

    Converged entries are frozen: for large x the auxiliary series terms of
    already converged entries would otherwise overflow while smaller
    arguments are still iterating.
    """
    mu2 = mu * mu
    a1 = 0.25 - mu2
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    s = 1.0 + q * delh
    a = -a1
    active = np.arange(x.size)
    for i in range(2, _MAX_TERMS):
        if active.size == 0:
            break
        a -= 2 * (i - 1)
        j = active
        c[j] = -a * c[j] / i
        qnew = (q1[j] - b[j] * q2[j]) / a
        q1[j] = q2[j]
        q2[j] = qnew
        q[j] = q[j] + c[j] * qnew
        b[j] = b[j] + 2.0
        d[j] = 1.0 / (b[j] + a * d[j])
        delh[j] = (b[j] * d[j] - 1.0) * delh[j]
        h[j] = h[j] + delh[j]
        dels = q[j] * delh[j]
        s[j] = s[j] + dels
        active = j[np.abs(dels / s[j]) >= _EPS]
    h = a1 * h
    kmu = np.sqrt(math.pi / (2.0 * x)) / s
    k1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, k1


def _k_scaled(nu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """e^x K_nu(x) and e^x K_{nu+1}(x)."""
    steps = int(nu + 0.5)
    mu = nu - steps
    kmu = np.empty_like(x)
    k1 = np.empty_like(x)
    small = x <= TEMME_CROSSOVER
    if np.any(small):
        a, b = _k_temme(mu, x[small])
        scale = np.exp(x[small])
        kmu[small], k1[small] = a * scale, b * scale
    if np.any(~small):
        kmu[~small], k1[~small] = _k_steed(mu, x[~small])
    with np.errstate(over="ignore", invalid="ignore"):  # K_nu overflows for tiny x and large nu
        for i in range(1, steps + 1):
            kmu, k1 = k1, (mu + i) * (2.0 / x) * k1 + kmu
    return kmu, k1


def _i_series_scaled(nu: float, x: np.ndarray) -> np.ndarray:
    """e^{-x} I_nu(x) from the ascending series."""
    log_first = nu * np.log(0.5 * x) - math.lgamma(nu + 1.0) - x
    term = np.exp(log_first)
    total = term.copy()
    quarter = 0.25 * x * x
    k = 0
    limit = int(np.max(x)) + 60 if x.size else 0
    while k < _MAX_TERMS:
        k += 1
        term = term * quarter / (k * (nu + k))
        total = total + term
        if k > limit or (np.all(term <= total * _EPS) and k > 2):
            break
    return total


def _i_hankel_scaled(nu: float, x: np.ndarray) -> np.ndarray:
    """e^{-x} I_nu(x) from the large-argument expansion."""
    four_nu2 = 4.0 * nu * nu
    term = np.ones_like(x)
    total = np.ones_like(x)
    best = np.abs(term)
    for k in range(1, 200):
        factor = -(four_nu2 - (2 * k - 1) ** 2) / (8.0 * k * x)
        term = term * factor
        grown = np.abs(term) > best
        if np.all(grown):
            break
        total = total + np.where(grown, 0.0, term)
        best = np.minimum(best, np.abs(term))
        if np.all(np.abs(term) < _EPS * np.abs(total)):
            break
    return total / np.sqrt(2.0 * math.pi * x)


def _i_scaled(nu: float, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    crossover = SERIES_CROSSOVER + nu * nu
    low = x <= crossover
    if np.any(low):
        out[low] = _i_series_scaled(nu, x[low])
    if np.any(~low):
        out[~low] = _i_hankel_scaled(nu, x[~low])
    return out


def bessel_ik_scaled(nu: float, x) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(e^{-x} I_nu, e^{-x} I_nu', e^{x} K_nu, e^{x} K_nu') at arguments x > 0.

    The derivatives are of the unscaled functions, scaled by the same factor.
    """
    if nu < 0:
        raise DomainError("order must be nonnegative")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x <= 0):
        raise DomainError("argument must be positive")
    ie = _i_scaled(nu, x)
    ie_next = _i_scaled(nu + 1.0, x)
    ke, ke_next = _k_scaled(nu, x)
    ie_prime = ie_next + nu / x * ie
    with np.errstate(over="ignore", invalid="ignore"):
        ke_prime = nu / x * ke - ke_next
    return ie, ie_prime, ke, ke_prime


def bessel_i(nu: float, x) -> np.ndarray:
    ie = bessel_ik_scaled(nu, x)[0]
    return ie * np.exp(np.atleast_1d(np.asarray(x, dtype=float)))


def bessel_k(nu: float, x) -> np.ndarray:
    ke = bessel_ik_scaled(nu, x)[2]
    return ke * np.exp(-np.atleast_1d(np.asarray(x, dtype=float)))


def wronskian_defect(nu: float, x) -> np.ndarray:
    """|x (I K' - I' K) + 1|, zero for exact values."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ie, ie_p, ke, ke_p = bessel_ik_scaled(nu, x)
    return np.abs(x * (ie * ke_p - ie_p * ke) + 1.0)


@dataclass(frozen=True)
class BesselPair:
    order: float
    argument: float
    i_val: float
    k_val: float
    i_prime: float
    k_prime: float
    est_error: float


def bessel_pair(order: float, argument: float) -> BesselPair:
    """I_nu, K_nu and derivatives at one point, with the Wronskian defect as error estimate."""
    if argument <= 0:
        raise DomainError("argument must be positive")
    ie, ie_p, ke, ke_p = (float(a[0]) for a in bessel_ik_scaled(order, argument))
    up, down = math.exp(argument), math.exp(-argument)
    est = abs(argument * (ie * ke_p - ie_p * ke) + 1.0)
    return BesselPair(order, argument, ie * up, ke * down, ie_p * up, ke_p * down, est)
