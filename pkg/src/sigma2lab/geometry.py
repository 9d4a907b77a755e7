"""Elementary symmetric functions of diagonal tensors and model constants.

Tensors here are diagonal (1,1)-tensors stored as blocks of
``(eigenvalue, multiplicity)``.  Eigenvalues may be Python numbers,
``fractions.Fraction`` or numpy arrays; arrays broadcast, so a whole grid of
tensors sharing one block structure is handled in a single call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Any, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError

__all__ = [
    "DiagonalTensor",
    "ConeReport",
    "ModelDims",
    "elementary_symmetric",
    "newton_tensor",
    "cone_membership",
    "product_constant_c",
    "product_tensor",
    "critical_dimension_P",
    "critical_dimension_bisect",
    "radial_b_tensor",
    "euclidean_radial_b_tensor",
    "fast_decay_rates",
    "decay_discriminant",
]


@dataclass(frozen=True)
class DiagonalTensor:
    """Diagonal tensor given by ``(eigenvalue, multiplicity)`` blocks."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple((value, int(mult)) for value, mult in self.blocks)
        for _, mult in blocks:
            if mult < 0:
                raise DomainError("multiplicities must be nonnegative")
        object.__setattr__(self, "blocks", blocks)

    @property
    def dim(self) -> int:
        return sum(mult for _, mult in self.blocks)

    @property
    def values(self) -> list:
        return [value for value, _ in self.blocks]

    def expanded(self) -> list:
        """Eigenvalues repeated by multiplicity (scalar blocks only)."""
        out = []
        for value, mult in self.blocks:
            out.extend([value] * mult)
        return out

    def scaled(self, factor) -> "DiagonalTensor":
        return DiagonalTensor(tuple((value * factor, mult) for value, mult in self.blocks))


def _symmetric_coefficients(tensor: DiagonalTensor, top: int) -> list:
    # Coefficients of prod_b (1 + lambda_b x)^{mult_b} up to degree `top`.
    coeffs: list[Any] = [1] + [0] * top
    for value, mult in tensor.blocks:
        if mult == 0:
            continue
        powers = [1]
        for _ in range(min(mult, top)):
            powers.append(powers[-1] * value)
        new = list(coeffs)
        for degree in range(1, top + 1):
            acc = coeffs[degree]
            for i in range(1, min(degree, mult) + 1):
                acc = acc + math.comb(mult, i) * powers[i] * coeffs[degree - i]
            new[degree] = acc
        coeffs = new
    return coeffs


def elementary_symmetric(tensor: DiagonalTensor, m: int):
    """sigma_m of the eigenvalue multiset, by a recurrence over blocks."""
    if m < 0 or m > tensor.dim:
        raise DomainError(f"order {m} outside [0, {tensor.dim}]")
    return _symmetric_coefficients(tensor, m)[m]


def newton_tensor(tensor: DiagonalTensor, m: int) -> DiagonalTensor:
    """Block values of T^m = sigma_m I - sigma_{m-1} B + ... + (-1)^m B^m."""
    if m < 0 or m > tensor.dim:
        raise DomainError(f"order {m} outside [0, {tensor.dim}]")
    sigmas = _symmetric_coefficients(tensor, m)
    blocks = []
    for value, mult in tensor.blocks:
        acc: Any = 0
        for i in range(m + 1):
            acc = acc + (-1) ** (m - i) * sigmas[i] * value ** (m - i)
        blocks.append((acc, mult))
    return DiagonalTensor(tuple(blocks))


@dataclass(frozen=True)
class ConeReport:
    sigmas: tuple
    in_cone: bool
    newton_positive: bool
    maclaurin_gap: float

    @property
    def min_sigma(self) -> float:
        return float(min(self.sigmas))


def cone_membership(tensor: DiagonalTensor, k: int) -> ConeReport:
    """Check membership of a scalar diagonal tensor in Gamma_k^+.

    Also evaluates the Newton-Maclaurin gap
    ``(n-1)/(2n) sigma_1^2 - sigma_2``, which is nonnegative for every real
    tensor; a negative gap beyond rounding raises ``AssertionError``.
    """
    n = tensor.dim
    if k < 1 or k > n:
        raise DomainError(f"k={k} outside [1, {n}]")
    coeffs = _symmetric_coefficients(tensor, max(k, 2) if n >= 2 else k)
    sigmas = tuple(float(coeffs[m]) for m in range(1, k + 1))
    in_cone = all(s > 0 for s in sigmas)
    newton_positive = True
    for m in range(k):
        block_values = [float(v) for v, mult in newton_tensor(tensor, m).blocks if mult > 0]
        if any(v <= 0 for v in block_values):
            newton_positive = False
    gap = 0.0
    if n >= 2:
        s1 = float(coeffs[1])
        s2 = float(coeffs[2])
        gap = (n - 1) / (2 * n) * s1 * s1 - s2
        scale = max(1.0, s1 * s1, sum(float(v) ** 2 * mult for v, mult in tensor.blocks))
        if gap < -1e-12 * scale:
            raise AssertionError(f"Newton-Maclaurin inequality violated: gap={gap}")
    return ConeReport(sigmas, in_cone, newton_positive, gap)


def product_constant_c(n: int, p: int, m: int) -> int:
    """Alternating binomial sum c_{n,p,m}; equals 2^m sigma_m of the +-1/2 tensor."""
    if m < 0 or m > n or p < 0 or p > n - 1:
        raise DomainError(f"invalid (n, p, m) = {(n, p, m)}")
    return sum(
        math.comb(n - p - 1, i) * math.comb(p + 1, m - i) * (-1) ** (m - i)
        for i in range(m + 1)
    )


def product_tensor(n: int, p: int, scale=Fraction(1, 2)) -> DiagonalTensor:
    """Eigenvalues of the product metric on S^{n-p-1} x H^{p+1}, times ``2 * scale``."""
    return DiagonalTensor(((scale, n - p - 1), (-scale, p + 1)))


def _binom_real(x: float, i: int) -> float:
    out = 1.0
    for j in range(i):
        out *= (x - j) / (j + 1)
    return out


def _c_real(n: int, p: float, m: int) -> float:
    return sum(
        _binom_real(n - p - 1, i) * _binom_real(p + 1, m - i) * (-1) ** (m - i)
        for i in range(m + 1)
    )


def critical_dimension_bisect(n: int, k: int, step: float = 1e-3) -> float:
    """Largest real p with c_{n,p,m} > 0 for m = 1..k, by scan and bisection."""
    if n < 5 or k < 1 or 2 * k >= n:
        raise DomainError(f"need 5 <= n and 1 <= k < n/2, got n={n}, k={k}")

    def worst(p: float) -> float:
        return min(_c_real(n, p, m) for m in range(1, k + 1))

    lo = 0.0
    if worst(lo) <= 0:
        raise DomainError("product metric not in the cone even at p = 0")
    hi = lo + step
    while worst(hi) > 0:
        lo, hi = hi, hi + step
        if hi > n:
            raise DomainError("no sign change found")
    root = brentq(worst, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    # integer consistency: every integer below the root keeps all c positive
    for p_int in range(0, math.ceil(root - 1e-9)):
        if p_int < n - 1 and not all(product_constant_c(n, p_int, m) > 0 for m in range(1, k + 1)):
            raise AssertionError(f"integer check failed at p={p_int}")
    return root


def critical_dimension_P(n: int, k: int) -> float:
    """Critical codimension bound for the product metric to lie in Gamma_k^+."""
    if n < 5 or k < 1 or 2 * k >= n:
        raise DomainError(f"need 5 <= n and 1 <= k < n/2, got n={n}, k={k}")
    if k == 2:
        return (n - math.sqrt(n) - 2) / 2
    if k == 3:
        return (n - 2 - math.sqrt(3 * n - 2)) / 2
    return critical_dimension_bisect(n, k)


def decay_discriminant(n: int, p: int) -> int:
    """Expression under the square root in the fast/slow decay rates."""
    return 4 * p + 5 * p * p - 5 * p * n + p * n * n - p * p * n


def fast_decay_rates(n: int, p: int) -> tuple[float, float]:
    """The pair (alpha0^-, alpha0^+) of leading exponents at the singular end (k = 2)."""
    disc = decay_discriminant(n, p)
    if disc < 0:
        raise DomainError(f"negative discriminant for n={n}, p={p}")
    centre = (n - 4) / 4 - p * (n - 3) / (2 * (n - 1))
    half = math.sqrt(disc) / (2 * (n - 1))
    return centre - half, centre + half


@dataclass(frozen=True)
class ModelDims:
    """Dimension tuple (n, p, k) with its derived constants."""

    n: int
    p: int
    k: int = 2

    def __post_init__(self):
        for name in ("n", "p", "k"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise DomainError(f"{name} must be an integer, got {value!r}")
        if self.n < 5:
            raise DomainError("n must be at least 5")
        if self.k < 1 or 2 * self.k >= self.n:
            raise DomainError("need 1 <= k < n/2")
        if self.p < 1:
            raise DomainError("p must be a positive integer")
        if self.p >= critical_dimension_P(self.n, self.k):
            raise DomainError(
                f"p={self.p} must lie below the critical value "
                f"{critical_dimension_P(self.n, self.k):.6g} for n={self.n}, k={self.k}"
            )

    @property
    def N(self) -> int:
        return self.n - self.p

    @property
    def q(self) -> Fraction:
        return Fraction(2 * self.n * self.k, self.n - 2 * self.k)

    @property
    def gauge(self) -> Fraction:
        """(n - 2k)/(4k): the factor multiplying v^2 in the radial B tensor."""
        return Fraction(self.n - 2 * self.k, 4 * self.k)

    @property
    def c(self) -> Fraction:
        """Right-hand side constant, C(n,k) * ((n-2k)/(4k))^k."""
        return math.comb(self.n, self.k) * self.gauge ** self.k

    @property
    def c_product(self) -> int:
        return product_constant_c(self.n, self.p, self.k)

    @property
    def shift(self) -> Fraction:
        """(n - 2k)/(2k): exponent relating u in the r-picture to v in the t-picture."""
        return Fraction(self.n - 2 * self.k, 2 * self.k)

    @cached_property
    def v_inf(self) -> float:
        """Equilibrium value: v_inf^(q - 2k) = c_{n,p,k} / C(n,k)."""
        ratio = Fraction(self.c_product, math.comb(self.n, self.k))
        return float(ratio) ** (1.0 / float(self.q - 2 * self.k))

    @property
    def alpha0_pair(self) -> tuple[float, float]:
        if self.k != 2:
            raise DomainError("closed-form decay rates are available for k = 2 only")
        return fast_decay_rates(self.n, self.p)

    @property
    def alpha0(self) -> float:
        return self.alpha0_pair[0]

    @property
    def alpha1(self) -> float:
        return self.alpha0 + float(self.shift)

    @property
    def alpha2(self) -> float:
        return self.alpha1 / float(self.shift)


def radial_b_tensor(v, vdot, vddot, dims: ModelDims) -> DiagonalTensor:
    """Radial, angular and tangential eigenvalues of B for a radial v(t)."""
    if np.any(np.asarray(v) <= 0):
        raise DomainError("v must be positive")
    n, k = dims.n, dims.k
    g = float(dims.gauge)
    a = (n - k) / (n - 2 * k)
    b = k / (n - 2 * k)
    k1 = -g * v * v - v * vddot + a * vdot * vdot
    k2 = g * v * v - b * vdot * vdot
    k3 = -g * v * v - v * vdot - b * vdot * vdot
    return DiagonalTensor(((k1, 1), (k2, dims.N - 1), (k3, dims.p)))


def euclidean_radial_b_tensor(u, du, d2u, r, dims: ModelDims) -> DiagonalTensor:
    """B of the flat metric's conformal factor u(r), r the distance to R^p.

    Uses the Euclidean Hessian directly: radial u'', angular u'/r, tangential 0.
    With v(t) = r^((n-2k)/(2k)) u(r) and t = -log r the two descriptions of the
    same metric satisfy ``radial_b_tensor(v, ...) = r^(n/k) * euclidean_radial_b_tensor(u, ...)``.
    """
    n, k = dims.n, dims.k
    a = n / (n - 2 * k)
    b = k / (n - 2 * k)
    grad2 = du * du
    radial = -u * d2u + a * grad2 - b * grad2
    angular = -u * du / r - b * grad2
    tangential = -b * grad2 + 0 * u
    return DiagonalTensor(((radial, 1), (angular, dims.N - 1), (tangential, dims.p)))


def expand_blocks(values: Sequence, mults: Sequence[int]) -> DiagonalTensor:
    return DiagonalTensor(tuple(zip(values, mults)))
