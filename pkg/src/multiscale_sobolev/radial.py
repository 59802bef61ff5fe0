"""Fourier profile of the normalized ball indicator and the ball constants.

``F(tau)`` is the Fourier transform of ``chi_B / |B|`` (B the unit ball of
R^n) at a point of modulus ``tau``. With the normalization F(0) = 1,

    F(tau) = Gamma(n/2 + 1) (2 / tau)^(n/2) J_{n/2}(tau).

For n = 1 and n = 3 the half-integer Bessel functions are elementary; for
n = 2 we sum the power series up to ``_N2_SWITCH`` and use the Hankel
asymptotic expansion beyond it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "RadialProfile",
    "BallConstants",
    "ball_profile",
    "ball_profile_scalar",
    "ball_constants",
    "moment_M",
    "laplacian_power_L",
    "profile_taylor_coefficients",
    "unit_ball_volume",
    "unit_sphere_area",
]

# Both n=2 branches agree to ~2e-13 here.
_N2_SWITCH = 12.0
_N2_SERIES_TERMS = 80
_HANKEL_TERMS = 25
# Below this the n=3 closed form loses digits to cancellation.
_N3_SERIES_BELOW = 1.0


def _check_dim(dim: int) -> None:
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def unit_sphere_area(dim: int) -> float:
    return dim * unit_ball_volume(dim)


@lru_cache(maxsize=None)
def profile_taylor_coefficients(dim: int, kmax: int) -> tuple[Fraction, ...]:
    """Exact coefficients a_k with F(tau) = sum_k a_k tau^(2k), k = 0..kmax."""
    _check_dim(dim)
    out = [Fraction(1)]
    for k in range(1, kmax + 1):
        out.append(out[-1] * Fraction(-1, 2 * k * (dim + 2 * k)))
    return tuple(out)


def _series(tau: np.ndarray, dim: int, nterms: int) -> np.ndarray:
    coeffs = profile_taylor_coefficients(dim, nterms)
    q = tau * tau
    # Horner in tau^2
    acc = np.full_like(tau, float(coeffs[-1]))
    for c in reversed(coeffs[:-1]):
        acc = acc * q + float(c)
    return acc


def _hankel_j1(x: np.ndarray) -> np.ndarray:
    mu = 4.0
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    c = 1.0
    inv = 1.0 / x
    power = np.ones_like(x)
    for k in range(_HANKEL_TERMS):
        if k > 0:
            c *= (mu - (2 * k - 1) ** 2) / (8.0 * k)
            power = power * inv
        term = c * power
        if k % 2 == 0:
            p += (-1) ** (k // 2) * term
        else:
            q += (-1) ** ((k - 1) // 2) * term
    w = x - 0.75 * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(w) - q * np.sin(w))


@lru_cache(maxsize=None)
def _hankel_coeffs() -> tuple[float, ...]:
    mu, c, out = 4.0, 1.0, [1.0]
    for k in range(1, _HANKEL_TERMS):
        c *= (mu - (2 * k - 1) ** 2) / (8.0 * k)
        out.append(c)
    return tuple(out)


def _hankel_j1_scalar(x: float) -> float:
    p = q = 0.0
    power = 1.0
    for k, c in enumerate(_hankel_coeffs()):
        term = c * power
        if k % 2 == 0:
            p += (-1) ** (k // 2) * term
        else:
            q += (-1) ** ((k - 1) // 2) * term
        power /= x
    w = x - 0.75 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(w) - q * math.sin(w))


def ball_profile(dim: int, tau):
    """F(tau) for the normalized unit-ball indicator in dimension ``dim``.

    Accepts a scalar or an array of non-negative finite radii and returns the
    same shape.
    """
    _check_dim(dim)
    t = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValueError("tau must be finite and non-negative")
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.empty_like(t)
    if dim == 1:
        out[:] = np.sinc(t / np.pi)
    elif dim == 3:
        small = t < _N3_SERIES_BELOW
        out[small] = _series(t[small], 3, 18)
        tb = t[~small]
        out[~small] = 3.0 * (np.sin(tb) - tb * np.cos(tb)) / tb**3
    else:
        small = t <= _N2_SWITCH
        out[small] = _series(t[small], 2, _N2_SERIES_TERMS)
        tb = t[~small]
        out[~small] = 2.0 * _hankel_j1(tb) / tb
    return float(out[0]) if scalar else out


def ball_profile_scalar(dim: int, tau: float) -> float:
    """Scalar fast path of :func:`ball_profile` (no array overhead)."""
    if dim == 1:
        return math.sin(tau) / tau if tau != 0.0 else 1.0
    if dim == 3 and tau >= _N3_SERIES_BELOW:
        return 3.0 * (math.sin(tau) - tau * math.cos(tau)) / tau**3
    if dim == 2 and tau > _N2_SWITCH:
        return 2.0 * _hankel_j1_scalar(tau) / tau
    coeffs = profile_taylor_coefficients(dim, _N2_SERIES_TERMS if dim == 2 else 18)
    q = tau * tau
    acc = 0.0
    for c in _float_coeffs(coeffs)[::-1]:
        acc = acc * q + c
    return acc


@lru_cache(maxsize=None)
def _float_coeffs(coeffs: tuple) -> tuple[float, ...]:
    return tuple(float(c) for c in coeffs)


@dataclass(frozen=True)
class RadialProfile:
    dim: int

    def __post_init__(self):
        _check_dim(self.dim)

    def __call__(self, tau):
        return ball_profile(self.dim, tau)


def moment_M(dim: int, j: int) -> Fraction:
    """Mean of |h|^(2j) over the unit ball: n / (n + 2j)."""
    _check_dim(dim)
    if int(j) != j or j < 0:
        raise ValueError(f"j must be a non-negative integer, got {j}")
    return Fraction(dim, dim + 2 * int(j))


def laplacian_power_L(dim: int, j: int) -> int:
    """Delta^j applied to |x|^(2j), via Delta |x|^(2m) = 2m(2m+n-2) |x|^(2m-2)."""
    _check_dim(dim)
    if int(j) != j or j < 0:
        raise ValueError(f"j must be a non-negative integer, got {j}")
    out = 1
    for m in range(1, int(j) + 1):
        out *= 2 * m * (2 * m + dim - 2)
    return out


@dataclass(frozen=True)
class BallConstants:
    dim: int
    j: int
    M_j: Fraction
    L_j: int

    @property
    def ratio(self) -> Fraction:
        return self.M_j / self.L_j


def ball_constants(dim: int, j: int) -> BallConstants:
    return BallConstants(dim, int(j), moment_M(dim, j), laplacian_power_L(dim, j))
