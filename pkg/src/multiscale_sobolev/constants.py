"""The multiplier deficit and the p = 2 equivalence constants.

For smoothness ``alpha`` with ``N = floor(alpha / 2)`` the ball average of the
corrected remainder acts on a Fourier mode of frequency |xi| at scale t as
multiplication by ``Phi(t |xi|)``, where

    Phi(tau) = F(tau) - 1                                               (N = 0)
    Phi(tau) = F(tau) - sum_{j<N} c_j tau^(2j) - c_N tau^(2N) F(tau)    (N >= 1)

with ``c_j = (-1)^j M_j / L_j``. The square function then satisfies
``||S||_2^2 = I(alpha, n) ||(-Delta)^(alpha/2) f||_2^2`` with

    I(alpha, n) = int_0^inf |Phi(tau)|^2 dtau / tau^(2 alpha + 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import integrate

from .radial import (
    ball_profile,
    ball_profile_scalar,
    laplacian_power_L,
    moment_M,
    profile_taylor_coefficients,
)

__all__ = [
    "DeficitSpec",
    "ConstantEstimate",
    "QuadratureError",
    "deficit_spec",
    "smoothness_split",
    "multiplier_deficit",
    "deficit_slope",
    "constant_I",
    "constant_I_report",
    "constant_S0",
    "constant_S0_report",
]

# Phi is summed from its exact Taylor coefficients below this radius.
_SERIES_RADIUS = 2.0
_SERIES_TERMS = 48
_TAIL_START = 4000.0


class QuadratureError(RuntimeError):
    """Raised when the two quadrature schemes fail to agree within tolerance."""

    def __init__(self, message, partial=None, achieved=None):
        super().__init__(message)
        self.partial = partial
        self.achieved = achieved


def smoothness_split(alpha: float) -> int:
    """The integer N with 2N <= alpha < 2N + 2."""
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be positive and finite, got {alpha}")
    return int(math.floor(alpha / 2))


@dataclass(frozen=True)
class DeficitSpec:
    dim: int
    alpha: float
    N: int
    coefficients: tuple[Fraction, ...]  # (-1)^j M_j / L_j, j = 0..N
    series: tuple[Fraction, ...]  # Taylor coefficients of Phi in tau^2

    def __post_init__(self):
        if self.coefficients[0] != 1:
            raise ValueError("j = 0 coefficient must be 1")

    @property
    def leading_order(self) -> int:
        """Smallest k with a nonzero tau^(2k) coefficient."""
        return next(k for k, a in enumerate(self.series) if a != 0)


@lru_cache(maxsize=None)
def deficit_spec(dim: int, alpha: float, N: int | None = None) -> DeficitSpec:
    n_auto = smoothness_split(alpha)
    if N is None:
        N = n_auto
    elif not (2 * N <= alpha < 2 * N + 2):
        raise ValueError(f"N={N} is not admissible for alpha={alpha} (need 2N <= alpha < 2N+2)")
    coeffs = tuple((-1) ** j * moment_M(dim, j) / laplacian_power_L(dim, j) for j in range(N + 1))
    f = profile_taylor_coefficients(dim, _SERIES_TERMS + N)
    if N == 0:
        series = (Fraction(0),) + tuple(f[1 : _SERIES_TERMS + 1])
    else:
        series = []
        for k in range(_SERIES_TERMS + 1):
            a = f[k]
            if k < N:
                a -= coeffs[k]
            if k >= N:
                a -= coeffs[N] * f[k - N]
            series.append(a)
        series = tuple(series)
    return DeficitSpec(dim, float(alpha), N, coeffs, series)


def _deficit_direct(spec: DeficitSpec, tau: np.ndarray) -> np.ndarray:
    F = ball_profile(spec.dim, tau)
    if spec.N == 0:
        return F - 1.0
    q = tau * tau
    poly = np.zeros_like(tau)
    for j in range(spec.N - 1, -1, -1):
        poly = poly * q + float(spec.coefficients[j])
    return F - poly - float(spec.coefficients[spec.N]) * q**spec.N * F


def _deficit_series(spec: DeficitSpec, tau: np.ndarray) -> np.ndarray:
    q = tau * tau
    acc = np.zeros_like(tau)
    for a in reversed(spec.series):
        acc = acc * q + float(a)
    return acc


def multiplier_deficit(dim: int, alpha: float, tau, N: int | None = None):
    """Phi_alpha(tau); scalar in, scalar out, array in, array out."""
    spec = deficit_spec(dim, float(alpha), N)
    t = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValueError("tau must be finite and non-negative")
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.empty_like(t)
    small = t <= _SERIES_RADIUS
    out[small] = _deficit_series(spec, t[small])
    out[~small] = _deficit_direct(spec, t[~small])
    return float(out[0]) if scalar else out


def _deficit_scalar_fn(spec: DeficitSpec):
    """Pure-float Phi for scalar arguments (used inside adaptive quadrature)."""
    dim, N = spec.dim, spec.N
    series = [float(a) for a in reversed(spec.series)]
    c = [float(a) for a in spec.coefficients]

    def phi(tau: float) -> float:
        q = tau * tau
        if tau <= _SERIES_RADIUS:
            acc = 0.0
            for a in series:
                acc = acc * q + a
            return acc
        F = ball_profile_scalar(dim, tau)
        if N == 0:
            return F - 1.0
        poly = 0.0
        for j in range(N - 1, -1, -1):
            poly = poly * q + c[j]
        return F - poly - c[N] * q**N * F

    return phi


def deficit_slope(dim: int, alpha: float, tau_lo: float = 1e-3, tau_hi: float = 1e-2, num: int = 25) -> float:
    """Least-squares slope of log|Phi| against log tau on [tau_lo, tau_hi]."""
    tau = np.geomspace(tau_lo, tau_hi, num)
    phi = np.abs(multiplier_deficit(dim, alpha, tau))
    return float(np.polyfit(np.log(tau), np.log(phi), 1)[0])


# ---------------------------------------------------------------------------
# two-scheme quadrature of int_0^inf g(tau) dtau


@dataclass(frozen=True)
class ConstantEstimate:
    value: float
    log_grid: float
    adaptive: float
    tail: float
    rel_diff: float

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "log_grid": self.log_grid,
            "adaptive": self.adaptive,
            "tail": self.tail,
            "rel_diff": self.rel_diff,
        }


def _log_grid_integral(g, a: float, b: float, order: int = 10) -> float:
    """Composite Gauss-Legendre in u = log tau; panels shrink so each spans
    at most ~pi/4 in tau once the integrand starts oscillating."""
    edges = [math.log(a)]
    u, ub = math.log(a), math.log(b)
    while u < ub:
        u = min(ub, u + min(0.2, 0.8 / math.exp(u)))
        edges.append(u)
    e = np.asarray(edges)
    x, w = np.polynomial.legendre.leggauss(order)
    half = (e[1:, None] - e[:-1, None]) / 2
    uu = (e[1:, None] + e[:-1, None]) / 2 + half * x
    tau = np.exp(uu)
    return float(np.sum(half * w * g(tau) * tau))


def _adaptive_integral(scalar, a: float, b: float, chunk: float, scale: float) -> float:
    """Chunked adaptive quadrature; ``scale`` sets the absolute target per chunk."""
    total = 0.0
    opts = dict(epsabs=1e-14 * abs(scale), epsrel=1e-12, limit=200)
    edges = [a]
    while edges[-1] < b:
        edges.append(min(b, edges[-1] + chunk))
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += integrate.quad(scalar, lo, hi, **opts)[0]
    return total


def _power_tail(coeffs: dict[float, float], T: float) -> float:
    """int_T^inf sum_e c_e tau^e dtau for exponents e < -1."""
    total = 0.0
    for e, c in coeffs.items():
        if e >= -1:
            raise ValueError(f"divergent tail exponent {e}")
        total += -c * T ** (e + 1) / (e + 1)
    return total


def _bessel_square_mean(dim: int) -> float:
    """Constant C with the running mean of F(tau)^2 ~ C tau^-(n+1)."""
    return math.gamma(dim / 2 + 1) ** 2 * 2**dim / math.pi


def _combine(a: float, b: float, tail: float, tol: float, label: str) -> ConstantEstimate:
    va, vb = a + tail, b + tail
    rel = abs(va - vb) / max(abs(va), abs(vb), 1e-300)
    est = ConstantEstimate(0.5 * (va + vb), va, vb, tail, rel)
    if not rel <= tol:
        raise QuadratureError(
            f"{label}: schemes disagree (relative difference {rel:.3g} > {tol:.3g})",
            partial=est.value,
            achieved=rel,
        )
    return est


@lru_cache(maxsize=None)
def constant_I_report(dim: int, alpha: float, tol: float = 1e-6, N: int | None = None) -> ConstantEstimate:
    """Both quadrature estimates of I(alpha, n) plus their agreement."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    spec = deficit_spec(dim, float(alpha), N)
    alpha = float(alpha)

    def g(tau):
        return multiplier_deficit(dim, alpha, tau, spec.N) ** 2 * tau ** (-2 * alpha - 1)

    # exact integral of the squared Taylor series on [0, tau0]
    tau0 = 0.5
    k0 = spec.leading_order
    a = [float(c) for c in spec.series]
    head = 0.0
    for k in range(k0, len(a)):
        for m in range(k0, len(a)):
            e = 2 * (k + m) - 2 * alpha
            head += a[k] * a[m] * tau0**e / e

    T = _TAIL_START
    log_grid = head + _log_grid_integral(g, tau0, T)

    phi = _deficit_scalar_fn(spec)

    def g_scalar(tau):
        return phi(tau) ** 2 * tau ** (-2 * alpha - 1) if tau > 0 else 0.0

    adaptive = _adaptive_integral(g_scalar, 0.0, 2.0, 2.0, log_grid) + _adaptive_integral(
        g_scalar, 2.0, T, math.pi, log_grid
    )

    # tail: polynomial part squared plus the running mean of F^2 times Q^2
    N = spec.N
    c = [float(x) for x in spec.coefficients]
    poly = {0: 1.0} if N == 0 else {2 * j: c[j] for j in range(N)}
    q = {0: 1.0} if N == 0 else {0: 1.0, 2 * N: -c[N]}
    tail_coeffs: dict[float, float] = {}
    for e1, c1 in poly.items():
        for e2, c2 in poly.items():
            key = e1 + e2 - 2 * alpha - 1
            tail_coeffs[key] = tail_coeffs.get(key, 0.0) + c1 * c2
    cb = _bessel_square_mean(dim)
    for e1, c1 in q.items():
        for e2, c2 in q.items():
            key = e1 + e2 - 2 * alpha - 1 - dim - 1
            tail_coeffs[key] = tail_coeffs.get(key, 0.0) + cb * c1 * c2
    tail = _power_tail(tail_coeffs, T)
    return _combine(log_grid, adaptive, tail, tol, f"I(alpha={alpha}, n={dim})")


def constant_I(dim: int, alpha: float, tol: float = 1e-6, N: int | None = None) -> float:
    """I(alpha, n) = int_0^inf |Phi(tau)|^2 dtau / tau^(2 alpha + 1)."""
    return constant_I_report(dim, float(alpha), tol, N).value


@lru_cache(maxsize=None)
def constant_S0_report(dim: int, tol: float = 1e-6) -> ConstantEstimate:
    def g(tau):
        return (ball_profile(dim, tau) - ball_profile(dim, 2 * tau)) ** 2 / tau

    f = [float(x) for x in profile_taylor_coefficients(dim, 40)]
    d = [fk * (1 - 4**k) for k, fk in enumerate(f)]
    tau0 = 0.25
    head = sum(
        d[k] * d[m] * tau0 ** (2 * (k + m)) / (2 * (k + m))
        for k in range(1, len(d))
        for m in range(1, len(d))
    )
    T = _TAIL_START
    log_grid = head + _log_grid_integral(g, tau0, T)

    def g_scalar(tau):
        if tau == 0.0:
            return 0.0
        return (ball_profile_scalar(dim, tau) - ball_profile_scalar(dim, 2 * tau)) ** 2 / tau

    adaptive = _adaptive_integral(g_scalar, 0.0, 2.0, 2.0, log_grid) + _adaptive_integral(
        g_scalar, 2.0, T, math.pi / 2, log_grid
    )
    cb = _bessel_square_mean(dim)
    tail = _power_tail({-dim - 2.0: cb * (1 + 2.0 ** (-dim - 1))}, T)
    return _combine(log_grid, adaptive, tail, tol, f"S0 constant (n={dim})")


def constant_S0(dim: int, tol: float = 1e-6) -> float:
    """int_0^inf |F(tau) - F(2 tau)|^2 dtau / tau."""
    return constant_S0_report(dim, tol).value
