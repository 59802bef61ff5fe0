"""Fundamental solutions, the kernels K_t and Hörmander-type scans.

``I_alpha`` is the kernel with Fourier transform ``|xi|^-alpha`` (transform
convention ``f^(xi) = int f(x) exp(-i x.xi) dx``), so that
``f = I_alpha * (-Delta)^(alpha/2) f``. Radial functions built from
``I_alpha`` are held as finite sums of terms ``c r^beta (log r)^k``, k in
{0, 1}, which are closed under the Laplacian.

The kernel of the square function is

    K_t(x) = mean_{B(x,t)} I - sum_{j<N} M_j t^(2j) Delta^j I(x) / L_j
             - M_N t^(2N) / L_N * mean_{B(x,t)} Delta^N I

(``mean_{B(x,t)} I - I(x)`` when N = 0). Ball means of radial terms are
one-dimensional integrals over the radius; for ``t <= |x|/2`` the kernel is
summed from its Taylor (Pizzetti) expansion instead, which avoids the
cancellation between the ball mean and the corrections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize
from scipy.stats import qmc

from .constants import smoothness_split
from .radial import laplacian_power_L, moment_M, unit_ball_volume, unit_sphere_area
from .scales import ScaleQuadrature, graded_scale_quadrature

__all__ = [
    "CalibrationError",
    "FundamentalSolution",
    "HormanderReport",
    "fundamental_solution",
    "radial_ball_mean",
    "kernel_K",
    "pv_ball_riesz",
    "hormander_gamma",
    "hormander_quadrature",
    "hormander_norm",
    "hormander_scan",
    "symmetric_difference_measure",
    "cell_union_potential",
    "riesz_set_constant",
]

Term = tuple[float, float, int]  # (coefficient, beta, log power)

_CALIBRATION_TOL = 1e-3
_SERIES_RATIO = 0.5  # Taylor branch for t <= _SERIES_RATIO * |x|
_SERIES_TERMS = 40
_N2_NODES = 24


class CalibrationError(RuntimeError):
    """The constants of a fundamental solution failed the Fourier pairing check."""


# ---------------------------------------------------------------------------
# radial term algebra


def _merge(terms) -> tuple[Term, ...]:
    acc: dict[tuple[float, int], float] = {}
    for c, b, k in terms:
        acc[(b, k)] = acc.get((b, k), 0.0) + c
    return tuple((c, b, k) for (b, k), c in sorted(acc.items()) if c != 0.0)


def _laplacian(terms, dim: int) -> tuple[Term, ...]:
    """Delta(r^b) = b(b+n-2) r^(b-2);  Delta(r^b log r) adds (2b+n-2) r^(b-2)."""
    out = []
    for c, b, k in terms:
        out.append((c * b * (b + dim - 2), b - 2, k))
        if k == 1:
            out.append((c * (2 * b + dim - 2), b - 2, 0))
    return _merge(out)


def _evaluate(terms, r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    lr = np.log(r)
    for c, b, k in terms:
        out = out + c * r**b * (lr if k else 1.0)
    return out


def _prim(s: float, k: int, r):
    """An antiderivative of r^(s-1) (log r)^k."""
    lr = np.log(r)
    if s == 0:
        return lr if k == 0 else 0.5 * lr * lr
    rs = r**s
    return rs / s if k == 0 else rs * (lr / s - 1.0 / s**2)


def _full_sphere_integral(terms, dim: int, a):
    """int_0^a h(r) |S^(n-1)| r^(n-1) dr, a >= 0 (zero where a == 0)."""
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    if np.any(pos):
        ap = a[pos]
        acc = np.zeros_like(ap)
        for c, b, k in terms:
            acc += c * _prim(b + dim, k, ap)
        out[pos] = unit_sphere_area(dim) * acc
    return out


def _partial_integral(terms, dim: int, d: float, t: np.ndarray) -> np.ndarray:
    """int over r in (|d-t|, d+t) of h(r) times the area of the r-sphere inside B(x,t)."""
    a, b = np.abs(d - t), d + t
    out = np.zeros_like(t)
    if dim == 1:
        for c, beta, k in terms:
            out += c * (_prim(beta + 1, k, b) - _prim(beta + 1, k, a))
        return out
    if dim == 3:
        # sphere area inside the ball: pi r (t^2 - (r-d)^2) / d
        for c, beta, k in terms:
            P = lambda s: _prim(s, k, b) - _prim(s, k, a)  # noqa: E731
            out += c * ((t * t - d * d) * P(beta + 2) + 2 * d * P(beta + 3) - P(beta + 4))
        return out * (math.pi / d)
    # dim == 2: sphere length 2 r arccos((r^2 + d^2 - t^2) / (2 r d)); Gauss in phi with
    # r = mid - half cos(phi), graded toward phi = 0 when the inner radius is near 0.
    x, w = np.polynomial.legendre.leggauss(_N2_NODES)
    ratio = (b - a) / 2 / np.maximum(a, 1e-300)
    levels = 2 + np.ceil(0.5 * np.log2(np.maximum(ratio, 1.0))).astype(int)
    levels = np.minimum(levels, 60)
    for lev in np.unique(levels):
        sel = levels == lev
        edges = np.array([0.0] + [math.pi * 2.0 ** (-i) for i in range(lev, 0, -1)] + [math.pi])
        lo, hi = edges[:-1, None], edges[1:, None]
        phi = ((lo + hi) / 2 + (hi - lo) / 2 * x).ravel()
        wphi = ((hi - lo) / 2 * w).ravel()
        ts, mid, half = t[sel, None], ((a + b) / 2)[sel, None], ((b - a) / 2)[sel, None]
        r = mid - half * np.cos(phi)
        cosang = np.clip((r * r + d * d - ts * ts) / (2 * r * d), -1.0, 1.0)
        sigma = 2 * r * np.arccos(cosang)
        out[sel] = np.sum(wphi * half * np.sin(phi) * sigma * _evaluate(terms, r), axis=1)
    return out


def radial_ball_mean(dim: int, terms, d: float, t) -> np.ndarray:
    """Mean over B(x, t), |x| = d > 0, of the radial function given by ``terms``."""
    if not d > 0:
        raise ValueError("the ball centre must differ from the origin")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    total = _full_sphere_integral(terms, dim, np.maximum(t - d, 0.0)) + _partial_integral(terms, dim, d, t)
    return total / (unit_ball_volume(dim) * t**dim)


# ---------------------------------------------------------------------------
# fundamental solutions


def _gaussian_laplacian_poly(dim: int, m: int) -> np.polynomial.Polynomial:
    """q with Delta^m exp(-r^2/2) = q(r^2) exp(-r^2/2)."""
    P = np.polynomial.Polynomial
    q = P([1.0])
    s = P([0.0, 1.0])
    for _ in range(m):
        d1, d2 = q.deriv(1), q.deriv(2)
        q = 4 * s * (d2 - d1 + q / 4) + 2 * dim * (d1 - q / 2)
    return q


@dataclass(frozen=True)
class FundamentalSolution:
    """``I_alpha(x) = c |x|^(alpha-n)`` or ``|x|^(alpha-n) (A + B log|x|)``."""

    dim: int
    alpha: float
    form: str
    c: float
    A: float = 0.0
    B: float = 0.0
    calibration_residual: float = field(default=math.nan, compare=False)

    @property
    def terms(self) -> tuple[Term, ...]:
        e = self.alpha - self.dim
        if self.form == "power":
            return ((self.c, e, 0),)
        return _merge([(self.A, e, 0), (self.B, e, 1)])

    def laplacian_terms(self, j: int) -> tuple[Term, ...]:
        return _laplacian_chain(self, j)

    def __call__(self, x):
        r = _radius(x, self.dim)
        if np.any(r == 0):
            raise ValueError("I_alpha is singular at the origin")
        return _evaluate(self.terms, r)


@lru_cache(maxsize=None)
def _laplacian_chain(sol: FundamentalSolution, j: int) -> tuple[Term, ...]:
    if j == 0:
        return sol.terms
    return _laplacian(_laplacian_chain(sol, j - 1), sol.dim)


def _radius(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if dim == 1:
        return np.abs(x)
    if x.shape[-1] != dim:
        raise ValueError(f"points must have trailing dimension {dim}")
    return np.sqrt(np.sum(x * x, axis=-1))


def _exceptional(dim: int, alpha: float) -> int | None:
    e = alpha - dim
    m = round(e / 2)
    if e >= 0 and abs(e - 2 * m) < 1e-12:
        return int(m)
    return None


def _calibrate(sol: FundamentalSolution) -> float:
    """Largest relative mismatch of int I * Delta^m G against the Fourier-side pairing."""
    n, a = sol.dim, sol.alpha
    m0 = 0 if a < n else math.floor((a - n) / 2) + 1
    worst = 0.0
    for m in (m0, m0 + 1):
        q = _gaussian_laplacian_poly(n, m)
        area = unit_sphere_area(n)

        def integrand(r):
            return float(_evaluate(sol.terms, r)) * q(r * r) * math.exp(-r * r / 2) * area * r ** (n - 1)

        opts = dict(epsabs=1e-14, epsrel=1e-11, limit=200)
        lhs = integrate.quad(integrand, 0, 1, **opts)[0] + integrate.quad(integrand, 1, np.inf, **opts)[0]
        s = 2 * m - a + n
        rhs = (2 * math.pi) ** (-n / 2) * (-1) ** m * area * 2 ** (s / 2 - 1) * math.gamma(s / 2)
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    return worst


@lru_cache(maxsize=None)
def fundamental_solution(dim: int, alpha: float) -> FundamentalSolution:
    """Build and calibrate I_alpha for ``dim`` in {1, 2, 3}.

    The log form appears exactly when ``alpha - n = 2m`` is an even
    non-negative integer. There ``A`` multiplies a polynomial and is fixed to
    0; every kernel in this module is blind to it.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be positive, got {alpha}")
    alpha = float(alpha)
    m = _exceptional(dim, alpha)
    denom_gamma = math.gamma(alpha / 2) * math.pi ** (dim / 2)
    if m is None:
        c = math.gamma((dim - alpha) / 2) / (2**alpha * denom_gamma)
        sol = FundamentalSolution(dim, alpha, "power", c)
    else:
        B = (-1) ** (m + 1) / (2 ** (alpha - 1) * denom_gamma * math.factorial(m))
        sol = FundamentalSolution(dim, alpha, "power_log", B, A=0.0, B=B)
    res = _calibrate(sol)
    if not res <= _CALIBRATION_TOL:
        raise CalibrationError(f"I_alpha(n={dim}, alpha={alpha}): calibration residual {res:.3g}")
    return FundamentalSolution(sol.dim, sol.alpha, sol.form, sol.c, sol.A, sol.B, res)


# ---------------------------------------------------------------------------
# the kernel K_t


@lru_cache(maxsize=None)
def _series_table(dim: int, alpha: float) -> tuple[int, tuple[tuple[int, tuple[Term, ...], float], ...]]:
    """(N, [(power of t, Delta^(N+k) I terms, weight)]) for the Taylor branch."""
    sol = fundamental_solution(dim, alpha)
    N = smoothness_split(alpha)
    rows = []
    for k in range(1, _SERIES_TERMS + 1):
        j = N + k
        w = float(moment_M(dim, j)) / laplacian_power_L(dim, j)
        if N >= 1:
            w -= float(moment_M(dim, N) * moment_M(dim, k)) / (laplacian_power_L(dim, N) * laplacian_power_L(dim, k))
        rows.append((2 * j, sol.laplacian_terms(j), w))
    return N, tuple(rows)


def _kernel_series(dim: int, alpha: float, d: float, t: np.ndarray) -> np.ndarray:
    # t^p Delta^j I(d) = (t/d)^p * d^p Delta^j I(d); the second factor stays O(d^(alpha-n))
    _, rows = _series_table(dim, alpha)
    u = t / d
    ld = math.log(d)
    out = np.zeros_like(t)
    for power, terms, w in rows:
        if terms and w != 0.0:
            coef = sum(c * d ** (b + power) * (ld if k else 1.0) for c, b, k in terms)
            out += w * coef * u**power
    return out


def _kernel_direct(dim: int, alpha: float, d: float, t: np.ndarray) -> np.ndarray:
    sol = fundamental_solution(dim, alpha)
    N = smoothness_split(alpha)
    out = radial_ball_mean(dim, sol.terms, d, t)
    if N == 0:
        return out - float(_evaluate(sol.terms, d))
    for j in range(N):
        coef = float(moment_M(dim, j)) / laplacian_power_L(dim, j)
        out = out - coef * t ** (2 * j) * float(_evaluate(sol.laplacian_terms(j), d))
    coef = float(moment_M(dim, N)) / laplacian_power_L(dim, N)
    if alpha == 2 * N:
        # Delta^N I_{2N} = (-1)^N delta, whose ball mean is (-1)^N chi_t(x)
        chi = np.where(d < t, 1.0 / (unit_ball_volume(dim) * t**dim), 0.0)
        return out - coef * t ** (2 * N) * (-1) ** N * chi
    return out - coef * t ** (2 * N) * radial_ball_mean(dim, sol.laplacian_terms(N), d, t)


def kernel_K(dim: int, alpha: float, x, t, *, method: str = "auto"):
    """K_t(x) for one point ``x`` (x != 0) and one or many radii ``t``.

    ``method`` is ``'auto'``, ``'series'`` (valid for t < |x|) or
    ``'direct'`` (ball-mean integrals).
    """
    r = np.asarray(_radius(x, dim))
    if r.size != 1:
        raise ValueError("kernel_K takes a single point x")
    d = float(r.reshape(()))
    if not d > 0:
        raise ValueError("kernel_K needs x != 0")
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    if np.any(t_arr <= 0) or not np.all(np.isfinite(t_arr)):
        raise ValueError("t must be positive and finite")
    alpha = float(alpha)
    if method == "series":
        if np.any(t_arr >= d):
            raise ValueError("the Taylor branch needs t < |x|")
        out = _kernel_series(dim, alpha, d, t_arr)
    elif method == "direct":
        out = _kernel_direct(dim, alpha, d, t_arr)
    elif method == "auto":
        out = np.empty_like(t_arr)
        small = t_arr <= _SERIES_RATIO * d
        if np.any(small):
            out[small] = _kernel_series(dim, alpha, d, t_arr[small])
        if np.any(~small):
            out[~small] = _kernel_direct(dim, alpha, d, t_arr[~small])
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# principal-value ball Riesz integral


def pv_ball_riesz(dim: int, x, t: float) -> np.ndarray:
    """p.v. int_{B(x,t)} y / |y|^(n+1) dy.

    The part of the ball inside B(0, t - |x|) cancels by oddness; what is left
    is integrated sphere by sphere, using that only the component along x
    survives.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise ValueError(f"x must have {dim} components")
    d = float(np.linalg.norm(x))
    if not t > 0:
        raise ValueError("t must be positive")
    if abs(d - t) <= 1e-9 * t:
        raise ValueError("|x| = t: the origin lies on the sphere and the integral diverges")
    if d == 0:
        return np.zeros(dim)
    lo, hi = abs(d - t), d + t
    if dim == 1:
        axial = math.log(hi / lo)
    else:

        def sin2(r):
            c = (r * r + d * d - t * t) / (2 * r * d)
            return max(0.0, 1.0 - c * c)

        if dim == 2:
            g = lambda r: 2.0 * math.sqrt(sin2(r)) / r  # noqa: E731
        else:
            g = lambda r: math.pi * sin2(r) / r  # noqa: E731
        axial = integrate.quad(g, lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]
    return axial * x / d


# ---------------------------------------------------------------------------
# Hörmander scans


def hormander_gamma(dim: int, alpha: float) -> float:
    """The exponent gamma in |y|^gamma / |x|^(n+gamma) assigned to (alpha, n)."""
    N = smoothness_split(alpha)
    if N == 0:
        return alpha / dim if alpha < 1 else 1.0
    if alpha == 2 * N:
        return 0.5
    if dim == 1 and alpha == 2 * N + 1:
        return 0.5
    return min(1.0, (alpha - 2 * N) / dim)


def hormander_quadrature(x_norm: float, xy_norm: float, *, span=(1e-3, 1e3), refine: int = 0) -> ScaleQuadrature:
    """Graded scale rule with breakpoints where K_t(x-y) - K_t(x) has kinks."""
    q = graded_scale_quadrature(
        span[0] * x_norm,
        span[1] * x_norm,
        breakpoints=(xy_norm, x_norm, x_norm / 3, 2 * x_norm, _SERIES_RATIO * xy_norm, _SERIES_RATIO * x_norm),
        max_log_step=0.3,
        order=8,
        grading_levels=14,
    )
    for _ in range(refine):
        q = q.refine()
    return q


def hormander_norm(dim: int, alpha: float, x, y, quad: ScaleQuadrature | None = None) -> float:
    """|| K_t(x-y) - K_t(x) ||_{L^2(dt / t^(2 alpha + 1))}, for |x| >= 2|y|."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    xn, yn = float(np.linalg.norm(x)), float(np.linalg.norm(y))
    if not xn >= 2 * yn * (1 - 1e-12):
        raise ValueError("need |x| >= 2|y|")
    if yn == 0:
        return 0.0
    xy = x - y
    if quad is None:
        quad = hormander_quadrature(xn, float(np.linalg.norm(xy)))
    t = quad.nodes
    diff = kernel_K(dim, alpha, xy, t) - kernel_K(dim, alpha, x, t)
    return math.sqrt(max(0.0, quad.integrate(t ** (-2 * alpha) * diff * diff)))


@dataclass(frozen=True)
class HormanderReport:
    """Sampled ratios ``norm / bound``; ``polished`` holds locally maximized pairs."""

    alpha: float
    dim: int
    gamma: float
    seed: int
    samples: list  # (x, y, norm, bound)
    polished: list
    sup_ratio: float
    sampled_sup: float
    median_ratio: float

    @property
    def ratios(self) -> np.ndarray:
        return np.array([s[2] / s[3] for s in self.samples])

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "dim": self.dim,
            "gamma": self.gamma,
            "seed": self.seed,
            "num_samples": len(self.samples),
            "sup_ratio": self.sup_ratio,
            "sampled_sup": self.sampled_sup,
            "median_ratio": self.median_ratio,
        }


def _directions(u: np.ndarray, dim: int) -> np.ndarray:
    """Map points of [0,1)^k to unit vectors (area-uniform)."""
    if dim == 1:
        return np.where(u[:, :1] < 0.5, -1.0, 1.0)
    if dim == 2:
        a = 2 * np.pi * u[:, 0]
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    z = 2 * u[:, 0] - 1
    a = 2 * np.pi * u[:, 1]
    s = np.sqrt(1 - z * z)
    return np.stack([s * np.cos(a), s * np.sin(a), z], axis=1)


def hormander_samples(dim: int, num_samples: int, seed: int, *, x_range=(1e-2, 1e2), ratio_range=(1e-4, 0.5)):
    """Pairs (x, y) with |x| log-uniform, |y|/|x| log-uniform, directions uniform.

    A scrambled Sobol sequence drives the draw so that the extremes of each
    range are covered evenly for every seed.
    """
    ndir = 1 if dim == 1 else dim - 1
    width = 2 + 2 * ndir
    m = max(0, math.ceil(math.log2(num_samples)))
    u = qmc.Sobol(width, scramble=True, seed=seed).random_base2(m)[:num_samples]
    lx = np.log(x_range[0]) + u[:, 0] * np.log(x_range[1] / x_range[0])
    ls = np.log(ratio_range[0]) + u[:, 1] * np.log(ratio_range[1] / ratio_range[0])
    xn, yn = np.exp(lx), np.exp(lx + ls)
    ex = _directions(u[:, 2 : 2 + ndir], dim)
    ey = _directions(u[:, 2 + ndir :], dim)
    return xn[:, None] * ex, yn[:, None] * ey


def _pair_ratio(dim, alpha, gamma, x, y, refine=0) -> tuple[float, float]:
    xn, yn = float(np.linalg.norm(x)), float(np.linalg.norm(y))
    q = hormander_quadrature(xn, float(np.linalg.norm(x - y)), refine=refine)
    return hormander_norm(dim, alpha, x, y, q), yn**gamma / xn ** (dim + gamma)


def _polish(dim, alpha, gamma, x, y, refine, ratio_range):
    """Locally maximize the ratio over (|y|/|x|, angle), which is all it depends on."""
    xn = float(np.linalg.norm(x))
    s0 = float(np.linalg.norm(y)) / xn
    cos0 = float(np.dot(x, y)) / (xn * s0 * xn)
    lo, hi = math.log(ratio_range[0]), math.log(ratio_range[1])

    def pair(p):
        s = math.exp(p[0])
        if dim == 1:
            return np.array([1.0]), np.array([math.copysign(s, cos0)])
        th = p[1]
        yy = np.zeros(dim)
        yy[0], yy[1] = s * math.cos(th), s * math.sin(th)
        xx = np.zeros(dim)
        xx[0] = 1.0
        return xx, yy

    def neg(p):
        v, b = _pair_ratio(dim, alpha, gamma, *pair(p), refine)
        return -v / b

    p0 = [min(max(math.log(s0), lo), hi)]
    bounds = [(lo, hi)]
    if dim > 1:
        p0.append(math.acos(max(-1.0, min(1.0, cos0))))
        bounds.append((0.0, math.pi))
    res = optimize.minimize(neg, p0, method="L-BFGS-B", bounds=bounds, options={"maxiter": 40})
    xx, yy = pair(res.x)
    # restore the physical scale of the sample
    v, b = _pair_ratio(dim, alpha, gamma, xx * xn, yy * xn, refine)
    return (list(xx * xn), list(yy * xn), v, b)


def hormander_scan(
    dim: int,
    alpha: float,
    num_samples: int = 128,
    seed: int = 0,
    *,
    refine: int = 0,
    gamma: float | None = None,
    polish: int = 3,
    ratio_range=(1e-4, 0.5),
) -> HormanderReport:
    """sup over sampled pairs of hormander_norm / (|y|^gamma / |x|^(n+gamma)).

    The ``polish`` best samples seed a bounded local maximization of the
    ratio; the reported ``sup_ratio`` covers both sampled and polished pairs.
    """
    if num_samples < 100:
        raise ValueError("num_samples must be at least 100")
    if gamma is None:
        gamma = hormander_gamma(dim, alpha)
    xs, ys = hormander_samples(dim, num_samples, seed, ratio_range=ratio_range)
    samples = []
    for x, y in zip(xs, ys):
        val, bound = _pair_ratio(dim, alpha, gamma, x, y, refine)
        samples.append((x.tolist(), y.tolist(), val, bound))
    ratios = np.array([s[2] / s[3] for s in samples])
    polished = [
        _polish(dim, alpha, gamma, xs[i], ys[i], refine, ratio_range) for i in np.argsort(ratios)[::-1][:polish]
    ]
    best = max([ratios.max()] + [p[2] / p[3] for p in polished])
    return HormanderReport(
        float(alpha),
        dim,
        float(gamma),
        int(seed),
        samples,
        polished,
        float(best),
        float(ratios.max()),
        float(np.median(ratios)),
    )


# ---------------------------------------------------------------------------
# measure-theoretic helpers


def symmetric_difference_measure(dim: int, s, t) -> np.ndarray:
    """|B(x,t) symmetric-difference B(x-y,t)| for centres at distance s = |y|."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    vol = unit_ball_volume(dim) * t**dim
    u = np.minimum(s, 2 * t)
    if dim == 1:
        lens = 2 * t - u
    elif dim == 2:
        lens = 2 * t * t * np.arccos(u / (2 * t)) - (u / 2) * np.sqrt(np.maximum(4 * t * t - u * u, 0.0))
    elif dim == 3:
        lens = math.pi * (4 * t + u) * (2 * t - u) ** 2 / 12
    else:
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    return 2 * (vol - lens)


@lru_cache(maxsize=None)
def _corner_cube_integral(dim: int, beta: float, order: int = 24) -> float:
    """int over [0,1]^n of |z|^(beta-n), by self-similarity around the origin."""
    x, w = np.polynomial.legendre.leggauss(order)
    shell = 0.0
    for corner in np.ndindex(*(2,) * dim):
        if not any(corner):
            continue
        lo = np.array(corner) * 0.5
        pts = np.meshgrid(*[lo[a] + 0.25 * (x + 1) for a in range(dim)], indexing="ij")
        wts = math.prod(0.25 for _ in range(dim)) * np.prod(np.meshgrid(*[w] * dim, indexing="ij"), axis=0)
        r = np.sqrt(sum(p * p for p in pts))
        shell += float(np.sum(wts * r ** (beta - dim)))
    return shell / (1 - 2.0 ** (-beta))


def cell_union_potential(dim: int, beta: float, cells, h: float, order: int = 10) -> float:
    """int_E |z|^(beta-n) dz for E a union of grid cells ``h*[k, k+1)``.

    ``cells`` is an integer array of lower-corner indices, shape (m, dim).
    """
    if not 0 < beta < dim:
        raise ValueError("beta must lie in (0, n)")
    cells = np.atleast_2d(np.asarray(cells, dtype=int))
    x, w = np.polynomial.legendre.leggauss(order)
    ref = np.meshgrid(*[(x + 1) / 2] * dim, indexing="ij")
    wref = np.prod(np.meshgrid(*[w / 2] * dim, indexing="ij"), axis=0)
    corner = _corner_cube_integral(dim, beta)
    total = 0.0
    for k in cells:
        if np.all((k == 0) | (k == -1)):
            total += corner * h**beta
            continue
        pts = [h * (k[a] + ref[a]) for a in range(dim)]
        r = np.sqrt(sum(p * p for p in pts))
        total += float(np.sum(wref * r ** (beta - dim))) * h**dim
    return total


def riesz_set_constant(dim: int, beta: float) -> float:
    """sup_E int_E |z|^(beta-n) / |E|^(beta/n), attained by balls centred at 0."""
    return unit_sphere_area(dim) / (beta * unit_ball_volume(dim) ** (beta / dim))
