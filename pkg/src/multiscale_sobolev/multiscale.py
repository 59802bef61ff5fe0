"""Ball means, the fractional Laplacian and the multiscale square functions.

All square functions are assembled scale by scale. For every node ``t_k`` of
a :class:`ScaleQuadrature` we form the ball average ``A_k(x)`` of the
corrected remainder

    R_N(y, x) = f(y) - f(x) - sum_{1<=j<N} g_j(x) |y-x|^(2j) - (g_N)_{B(x,t)} |y-x|^(2N)

and accumulate ``S(x)^2 = sum_k w_k t_k^(-2 alpha) A_k(x)^2``.

Two evaluation modes are offered:

``spectral``
    ``A_k`` is a Fourier multiplier: ``(F(t|xi|) - 1) f^ - sum_j M_j t^(2j) g_j^
    - M_N t^(2N) F(t|xi|) g_N^``. Scales beyond half a period are allowed
    here; the ball mean is then the R^n mean of the periodic extension.
``direct``
    ``A_k`` averages grid samples whose node lies strictly inside the ball
    (circular FFT convolution with the lattice ball indicator). The
    continuous moments ``M_j t^(2j)`` are replaced by the matching lattice
    moments so that polynomial identities hold exactly on the grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import constant_I, constant_S0, multiplier_deficit, smoothness_split
from .fields import (
    GridSpec,
    ScalarField,
    SpectralField,
    forward_spectrum,
    inverse_spectrum,
    lp_norm,
)
from .radial import ball_profile, laplacian_power_L, moment_M
from .scales import ScaleQuadrature, make_scale_quadrature

__all__ = [
    "AUTO",
    "SmoothnessOrder",
    "EquivalenceReport",
    "make_scale_quadrature",
    "default_scale_quadrature",
    "ball_mean",
    "frac_laplacian",
    "laplacian_power",
    "auto_corrections",
    "remainder_mean",
    "square_function",
    "s0_square_function",
    "recover_g",
    "equivalence_report",
    "s0_ratio",
    "spectral_support",
]

AUTO = "auto"
_MODES = ("spectral", "direct")
# support threshold relative to the largest coefficient
_SUPPORT_TOL = 1e-12
# a usable quadrature resolves both tau -> 0 and tau -> inf
_TAU_LO, _TAU_HI = 1e-2, 1e2


@dataclass(frozen=True)
class SmoothnessOrder:
    """Smoothness ``alpha`` and integrability exponent ``p``; ``N`` is derived."""

    alpha: float
    p: float = 2.0

    def __post_init__(self):
        smoothness_split(self.alpha)
        if not (1 < self.p < math.inf):
            raise ValueError(f"p must lie in (1, inf), got {self.p}")

    @property
    def N(self) -> int:
        return smoothness_split(self.alpha)


@dataclass(frozen=True)
class EquivalenceReport:
    alpha: float
    p: float
    norm_S: float
    norm_frac: float
    ratio: float
    predicted: float | None
    quadrature: dict = field(default_factory=dict)

    @property
    def deviation(self) -> float | None:
        """ratio / predicted - 1 (p = 2 only)."""
        if self.predicted is None:
            return None
        return self.ratio / self.predicted - 1.0

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "p": self.p,
            "norm_S": self.norm_S,
            "norm_frac": self.norm_frac,
            "ratio": self.ratio,
            "predicted": self.predicted,
            "deviation": self.deviation,
            "quadrature": dict(self.quadrature),
        }


def _check_mode(mode: str) -> None:
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")


def _check_embeds(grid: GridSpec, t_max: float, what: str = "t") -> None:
    if not t_max < grid.min_period / 2:
        raise ValueError(
            f"{what}={t_max:.6g} is not below half the smallest period ({grid.min_period / 2:.6g}); "
            "the ball would wrap around the torus"
        )


def spectral_support(field: ScalarField) -> tuple[float, float]:
    """Smallest and largest nonzero |xi| carrying a non-negligible coefficient."""
    c = np.abs(forward_spectrum(field).coeffs)
    mag = field.grid.freq_mag
    live = (c > _SUPPORT_TOL * max(float(c.max()), 1e-300)) & (mag > 0)
    if not np.any(live):
        raise ValueError("field has no nonzero frequency content")
    return float(mag[live].min()), float(mag[live].max())


def default_scale_quadrature(field: ScalarField, K: int = 512, span: float = 1e3) -> ScaleQuadrature:
    """Scales ``[1/(span |xi|_max), span/|xi|_min]`` over the field's spectral support."""
    lo, hi = spectral_support(field)
    return make_scale_quadrature(1.0 / (span * hi), span / lo, K)


def _range_meta(field: ScalarField, quad: ScaleQuadrature) -> dict:
    try:
        lo, hi = spectral_support(field)
    except ValueError:
        return {"t_min": quad.t_min, "t_max": quad.t_max, "K": quad.size, "range_ok": True}
    tau_lo, tau_hi = quad.t_min * hi, quad.t_max * lo
    return {
        "t_min": quad.t_min,
        "t_max": quad.t_max,
        "K": quad.size,
        "tau_min": tau_lo,
        "tau_max": tau_hi,
        "range_ok": bool(tau_lo <= _TAU_LO and tau_hi >= _TAU_HI),
    }


# ---------------------------------------------------------------------------
# ball means


class _LatticeBall:
    """Circular averaging over lattice balls, with the discrete moments."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        off = grid.offsets()
        self.r = np.sqrt(sum(o * o for o in off))
        self._r2 = self.r**2

    def indicator(self, t: float) -> np.ndarray:
        return self.r < t

    def is_singleton(self, t: float) -> bool:
        """True when the ball holds only its centre node (``t`` at most the smallest spacing)."""
        return t <= min(self.grid.spacing)

    def moment(self, t: float, j: int) -> float:
        """Lattice mean of |d|^(2j) over the ball of radius t."""
        ind = self.indicator(t)
        return float(np.mean(self._r2[ind] ** j))

    def average(self, f_hat: np.ndarray, t: float) -> np.ndarray:
        ind = self.indicator(t)
        count = int(ind.sum())
        kern = np.fft.rfftn(ind.astype(float))
        return np.fft.irfftn(f_hat * kern, s=self.grid.shape, axes=tuple(range(self.grid.dim))) / count


def ball_mean(field: ScalarField, t: float, mode: str = "spectral") -> ScalarField:
    """Mean of ``field`` over the open ball B(x, t) at every node x."""
    _check_mode(mode)
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    _check_embeds(field.grid, t)
    if mode == "spectral":
        spec = forward_spectrum(field)
        return inverse_spectrum(spec.multiply(ball_profile(field.grid.dim, t * spec.freq_mag)))
    ball = _LatticeBall(field.grid)
    return ScalarField(field.grid, ball.average(np.fft.rfftn(field.values), t))


def frac_laplacian(field: ScalarField, alpha: float) -> ScalarField:
    """(-Delta)^(alpha/2) f via the multiplier |xi|^alpha."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    spec = forward_spectrum(field)
    return inverse_spectrum(spec.multiply(spec.freq_mag**alpha))


def laplacian_power(field: ScalarField, j: int) -> ScalarField:
    """Delta^j f, spectrally."""
    spec = forward_spectrum(field)
    return inverse_spectrum(spec.multiply((-(spec.freq_mag**2)) ** j))


def auto_corrections(field: ScalarField, N: int) -> list[ScalarField]:
    """g_j = Delta^j f / L_j for j = 1..N."""
    dim = field.grid.dim
    return [laplacian_power(field, j) * (1.0 / laplacian_power_L(dim, j)) for j in range(1, N + 1)]


def _resolve_gs(field: ScalarField, gs, N: int) -> list[ScalarField] | None:
    if isinstance(gs, str):
        if gs != AUTO:
            raise ValueError(f"gs must be a list of fields or {AUTO!r}")
        return None
    gs = list(gs)
    if len(gs) != N:
        raise ValueError(f"expected {N} correction fields for N={N}, got {len(gs)}")
    for g in gs:
        if g.grid != field.grid:
            raise ValueError("correction fields must share the grid of f")
    return gs


# ---------------------------------------------------------------------------
# square functions


class _RemainderMeans:
    """Produces A_t(x), the ball mean of R_N(., x), for successive scales."""

    def __init__(self, field: ScalarField, gs, order: SmoothnessOrder, mode: str):
        _check_mode(mode)
        self.field = field
        self.grid = field.grid
        self.order = order
        self.mode = mode
        self.N = order.N
        self.gs = _resolve_gs(field, gs, self.N)
        dim = self.grid.dim
        self.M = [float(moment_M(dim, j)) for j in range(self.N + 1)]
        if mode == "spectral":
            self.mag = self.grid.freq_mag
            self.uniq, self.inv = np.unique(self.mag, return_inverse=True)
            self.inv = self.inv.reshape(self.mag.shape)
            self.f_hat = forward_spectrum(field).coeffs
            if self.gs is not None:
                self.g_hat = [forward_spectrum(g).coeffs for g in self.gs]
        else:
            self.ball = _LatticeBall(self.grid)
            self.f_hat = np.fft.rfftn(field.values)
            gs = self.gs if self.gs is not None else auto_corrections(field, self.N)
            self.g_vals = [g.values for g in gs]
            self.gN_hat = np.fft.rfftn(gs[-1].values) if self.N >= 1 else None

    def __call__(self, t: float) -> np.ndarray:
        if self.mode == "spectral":
            return self._spectral(t)
        return self._direct(t)

    def _spectral(self, t: float) -> np.ndarray:
        dim, N = self.grid.dim, self.N
        if self.gs is None:
            mult = multiplier_deficit(dim, self.order.alpha, t * self.uniq)[self.inv]
            coeffs = mult * self.f_hat
        else:
            F = ball_profile(dim, t * self.uniq)[self.inv]
            coeffs = (F - 1.0) * self.f_hat
            for j in range(1, N):
                coeffs = coeffs - self.M[j] * t ** (2 * j) * self.g_hat[j - 1]
            if N >= 1:
                coeffs = coeffs - self.M[N] * t ** (2 * N) * F * self.g_hat[N - 1]
        return inverse_spectrum(SpectralField(self.grid, coeffs)).values

    def _direct(self, t: float) -> np.ndarray:
        N = self.N
        if self.ball.is_singleton(t):
            # R_N(x, x) = 0; skipping the FFT keeps round-off out of t^(-alpha)
            return np.zeros(self.grid.shape)
        out = self.ball.average(self.f_hat, t) - self.field.values
        for j in range(1, N):
            out = out - self.ball.moment(t, j) * self.g_vals[j - 1]
        if N >= 1:
            out = out - self.ball.moment(t, N) * self.ball.average(self.gN_hat, t)
        return out


def remainder_mean(field: ScalarField, gs, order: SmoothnessOrder, t: float, mode: str = "spectral") -> ScalarField:
    """A_t(x): the mean over B(x, t) of the corrected remainder R_N(., x)."""
    if mode == "direct":
        _check_embeds(field.grid, t)
    return ScalarField(field.grid, _RemainderMeans(field, gs, order, mode)(t))


def square_function(
    field: ScalarField,
    gs=AUTO,
    order: SmoothnessOrder | float = 1.0,
    quad: ScaleQuadrature | None = None,
    mode: str = "spectral",
) -> ScalarField:
    """Pointwise S_alpha(f, g_1, ..., g_N).

    ``gs`` is either a list of N correction fields or ``AUTO`` for
    ``g_j = Delta^j f / L_j``. When ``quad`` is omitted the scale range is
    taken from the spectral support of ``field``. ``meta['range_ok']`` is
    False when the scales do not reach both asymptotic regimes.
    """
    if not isinstance(order, SmoothnessOrder):
        order = SmoothnessOrder(float(order))
    if quad is None:
        quad = default_scale_quadrature(field)
    if mode == "direct":
        _check_embeds(field.grid, quad.t_max, "t_max")
    means = _RemainderMeans(field, gs, order, mode)
    acc = np.zeros(field.grid.shape)
    for t, w in zip(quad.nodes, quad.weights):
        a = means(float(t))
        acc += (w * t ** (-2 * order.alpha)) * a * a
    return ScalarField(field.grid, np.sqrt(acc), meta=_range_meta(field, quad))


def s0_square_function(field: ScalarField, quad: ScaleQuadrature | None = None, mode: str = "spectral") -> ScalarField:
    """S_0(f)(x)^2 = int |f_B(x,t) - f_B(x,2t)|^2 dt/t."""
    _check_mode(mode)
    if quad is None:
        quad = default_scale_quadrature(field)
    grid = field.grid
    acc = np.zeros(grid.shape)
    if mode == "spectral":
        spec = forward_spectrum(field)
        uniq, inv = np.unique(grid.freq_mag, return_inverse=True)
        inv = inv.reshape(grid.shape)
        for t, w in zip(quad.nodes, quad.weights):
            mult = ball_profile(grid.dim, t * uniq) - ball_profile(grid.dim, 2 * t * uniq)
            a = inverse_spectrum(spec.multiply(mult[inv])).values
            acc += w * a * a
    else:
        _check_embeds(grid, 2 * quad.t_max, "2 t_max")
        ball = _LatticeBall(grid)
        f_hat = np.fft.rfftn(field.values)
        for t, w in zip(quad.nodes, quad.weights):
            if ball.is_singleton(2 * t):
                continue
            a = ball.average(f_hat, t) - ball.average(f_hat, 2 * t)
            acc += w * a * a
    return ScalarField(grid, np.sqrt(acc), meta=_range_meta(field, quad))


# ---------------------------------------------------------------------------
# correction recovery


def recover_g(
    field: ScalarField,
    order: SmoothnessOrder | float,
    quad: ScaleQuadrature | None = None,
    *,
    extra_terms: int = 3,
    cond_limit: float = 1e10,
) -> list[ScalarField]:
    """Recover g_1..g_N from the small-scale behaviour of ball means.

    For smooth f the mean over B(x, t) of f - f(x) expands as
    ``sum_j M_j t^(2j) c_j(x)``; a per-point least-squares fit in these
    monomials over small scales returns ``c_j``, and the square function is
    only finite when ``g_j = c_j``.
    """
    if not isinstance(order, SmoothnessOrder):
        order = SmoothnessOrder(float(order))
    N = order.N
    if N == 0:
        return []
    grid = field.grid
    try:
        _, xi_max = spectral_support(field)
    except ValueError:
        return [ScalarField(grid, np.zeros(grid.shape)) for _ in range(N)]
    if quad is None:
        quad = make_scale_quadrature(0.02 / xi_max, 0.6 / xi_max, 16)
    ts = np.array([t for t in quad.nodes if 0.02 <= t * xi_max <= 0.6 and t < grid.min_period / 2])
    J = N + extra_terms
    if ts.size < J + 1:
        raise ValueError(
            f"only {ts.size} scales fall in the fitting window 0.02 <= t|xi|_max <= 0.6; need {J + 1}"
        )
    M = [float(moment_M(grid.dim, j)) for j in range(J + 1)]
    # columns scaled to unit size at the largest fitted scale
    scale = ts.max()
    design = np.stack([M[j] * (ts / scale) ** (2 * j) for j in range(1, J + 1)], axis=1)
    cond = np.linalg.cond(design)
    if cond > cond_limit:
        warnings.warn(f"recover_g: ill-conditioned fit (condition number {cond:.3g})", RuntimeWarning, stacklevel=2)
    spec = forward_spectrum(field)
    rows = []
    for t in ts:
        mean = inverse_spectrum(spec.multiply(ball_profile(grid.dim, t * spec.freq_mag))).values
        rows.append((mean - field.values).ravel())
    rhs = np.stack(rows)
    coef, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    return [ScalarField(grid, coef[j - 1] / scale ** (2 * j)) for j in range(1, N + 1)]


# ---------------------------------------------------------------------------
# equivalence experiment


def equivalence_report(
    field: ScalarField,
    order: SmoothnessOrder | float,
    quad: ScaleQuadrature | None = None,
    mode: str = "spectral",
) -> EquivalenceReport:
    """||S_alpha(f, AUTO)||_p against ||(-Delta)^(alpha/2) f||_p."""
    if not isinstance(order, SmoothnessOrder):
        order = SmoothnessOrder(float(order))
    if np.ptp(field.values) == 0:
        raise ValueError("field is constant; both norms vanish")
    if quad is None:
        quad = default_scale_quadrature(field)
    S = square_function(field, AUTO, order, quad, mode)
    norm_S = lp_norm(S, order.p)
    norm_frac = lp_norm(frac_laplacian(field, order.alpha), order.p)
    predicted = math.sqrt(constant_I(field.grid.dim, order.alpha)) if order.p == 2 else None
    return EquivalenceReport(order.alpha, order.p, norm_S, norm_frac, norm_S / norm_frac, predicted, dict(S.meta))


def s0_ratio(field: ScalarField, quad: ScaleQuadrature | None = None) -> tuple[float, float]:
    """(||S_0 f||_2 / ||f||_2, predicted constant) for a mean-zero field."""
    S = s0_square_function(field, quad)
    return lp_norm(S, 2) / lp_norm(field, 2), math.sqrt(constant_S0(field.grid.dim))
