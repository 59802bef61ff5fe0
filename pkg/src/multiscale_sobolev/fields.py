"""Periodic sampled fields on rectangular grids.

Every computation in the package runs on a flat torus: a box of side
lengths ``period`` sampled at ``sizes`` points per axis. Fourier
coefficients are normalized as

    f(x) = sum_k c_k exp(i xi_k . x),      c_k = fftn(f)[k] / prod(sizes)

so that Parseval reads ``sum |f|^2 h_vol = volume * sum |c_k|^2``. This is the
only place the normalization is fixed; everything else goes through
:func:`forward_spectrum` / :func:`inverse_spectrum`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "GridSpec",
    "ScalarField",
    "SpectralField",
    "make_grid",
    "forward_spectrum",
    "inverse_spectrum",
    "lp_norm",
    "sample",
]

_SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    dim: int
    sizes: tuple[int, ...]
    period: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if len(self.sizes) != self.dim or len(self.period) != self.dim:
            raise ValueError("sizes and period must have length dim")
        if any(int(s) != s or s < 4 for s in self.sizes):
            raise ValueError(f"all sizes must be integers >= 4, got {self.sizes}")
        if any(not (math.isfinite(p) and p > 0) for p in self.period):
            raise ValueError(f"all periods must be finite and positive, got {self.period}")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.sizes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(p / s for p, s in zip(self.period, self.sizes))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def volume(self) -> float:
        return math.prod(self.period)

    @property
    def npoints(self) -> int:
        return math.prod(self.sizes)

    @property
    def min_period(self) -> float:
        return min(self.period)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Node coordinates as an ``indexing='ij'`` meshgrid, origin at node 0."""
        axes = [np.arange(s) * h for s, h in zip(self.sizes, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def wavevectors(self) -> tuple[np.ndarray, ...]:
        """Angular wavevector components xi_a = 2 pi k_a / period_a, FFT ordering."""
        axes = [2 * np.pi * np.fft.fftfreq(s, d=h) for s, h in zip(self.sizes, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def freq_mag(self) -> np.ndarray:
        k = self.wavevectors()
        mag = np.sqrt(sum(c * c for c in k))
        mag.flags.writeable = False
        return mag

    def offsets(self) -> tuple[np.ndarray, ...]:
        """Minimum-image displacement of every node from node 0."""
        out = []
        for s, h, p in zip(self.sizes, self.spacing, self.period):
            d = np.arange(s) * h
            d = np.where(d > p / 2, d - p, d)
            out.append(d)
        return tuple(np.meshgrid(*out, indexing="ij"))


def make_grid(dim: int, sizes, period) -> GridSpec:
    sizes = tuple(int(s) for s in np.atleast_1d(sizes))
    period = tuple(float(p) for p in np.atleast_1d(period))
    return GridSpec(dim, sizes, period)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size != self.grid.npoints:
            raise ValueError(
                f"expected {self.grid.npoints} values for grid {self.grid.sizes}, got {vals.size}"
            )
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        _check_same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * float(c))

    __rmul__ = __mul__


def _check_same_grid(a: ScalarField, b: ScalarField) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.size != self.grid.npoints:
            raise ValueError("coefficient count must equal the number of grid nodes")
        object.__setattr__(self, "coeffs", c.reshape(self.grid.shape))

    @property
    def freq_mag(self) -> np.ndarray:
        return self.grid.freq_mag

    def multiply(self, multiplier) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * multiplier)

    def is_hermitian(self, tol: float = _SYMMETRY_TOL) -> bool:
        return _hermitian_defect(self.coeffs) <= tol * max(1.0, float(np.max(np.abs(self.coeffs))))


def _reflect(c: np.ndarray) -> np.ndarray:
    """Coefficient at -k, for every k, in FFT ordering."""
    return np.roll(np.flip(c), 1, axis=tuple(range(c.ndim)))


def _hermitian_defect(c: np.ndarray) -> float:
    return float(np.max(np.abs(c - np.conj(_reflect(c))))) if c.size else 0.0


def forward_spectrum(f: ScalarField) -> SpectralField:
    return SpectralField(f.grid, np.fft.fftn(f.values) / f.grid.npoints)


def inverse_spectrum(spec: SpectralField) -> ScalarField:
    scale = max(1.0, float(np.max(np.abs(spec.coeffs))))
    defect = _hermitian_defect(spec.coeffs)
    if defect > _SYMMETRY_TOL * scale:
        raise ValueError(
            f"coefficients are not conjugate-symmetric (defect {defect:.3g}); "
            "the multiplier applied was not real and even"
        )
    values = np.fft.ifftn(spec.coeffs).real * spec.grid.npoints
    return ScalarField(spec.grid, values)


def lp_norm(f: ScalarField, p: float) -> float:
    """Discrete L^p norm with the physical volume element; ``p=np.inf`` gives the max."""
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    a = np.abs(f.values)
    m = float(a.max()) if a.size else 0.0
    if m == 0.0:
        return 0.0
    # scale out the max so large p does not overflow
    return m * float(np.sum((a / m) ** p) * f.grid.cell_volume) ** (1.0 / p)


def sample(grid: GridSpec, func) -> ScalarField:
    """Evaluate ``func(*coords)`` on the grid nodes."""
    return ScalarField(grid, np.broadcast_to(func(*grid.coordinates()), grid.shape))
