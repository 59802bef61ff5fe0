"""Test-field generators shared by the experiments and the test-suite.

Every generator takes a :class:`~numpy.random.Generator` (when random) so that
a seed fixes the whole corpus.
"""

from __future__ import annotations

import numpy as np

from .fields import GridSpec, ScalarField, lp_norm

__all__ = [
    "single_mode",
    "band_limited",
    "gaussian_bump",
    "polynomial_window",
    "make_corpus",
]


def single_mode(grid: GridSpec, k, amplitude: float = 1.0, phase: float = 0.0) -> ScalarField:
    """amplitude * cos(xi_k . x + phase) for the integer wave index ``k``."""
    k = np.broadcast_to(np.asarray(k, dtype=float), (grid.dim,))
    xs = grid.coordinates()
    arg = sum(2 * np.pi * ka / p * x for ka, p, x in zip(k, grid.period, xs))
    return ScalarField(grid, amplitude * np.cos(arg + phase), meta={"kind": "mode", "k": [int(v) for v in k]})


def band_limited(grid: GridSpec, rng: np.random.Generator, kmax: int = 8) -> ScalarField:
    """Mean-zero random field with modes |k_a| <= kmax, unit L^2 norm."""
    kmax = min(kmax, min(grid.sizes) // 2 - 1)
    shape = grid.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    mask = np.ones(shape, dtype=bool)
    for axis, s in enumerate(grid.sizes):
        idx = np.abs(np.fft.fftfreq(s, d=1.0 / s))
        m = idx <= kmax
        mask &= m.reshape([-1 if a == axis else 1 for a in range(grid.dim)])
    c = np.where(mask, c, 0)
    c.flat[0] = 0
    values = np.fft.ifftn(c).real
    f = ScalarField(grid, values)
    return ScalarField(grid, values / lp_norm(f, 2), meta={"kind": "band", "kmax": kmax})


def gaussian_bump(grid: GridSpec, width: float, center=None) -> ScalarField:
    """Periodized-by-minimum-image Gaussian with its mean removed."""
    center = np.zeros(grid.dim) if center is None else np.asarray(center, dtype=float)
    xs = grid.coordinates()
    r2 = 0.0
    for x, c, p in zip(xs, center, grid.period):
        d = (x - c + p / 2) % p - p / 2
        r2 = r2 + d * d
    v = np.exp(-r2 / (2 * width**2))
    return ScalarField(grid, v - v.mean(), meta={"kind": "gauss", "width": width})


def polynomial_window(grid: GridSpec, coeffs, radius: float, center=None) -> ScalarField:
    """A polynomial in the first coordinate times a smooth compact window.

    ``coeffs[i]`` multiplies ``(x_1 - c_1)^i``; the window is
    ``exp(1 - 1/(1 - (r/radius)^2))`` inside the ball of given radius.
    """
    center = np.asarray([p / 2 for p in grid.period] if center is None else center, dtype=float)
    xs = grid.coordinates()
    ds = [x - c for x, c in zip(xs, center)]
    r2 = sum(d * d for d in ds) / radius**2
    window = np.zeros(grid.shape)
    inside = r2 < 1
    window[inside] = np.exp(1 - 1 / (1 - r2[inside]))
    poly = np.polynomial.polynomial.polyval(ds[0], np.asarray(coeffs, dtype=float))
    v = poly * window
    return ScalarField(grid, v - v.mean(), meta={"kind": "polywin", "radius": radius})


def make_corpus(grid: GridSpec, count: int, seed: int, kinds=("mode", "band", "gauss", "polywin")) -> list[ScalarField]:
    """A deterministic mixed corpus of ``count`` mean-zero fields."""
    rng = np.random.default_rng(seed)
    L = grid.min_period
    out = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        if kind == "mode":
            k = rng.integers(1, 6, size=grid.dim)
            f = single_mode(grid, k, phase=float(rng.uniform(0, 2 * np.pi)))
        elif kind == "band":
            f = band_limited(grid, rng, kmax=int(rng.integers(3, 9)))
        elif kind == "gauss":
            f = gaussian_bump(grid, float(rng.uniform(0.06, 0.12)) * L, rng.uniform(0, L, size=grid.dim))
        elif kind == "polywin":
            f = polynomial_window(grid, rng.standard_normal(3), float(rng.uniform(0.25, 0.4)) * L)
        else:
            raise ValueError(f"unknown corpus kind {kind!r}")
        f.meta["id"] = f"{kind}-{i:03d}"
        out.append(f)
    return out
