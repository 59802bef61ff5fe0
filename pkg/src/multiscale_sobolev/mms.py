"""The multiscale square function on a finite metric measure space.

A space is a finite set of points with a symmetric distance matrix and
positive weights. Every point keeps its neighbours sorted by distance, so the
open ball ``B(x, t) = {y : d(y, x) < t}`` is a prefix of that ordering and a
ball mean is a ratio of two cumulative sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import smoothness_split
from .fields import GridSpec, ScalarField, forward_spectrum, lp_norm, make_grid
from .multiscale import AUTO, SmoothnessOrder, auto_corrections, square_function
from .scales import ScaleQuadrature, make_scale_quadrature

__all__ = [
    "MetricMeasureSpace",
    "MmsSquareResult",
    "GridConsistencyReport",
    "build_space",
    "torus_space",
    "default_mms_quadrature",
    "square_function_mms",
    "grid_consistency",
    "resample",
]

_METRIC_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MetricMeasureSpace:
    ids: tuple
    dist: np.ndarray
    weights: np.ndarray
    coords: np.ndarray | None = None
    order: np.ndarray = field(init=False, repr=False)
    sorted_dist: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        order = np.argsort(self.dist, axis=1, kind="stable")
        sd = np.take_along_axis(self.dist, order, axis=1)
        for a in (order, sd, self.dist, self.weights):
            a.flags.writeable = False
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "sorted_dist", sd)

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def nearest_neighbor_distances(self) -> np.ndarray:
        return self.sorted_dist[:, 1] if self.size > 1 else np.zeros(1)

    def ball_counts(self, t) -> np.ndarray:
        """Number of points in B(x_i, t) for every i and every t, shape (size, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([np.searchsorted(row, t, side="left") for row in self.sorted_dist])

    def ball(self, i: int, t: float) -> np.ndarray:
        """Indices of the points in the open ball B(x_i, t)."""
        k = int(np.searchsorted(self.sorted_dist[i], t, side="left"))
        return self.order[i, :k]


def build_space(points, dist, weights, *, coords=None, triangle_samples: int = 2000, seed: int = 0) -> MetricMeasureSpace:
    """Validate and index a finite metric measure space.

    ``dist`` is an (m, m) matrix, or a callable mapping two coordinate arrays
    of shape (m, k) and (1, k) to distances (``coords`` required then).
    """
    ids = tuple(points)
    m = len(ids)
    if m < 1:
        raise ValueError("a space needs at least one point")
    if callable(dist):
        if coords is None:
            raise ValueError("a distance callable needs coordinates")
        c = np.asarray(coords, dtype=float).reshape(m, -1)
        D = np.stack([np.asarray(dist(c, c[i : i + 1]), dtype=float).reshape(m) for i in range(m)])
    else:
        D = np.array(dist, dtype=float)
    if D.shape != (m, m):
        raise ValueError(f"distance matrix must be {m}x{m}, got {D.shape}")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise ValueError("distances must be finite and non-negative")
    scale = max(float(D.max()), 1e-300)
    if np.any(np.abs(np.diag(D)) > _METRIC_TOL * scale):
        raise ValueError("d(x, x) must vanish")
    if np.any(np.abs(D - D.T) > _METRIC_TOL * scale):
        raise ValueError("distance is not symmetric")
    offdiag = D[~np.eye(m, dtype=bool)]
    if offdiag.size and np.any(offdiag <= 0):
        raise ValueError("distinct points must be at positive distance")
    w = np.array(weights, dtype=float).reshape(-1)
    if w.shape != (m,):
        raise ValueError("one weight per point is required")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise ValueError("every point must carry a positive weight")
    if m >= 3 and triangle_samples > 0:
        rng = np.random.default_rng(seed)
        a, b, c = rng.integers(0, m, size=(3, triangle_samples))
        if np.any(D[a, c] > D[a, b] + D[b, c] + _METRIC_TOL * scale):
            raise ValueError("triangle inequality violated")
    return MetricMeasureSpace(ids, D, w, None if coords is None else np.asarray(coords, dtype=float))


def torus_space(grid: GridSpec) -> MetricMeasureSpace:
    """Grid nodes with the flat-torus distance and cell-volume weights."""
    xs = np.stack([c.ravel() for c in grid.coordinates()], axis=1)
    P = np.asarray(grid.period)
    diff = np.abs(xs[:, None, :] - xs[None, :, :])
    diff = np.minimum(diff, P - diff)
    D = np.sqrt(np.sum(diff * diff, axis=-1))
    w = np.full(grid.npoints, grid.cell_volume)
    return build_space(range(grid.npoints), D, w, coords=xs)


@dataclass(frozen=True)
class MmsSquareResult:
    values: np.ndarray
    t_min: float
    t_max: float
    K: int
    min_occupancy: int
    mean_occupancy: float
    singleton_fraction: float

    def as_dict(self) -> dict:
        return {
            "t_min": self.t_min,
            "t_max": self.t_max,
            "K": self.K,
            "min_occupancy": self.min_occupancy,
            "mean_occupancy": self.mean_occupancy,
            "singleton_fraction": self.singleton_fraction,
            "values": self.values.tolist(),
        }


def default_mms_quadrature(space: MetricMeasureSpace, K: int = 64) -> ScaleQuadrature:
    """[1st percentile nearest-neighbour distance, diameter]."""
    nn = space.nearest_neighbor_distances()
    lo, hi = float(np.percentile(nn, 1)), space.diameter
    if not lo < hi:
        raise ValueError("nearest-neighbour distance equals the diameter; pass explicit scales")
    return make_scale_quadrature(lo, hi, K)


def square_function_mms(
    space: MetricMeasureSpace,
    f,
    gs=(),
    order: SmoothnessOrder | float = 1.0,
    quad: ScaleQuadrature | None = None,
    *,
    beyond_diameter: bool = False,
) -> MmsSquareResult:
    """Per-point square function with R_N(y,x) built from d(y,x)^(2j).

    Scales are truncated at the diameter unless ``beyond_diameter`` is set.
    Balls holding only their centre contribute 0 and are counted in
    ``singleton_fraction``; a configuration where every ball is a singleton
    is rejected.
    """
    if not isinstance(order, SmoothnessOrder):
        order = SmoothnessOrder(float(order))
    N = smoothness_split(order.alpha)
    m = space.size
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.shape != (m,):
        raise ValueError("f must have one value per point")
    gs = [np.asarray(g, dtype=float).reshape(-1) for g in gs]
    if len(gs) != N:
        raise ValueError(f"expected {N} correction arrays for N={N}, got {len(gs)}")
    if any(g.shape != (m,) for g in gs):
        raise ValueError("every g must have one value per point")
    if quad is None:
        quad = default_mms_quadrature(space)
    if quad.t_max > space.diameter * (1 + 1e-12) and not beyond_diameter:
        raise ValueError(f"t_max={quad.t_max:.6g} exceeds the diameter {space.diameter:.6g}")
    t = quad.nodes
    counts = space.ball_counts(t)
    if np.all(counts <= 1):
        raise ValueError("every ball at every scale holds only its centre; raise t_max")
    idx = np.maximum(counts - 1, 0)

    order_idx = space.order
    w_sorted = space.weights[order_idx]

    def prefix_mean(vals_sorted):
        cum = np.cumsum(w_sorted * vals_sorted, axis=1)
        return np.take_along_axis(cum, idx, axis=1)

    W = prefix_mean(np.ones_like(w_sorted))
    A = prefix_mean(f[order_idx]) / W - f[:, None]
    d2 = space.sorted_dist**2
    for j in range(1, N):
        A -= gs[j - 1][:, None] * prefix_mean(d2**j) / W
    if N >= 1:
        A -= (prefix_mean(gs[-1][order_idx]) / W) * (prefix_mean(d2**N) / W)
    A = np.where(counts <= 1, 0.0, A)
    S2 = (A * A) @ (quad.weights * t ** (-2 * order.alpha))
    return MmsSquareResult(
        np.sqrt(S2),
        quad.t_min,
        quad.t_max,
        quad.size,
        int(counts.min()),
        float(counts.mean()),
        float(np.mean(counts <= 1)),
    )


# ---------------------------------------------------------------------------
# grid consistency


def resample(field: ScalarField, sizes) -> ScalarField:
    """Spectral resampling of a field onto a grid with the same periods."""
    src = field.grid
    dst = make_grid(src.dim, sizes, src.period)
    c = forward_spectrum(field).coeffs
    out = np.zeros(dst.shape, dtype=complex)
    sl_src, sl_dst = [], []
    for s_in, s_out in zip(src.sizes, dst.sizes):
        keep = min(s_in, s_out) // 2
        k = np.r_[0:keep, -keep + 1 : 0] if keep > 0 else np.r_[0:1]
        sl_src.append(k % s_in)
        sl_dst.append(k % s_out)
    out[np.ix_(*sl_dst)] = c[np.ix_(*sl_src)]
    values = np.fft.ifftn(out).real * dst.npoints
    return ScalarField(dst, values)


@dataclass(frozen=True)
class GridConsistencyReport:
    resolutions: tuple[int, ...]
    errors: tuple[float, ...]  # MMS against the spectral square function
    direct_gap: tuple[float, ...]  # MMS against the direct-mode grid square function
    observed_order: float | None
    monotone: bool

    def as_dict(self) -> dict:
        return {
            "resolutions": list(self.resolutions),
            "errors": list(self.errors),
            "direct_gap": list(self.direct_gap),
            "observed_order": self.observed_order,
            "monotone": self.monotone,
        }


def grid_consistency(
    field,
    order: SmoothnessOrder | float,
    resolutions,
    *,
    t_range=(0.05, 0.45),
    K: int = 512,
) -> GridConsistencyReport:
    """MMS estimates on torus grids of increasing resolution against spectral truth.

    ``field`` is a band-limited :class:`ScalarField` (resampled spectrally) or
    a callable ``f(*coords)`` together with an explicit 1-periodic grid.
    ``t_range`` is in units of the smallest period. Lattice balls jump as t
    crosses lattice shells; a dense scale grid averages those jumps out.
    """
    if not isinstance(order, SmoothnessOrder):
        order = SmoothnessOrder(float(order))
    res = tuple(int(r) for r in resolutions)
    if any(b <= a for a, b in zip(res, res[1:])):
        raise ValueError("resolutions must be strictly increasing")
    errors, gaps = [], []
    for r in res:
        if isinstance(field, ScalarField):
            f = resample(field, [r] * field.grid.dim)
        else:
            dim, fn = field
            g = make_grid(dim, [r] * dim, [1.0] * dim)
            f = ScalarField(g, np.broadcast_to(fn(*g.coordinates()), g.shape))
        grid = f.grid
        L = grid.min_period
        quad = make_scale_quadrature(t_range[0] * L, t_range[1] * L, K)
        gs = auto_corrections(f, order.N)
        space = torus_space(grid)
        mms = square_function_mms(space, f.values.ravel(), [g.values.ravel() for g in gs], order, quad)
        S_mms = ScalarField(grid, mms.values)
        truth = square_function(f, AUTO, order, quad, "spectral")
        direct = square_function(f, gs, order, quad, "direct")
        scale = lp_norm(truth, 2)
        errors.append(lp_norm(S_mms - truth, 2) / scale if scale > 0 else 0.0)
        dscale = lp_norm(direct, 2)
        gaps.append(lp_norm(S_mms - direct, 2) / dscale if dscale > 0 else 0.0)
    observed = None
    if len(res) >= 2 and errors[0] > 0 and errors[-1] > 0:
        observed = -math.log(errors[-1] / errors[0]) / math.log(res[-1] / res[0])
    monotone = all(b < a for a, b in zip(errors, errors[1:])) or all(e == 0 for e in errors)
    return GridConsistencyReport(res, tuple(errors), tuple(gaps), observed, monotone)
