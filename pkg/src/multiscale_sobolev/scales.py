"""Discretizations of the scale integral over (0, inf) with measure dt/t.

A :class:`ScaleQuadrature` is a composite Gauss-Legendre rule in ``u = log t``
on a list of panels. One node per panel is the log-midpoint rule used by the
square functions; higher orders with breakpoints are used where the integrand
jumps (kernel scans).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ScaleQuadrature", "make_scale_quadrature", "graded_scale_quadrature"]


@dataclass(frozen=True, eq=False)
class ScaleQuadrature:
    """Nodes ``t_k`` and weights ``w_k`` with sum_k w_k g(t_k) ~ int g(t) dt/t.

    ``edges`` are the panel boundaries in log t; ``order`` is the number of
    Gauss-Legendre nodes per panel.
    """

    edges: np.ndarray
    order: int

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 2 or not np.all(np.diff(e) > 0):
            raise ValueError("panel edges must be strictly increasing")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        e.flags.writeable = False
        object.__setattr__(self, "edges", e)
        x, w = np.polynomial.legendre.leggauss(self.order)
        lo, hi = e[:-1, None], e[1:, None]
        half = (hi - lo) / 2
        u = (lo + hi) / 2 + half * x[None, :]
        nodes = np.exp(u).ravel()
        weights = (half * w[None, :]).ravel()
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def t_min(self) -> float:
        return float(math.exp(self.edges[0]))

    @property
    def t_max(self) -> float:
        return float(math.exp(self.edges[-1]))

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def log_step(self) -> float:
        return float(np.max(np.diff(self.edges)))

    def refine(self) -> "ScaleQuadrature":
        """Split every panel in two (doubles K, halves the log step)."""
        mids = (self.edges[:-1] + self.edges[1:]) / 2
        edges = np.empty(2 * self.edges.size - 1)
        edges[0::2] = self.edges
        edges[1::2] = mids
        return ScaleQuadrature(edges, self.order)

    def scaled(self, factor: float) -> "ScaleQuadrature":
        """Same rule with every node multiplied by ``factor``."""
        return ScaleQuadrature(self.edges + math.log(factor), self.order)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def make_scale_quadrature(t_min: float, t_max: float, K: int) -> ScaleQuadrature:
    """K geometric nodes, midpoint-in-log weights, over [t_min, t_max]."""
    if not (0 < t_min < t_max) or not math.isfinite(t_max):
        raise ValueError(f"need 0 < t_min < t_max, got ({t_min}, {t_max})")
    if K < 8:
        raise ValueError(f"need at least 8 scales, got K={K}")
    edges = np.linspace(math.log(t_min), math.log(t_max), int(K) + 1)
    return ScaleQuadrature(edges, 1)


def graded_scale_quadrature(
    t_min: float,
    t_max: float,
    breakpoints=(),
    *,
    max_log_step: float = 0.25,
    order: int = 8,
    grading_levels: int = 12,
) -> ScaleQuadrature:
    """Composite Gauss rule with panel edges at ``breakpoints``.

    Panels are geometrically graded toward each breakpoint so that jumps and
    logarithmic kinks of the integrand there are resolved.
    """
    if not (0 < t_min < t_max):
        raise ValueError(f"need 0 < t_min < t_max, got ({t_min}, {t_max})")
    lo, hi = math.log(t_min), math.log(t_max)
    bps = sorted({math.log(b) for b in breakpoints if t_min < b < t_max})
    cuts = [lo, *bps, hi]
    edges = [lo]
    for a, b in zip(cuts[:-1], cuts[1:]):
        width = b - a
        inner = set(np.linspace(a, b, max(1, math.ceil(width / max_log_step)) + 1))
        # grade toward interior breakpoints on both sides
        step = min(max_log_step, width / 2)
        for level in range(1, grading_levels + 1):
            d = step * 2.0 ** (-level)
            if a != lo:
                inner.add(a + d)
            if b != hi:
                inner.add(b - d)
        edges.extend(sorted(x for x in inner if a < x <= b))
    edges = np.unique(np.asarray(edges))
    return ScaleQuadrature(edges, order)
