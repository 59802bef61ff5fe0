import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multiscale_sobolev.scales import ScaleQuadrature, graded_scale_quadrature, make_scale_quadrature


def test_rejects_too_few_scales():
    with pytest.raises(ValueError):
        make_scale_quadrature(1.0, math.e, 1)


@pytest.mark.parametrize("lo, hi", [(0.0, 1.0), (1.0, 1.0), (2.0, 1.0), (1.0, math.inf)])
def test_rejects_degenerate_range(lo, hi):
    with pytest.raises(ValueError):
        make_scale_quadrature(lo, hi, 16)


def test_weight_sum():
    q = make_scale_quadrature(0.01, 1.0, 64)
    assert q.weights.sum() == pytest.approx(math.log(100), abs=1e-12)
    assert q.size == 64


def test_power_integral():
    a, b = 0.1, 2.0
    q = make_scale_quadrature(a, b, 256)
    assert q.integrate(q.nodes**2) == pytest.approx((b * b - a * a) / 2, abs=1e-4)


def test_geometric_nodes_inside_range():
    q = make_scale_quadrature(1e-3, 1e3, 32)
    ratios = q.nodes[1:] / q.nodes[:-1]
    assert np.allclose(ratios, ratios[0])
    assert q.t_min < q.nodes[0] and q.nodes[-1] < q.t_max


def test_refine_halves_step():
    q = make_scale_quadrature(0.5, 8.0, 16)
    r = q.refine()
    assert r.size == 2 * q.size
    assert r.log_step == pytest.approx(q.log_step / 2)
    assert r.weights.sum() == pytest.approx(q.weights.sum(), rel=1e-14)


def test_scaled_rule():
    q = make_scale_quadrature(0.5, 8.0, 16)
    s = q.scaled(3.0)
    assert np.allclose(s.nodes, 3.0 * q.nodes)
    assert np.allclose(s.weights, q.weights)


def test_graded_rule_resolves_a_jump():
    # int_{1e-2}^{1e2} [t < 1] dt/t = log(100)
    q = graded_scale_quadrature(1e-2, 1e2, [1.0])
    assert q.integrate(q.nodes < 1.0) == pytest.approx(math.log(100), abs=1e-12)
    assert q.integrate(np.log(q.nodes) ** 2) == pytest.approx(2 * math.log(100) ** 3 / 3, rel=1e-12)


def test_edges_must_increase():
    with pytest.raises(ValueError):
        ScaleQuadrature(np.array([0.0, 0.0, 1.0]), 1)


@settings(max_examples=50, deadline=None)
@given(lo=st.floats(-8, 3), width=st.floats(0.1, 10), K=st.integers(8, 300))
def test_weight_sum_property(lo, width, K):
    q = make_scale_quadrature(math.exp(lo), math.exp(lo + width), K)
    assert q.weights.sum() == pytest.approx(width, rel=1e-12)
    assert np.all(np.diff(q.nodes) > 0) and np.all(q.weights > 0)
