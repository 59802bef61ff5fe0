import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import band_field, unit_grid
from multiscale_sobolev.constants import constant_I, constant_S0, multiplier_deficit
from multiscale_sobolev.corpus import polynomial_window, single_mode
from multiscale_sobolev.fields import ScalarField, forward_spectrum, lp_norm, make_grid, sample
from multiscale_sobolev.multiscale import (
    AUTO,
    SmoothnessOrder,
    auto_corrections,
    ball_mean,
    default_scale_quadrature,
    equivalence_report,
    frac_laplacian,
    laplacian_power,
    recover_g,
    remainder_mean,
    s0_ratio,
    s0_square_function,
    spectral_support,
    square_function,
)
from multiscale_sobolev.radial import ball_profile
from multiscale_sobolev.scales import make_scale_quadrature


def rel_l2(a, b):
    return lp_norm(a - b, 2) / lp_norm(b, 2)


class TestSmoothnessOrder:
    @pytest.mark.parametrize("alpha, N", [(0.5, 0), (2.0, 1), (3.9, 1), (4.5, 2)])
    def test_split(self, alpha, N):
        assert SmoothnessOrder(alpha).N == N

    @pytest.mark.parametrize("p", [1.0, 0.5, math.inf])
    def test_rejects_p(self, p):
        with pytest.raises(ValueError):
            SmoothnessOrder(1.0, p)

    def test_rejects_alpha(self):
        with pytest.raises(ValueError):
            SmoothnessOrder(0.0)


class TestBallMean:
    @pytest.mark.parametrize("mode", ["spectral", "direct"])
    def test_constant(self, mode):
        g = unit_grid(2, 32)
        f = ScalarField(g, np.full(g.shape, -1.75))
        assert np.allclose(ball_mean(f, 0.2, mode).values, -1.75, atol=1e-14)

    def test_single_mode_eigenfunction(self):
        g = make_grid(2, [32, 64], [1.0, 2.0])
        f = single_mode(g, [2, 3])
        xi = 2 * np.pi * math.hypot(2 / 1.0, 3 / 2.0)
        t = 0.13
        assert np.allclose(ball_mean(f, t).values, ball_profile(2, t * xi) * f.values, atol=1e-13)

    @pytest.mark.parametrize("dim, size", [(1, 256), (2, 128)])
    def test_spectral_matches_direct(self, dim, size):
        f = band_field(dim, size, seed=3)
        err = rel_l2(ball_mean(f, 0.1, "direct"), ball_mean(f, 0.1, "spectral"))
        assert err <= 0.02

    def test_direct_matches_brute_force(self, rng):
        g = unit_grid(2, 16)
        f = ScalarField(g, rng.standard_normal(g.shape))
        t = 0.2
        X, Y = g.coordinates()
        i, j = 5, 11
        dx = (X - X[i, j] + 0.5) % 1 - 0.5
        dy = (Y - Y[i, j] + 0.5) % 1 - 0.5
        inside = dx * dx + dy * dy < t * t
        assert ball_mean(f, t, "direct").values[i, j] == pytest.approx(f.values[inside].mean(), abs=1e-13)

    @pytest.mark.parametrize("t", [0.5, 0.7, -0.1, 0.0])
    def test_rejects_bad_radius(self, t):
        with pytest.raises(ValueError):
            ball_mean(band_field(1, 32), t)

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            ball_mean(band_field(1, 32), 0.1, "fast")


class TestFracLaplacian:
    def test_mode_eigenfunction(self):
        g = make_grid(1, [64], [2.0])
        f = single_mode(g, 3)
        xi = 2 * np.pi * 3 / 2.0
        for alpha in (0.5, 1.0, 2.7):
            assert np.allclose(frac_laplacian(f, alpha).values, xi**alpha * f.values, atol=1e-9 * xi**alpha)

    def test_second_order_matches_finite_difference(self):
        f = band_field(2, 256, seed=1, kmax=5)
        h = f.grid.spacing[0]
        v = f.values
        fd = -sum(np.roll(v, 1, a) - 2 * v + np.roll(v, -1, a) for a in range(2)) / h**2
        assert rel_l2(ScalarField(f.grid, fd), frac_laplacian(f, 2.0)) <= 0.01

    def test_constant_goes_to_zero(self):
        g = unit_grid(3, 8)
        assert np.allclose(frac_laplacian(ScalarField(g, np.full(g.shape, 4.0)), 1.3).values, 0, atol=1e-14)

    def test_rejects_non_positive(self):
        with pytest.raises(ValueError):
            frac_laplacian(band_field(1, 32), 0.0)

    def test_laplacian_power_consistent(self):
        f = band_field(2, 32, seed=2)
        assert np.allclose(laplacian_power(f, 2).values, frac_laplacian(f, 4.0).values, atol=1e-8)


class TestSquareFunction:
    @pytest.mark.parametrize("alpha", [0.7, 2.0, 3.5, 4.5])
    def test_constant_is_annihilated(self, alpha):
        g = unit_grid(2, 16)
        f = ScalarField(g, np.full(g.shape, 2.0))
        q = make_scale_quadrature(1e-3, 0.4, 32)
        for mode in ("spectral", "direct"):
            assert np.max(square_function(f, AUTO, alpha, q, mode).values) == 0.0

    def test_wrong_correction_count(self):
        f = band_field(1, 32)
        with pytest.raises(ValueError):
            square_function(f, [], 2.5)
        with pytest.raises(ValueError):
            square_function(f, "manual", 2.5)

    def test_range_flag(self):
        f = band_field(1, 64)
        assert square_function(f, AUTO, 1.0).meta["range_ok"]
        narrow = make_scale_quadrature(0.01, 0.1, 16)
        assert not square_function(f, AUTO, 1.0, narrow).meta["range_ok"]

    def test_direct_mode_needs_embedded_balls(self):
        f = band_field(1, 64)
        with pytest.raises(ValueError):
            square_function(f, AUTO, 1.0, make_scale_quadrature(1e-3, 0.6, 16), "direct")

    @pytest.mark.parametrize("alpha", [1.1, 1.5, 1.9])
    def test_linear_polynomial_is_annihilated(self, dim, alpha):
        size = {1: 64, 2: 32, 3: 16}[dim]
        g = unit_grid(dim, size)
        coords = g.coordinates()
        f = ScalarField(g, 0.3 + sum((a + 1.5) * x for a, x in enumerate(coords)))
        tmax = 0.2
        q = make_scale_quadrature(1e-3, tmax, 16)
        S = square_function(f, AUTO, alpha, q, "direct").values
        interior = np.all([(x > tmax) & (x < 1 - tmax) for x in coords], axis=0)
        assert np.max(np.abs(S[interior])) <= 1e-10

    def test_quadratic_is_annihilated_at_second_order(self, dim, rng):
        size = {1: 64, 2: 32, 3: 16}[dim]
        g = unit_grid(dim, size)
        coords = g.coordinates()
        A = rng.standard_normal((dim, dim))
        A = A + A.T
        b = rng.standard_normal(dim)
        vals = sum(A[i, j] * coords[i] * coords[j] for i in range(dim) for j in range(dim))
        vals = vals + sum(b[i] * coords[i] for i in range(dim))
        f = ScalarField(g, vals)
        lap = 2 * np.trace(A)
        gfield = ScalarField(g, np.full(g.shape, lap / (2 * dim)))
        tmax = 0.2
        q = make_scale_quadrature(1e-3, tmax, 16)
        S = square_function(f, [gfield], 2.0, q, "direct").values
        interior = np.all([(x > tmax) & (x < 1 - tmax) for x in coords], axis=0)
        assert np.max(np.abs(S[interior])) <= 1e-10

    @pytest.mark.parametrize("alpha", [0.5, 1.5, 2.0, 3.0, 4.5])
    def test_odd_remainder_vanishes_at_centre(self, dim, alpha):
        size = {1: 128, 2: 64, 3: 32}[dim]
        g = unit_grid(dim, size)
        N = SmoothnessOrder(alpha).N
        coeffs = np.zeros(2 * N + 2)
        coeffs[2 * N + 1] = 1.0
        f = polynomial_window(g, coeffs, radius=0.4)
        centre = tuple(s // 2 for s in g.sizes)
        f = ScalarField(g, f.values - f.values[centre])
        for t in (0.05, 0.15, 0.3):
            a = remainder_mean(f, AUTO, SmoothnessOrder(alpha), t, "direct").values[centre]
            assert abs(a) <= 1e-10

    @pytest.mark.parametrize("dim, size, alpha", [(1, 64, 1.0), (1, 64, 3.0), (2, 16, 2.0), (2, 16, 4.5), (3, 8, 2.5)])
    def test_discrete_plancherel(self, dim, size, alpha):
        f = band_field(dim, size, seed=4, kmax=3)
        q = make_scale_quadrature(1e-3, 10.0, 96)
        S = square_function(f, AUTO, alpha, q)
        c = forward_spectrum(f).coeffs.ravel()
        mag = f.grid.freq_mag.ravel()
        Q = np.array([np.sum(q.weights * q.nodes ** (-2 * alpha) * multiplier_deficit(dim, alpha, q.nodes * m) ** 2) for m in mag])
        rhs = f.grid.volume * np.sum(np.abs(c) ** 2 * Q)
        assert lp_norm(S, 2) ** 2 == pytest.approx(rhs, rel=1e-8)

    def test_auto_equals_explicit_corrections(self):
        f = band_field(2, 32, seed=5)
        q = make_scale_quadrature(1e-3, 2.0, 48)
        for alpha in (2.5, 4.5):
            gs = auto_corrections(f, SmoothnessOrder(alpha).N)
            a = square_function(f, AUTO, alpha, q).values
            b = square_function(f, gs, alpha, q).values
            assert np.allclose(a, b, rtol=1e-9, atol=1e-12 * a.max())

    @pytest.mark.parametrize("dim, size, alpha", [(1, 256, 1.0), (1, 256, 2.0), (2, 128, 1.5)])
    def test_spectral_and_direct_agree(self, dim, size, alpha):
        f = band_field(dim, size, seed=6, kmax=4)
        q = make_scale_quadrature(1e-3, 0.45, 64)
        err = rel_l2(square_function(f, AUTO, alpha, q, "direct"), square_function(f, AUTO, alpha, q, "spectral"))
        assert err <= 0.05


class TestSZero:
    def test_constant(self):
        g = unit_grid(1, 32)
        S = s0_square_function(ScalarField(g, np.ones(32)), make_scale_quadrature(1e-3, 0.2, 16))
        assert np.max(S.values) < 1e-14

    def test_single_mode_envelope(self):
        g = unit_grid(2, 32)
        f = single_mode(g, [1, 2], phase=0.3)
        xi = 2 * np.pi * math.hypot(1, 2)
        q = make_scale_quadrature(1e-3, 0.2, 48)
        S = s0_square_function(f, q).values
        C = math.sqrt(np.sum(q.weights * (ball_profile(2, q.nodes * xi) - ball_profile(2, 2 * q.nodes * xi)) ** 2))
        assert np.allclose(S, C * np.abs(f.values), atol=1e-12)
        # the direct mode sees the same envelope up to lattice effects
        D = s0_square_function(f, q, "direct").values
        assert rel_l2(ScalarField(g, D), ScalarField(g, S)) < 0.1

    def test_norm_ratio(self):
        f = band_field(1, 256, seed=7)
        ratio, predicted = s0_ratio(f)
        assert predicted == pytest.approx(math.sqrt(constant_S0(1)))
        assert ratio == pytest.approx(predicted, rel=0.02)

    def test_direct_needs_double_radius(self):
        with pytest.raises(ValueError):
            s0_square_function(band_field(1, 64), make_scale_quadrature(1e-3, 0.3, 16), "direct")


class TestRecoverG:
    def test_single_mode_second_order(self, dim):
        size = {1: 64, 2: 32, 3: 16}[dim]
        f = single_mode(unit_grid(dim, size), [2] * dim, phase=0.4)
        (g,) = recover_g(f, 2.0)
        ref = laplacian_power(f, 1) * (1 / (2 * dim))
        assert rel_l2(g, ref) <= 0.01

    @pytest.mark.parametrize("alpha", [2.0, 3.0, 4.5])
    def test_fixed_point_of_auto(self, alpha):
        f = band_field(2, 32, seed=8, kmax=4)
        got = recover_g(f, alpha)
        ref = auto_corrections(f, SmoothnessOrder(alpha).N)
        assert len(got) == len(ref)
        for a, b in zip(got, ref):
            assert rel_l2(a, b) <= 1e-6

    def test_constant_field(self):
        g = unit_grid(1, 32)
        (out,) = recover_g(ScalarField(g, np.full(32, 3.0)), 2.0)
        assert np.all(out.values == 0)

    def test_no_corrections_below_two(self):
        assert recover_g(band_field(1, 32), 1.5) == []

    def test_too_few_scales(self):
        f = band_field(1, 64)
        lo, hi = spectral_support(f)
        with pytest.raises(ValueError, match="fitting window"):
            recover_g(f, 2.0, make_scale_quadrature(0.3 / hi, 30 / hi, 8))

    def test_ill_conditioning_is_flagged(self):
        f = band_field(1, 64)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            recover_g(f, 2.0, extra_terms=8, cond_limit=1.0)
        assert any("ill-conditioned" in str(w.message) for w in caught)


class TestEquivalence:
    @pytest.mark.parametrize("dim, size, alpha", [(1, 256, 1.0), (2, 64, 2.0)])
    def test_ratio_matches_constant(self, dim, size, alpha):
        rep = equivalence_report(band_field(dim, size, seed=9), SmoothnessOrder(alpha))
        assert rep.predicted == pytest.approx(math.sqrt(constant_I(dim, alpha)))
        assert abs(rep.deviation) <= 0.02
        assert rep.quadrature["range_ok"]

    def test_three_dimensional_second_order(self):
        rep = equivalence_report(band_field(3, 16, seed=10, kmax=4), 2.0)
        assert rep.ratio**2 == pytest.approx(constant_I(3, 2.0), rel=0.02)

    def test_amplitude_independent(self):
        g = unit_grid(2, 32)
        q = make_scale_quadrature(1e-4, 10.0, 128)
        ratios = [equivalence_report(single_mode(g, [1, 3], amplitude=a), 1.5, q).ratio for a in (1e-3, 1.0, 250.0)]
        assert np.allclose(ratios, ratios[0], rtol=1e-10)

    def test_general_p(self):
        rep = equivalence_report(band_field(1, 128, seed=11), SmoothnessOrder(1.0, 3.0))
        assert rep.predicted is None and rep.deviation is None
        assert rep.ratio > 0 and math.isfinite(rep.ratio)
        assert set(rep.as_dict()) >= {"norm_S", "norm_frac", "ratio", "quadrature"}

    def test_rejects_constant(self):
        g = unit_grid(1, 16)
        with pytest.raises(ValueError):
            equivalence_report(ScalarField(g, np.ones(16)), 1.0)

    def test_default_quadrature_spans_support(self):
        f = band_field(1, 128, seed=12)
        lo, hi = spectral_support(f)
        q = default_scale_quadrature(f)
        assert q.t_min * hi == pytest.approx(1e-3) and q.t_max * lo == pytest.approx(1e3)
        assert q.size == 512


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), alpha=st.sampled_from([0.5, 1.0, 2.0, 3.0]))
def test_square_function_nonnegative_and_translation_covariant(seed, alpha):
    f = band_field(1, 64, seed=seed, kmax=5)
    q = make_scale_quadrature(1e-3, 5.0, 32)
    S = square_function(f, AUTO, alpha, q).values
    shifted = ScalarField(f.grid, np.roll(f.values, 7))
    S2 = square_function(shifted, AUTO, alpha, q).values
    assert np.all(S >= 0)
    assert np.allclose(np.roll(S, 7), S2, atol=1e-10 * S.max())
