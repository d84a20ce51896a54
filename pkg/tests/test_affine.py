import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from affineflow.affine import (
    affine_curvature,
    affine_perimeter,
    affine_state,
    affine_support,
    arclength_element,
    frame_identity_residuals,
    isoperimetric_bound,
    isoperimetric_ratio,
    perimeter_exponent,
    sigma_affine_derivative,
    sigma_extremes,
)
from affineflow.geometry import SupportProfile, apply_linear_map, area

from strategies import gl2_maps, sl2_maps, symmetric_profiles

P_VALUES = (1.5, 2.0, 3.0)


def quad_omega(s_fn, d2s_fn, p):
    """mpmath oracle for int sigma^{1-3p/(p+2)} r^{2/3} d theta."""
    e = 1 - mp.mpf(3) * p / (p + 2)

    def integrand(th):
        s = s_fn(th)
        r = d2s_fn(th) + s
        return (s * mp.cbrt(r)) ** e * mp.cbrt(r) ** 2

    return mp.quad(integrand, mp.linspace(0, 2 * mp.pi, 9))


def perturbed(eps=0.05, k=4):
    return (lambda th: 1 + eps * mp.cos(k * th)), (lambda th: -k * k * eps * mp.cos(k * th))


class TestSigma:
    def test_circle(self):
        np.testing.assert_allclose(affine_support(SupportProfile.disk(1.0)), 1.0)

    def test_ellipse(self):
        np.testing.assert_allclose(affine_support(SupportProfile.ellipse(2.0, 0.5)), 1.0, atol=1e-8)
        np.testing.assert_allclose(affine_support(SupportProfile.ellipse(3.0, 1.2, 0.3)), 3.6 ** (2 / 3), atol=1e-8)

    def test_disk_radius_two(self):
        np.testing.assert_allclose(affine_support(SupportProfile.disk(2.0)), 2.5198421, atol=1e-7)

    # a stretch by 2 compresses features in theta up to fourfold, so the
    # mapped body is resolved on the finer grid
    @given(symmetric_profiles(n=512), sl2_maps())
    def test_extremes_sl2_invariant(self, s, T):
        lo, hi = sigma_extremes(s)
        lo_t, hi_t = sigma_extremes(apply_linear_map(s, T))
        assert hi_t == pytest.approx(hi, rel=1e-6)
        assert lo_t == pytest.approx(lo, rel=1e-6)

    def test_extremes_refine_grid_values(self):
        s = SupportProfile.trig(1.0, [(4, 0.05)])
        lo, hi = sigma_extremes(s)
        sigma = affine_support(s)
        assert lo <= sigma.min() and hi >= sigma.max()
        assert hi - sigma.max() < 1e-3

    @given(symmetric_profiles())
    def test_positive(self, s):
        st_ = affine_state(s)
        assert np.all(st_.sigma > 0) and np.all(st_.g > 0)


class TestPerimeter:
    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 7.0])
    def test_circle(self, p):
        assert affine_perimeter(SupportProfile.disk(1.0), p) == pytest.approx(2 * math.pi, rel=1e-14)

    def test_ellipse_p1_p2(self):
        s = SupportProfile.ellipse(2.0, 0.5)
        assert affine_perimeter(s, 1) == pytest.approx(2 * math.pi, abs=1e-8)
        assert affine_perimeter(s, 2) == pytest.approx(2 * math.pi, abs=1e-8)

    @pytest.mark.parametrize("p", P_VALUES)
    def test_general_ellipse_against_quadrature(self, p):
        a, b = 3.0, 1.2
        s = SupportProfile.ellipse(a, b)
        s_fn = lambda th: mp.sqrt((a * mp.cos(th)) ** 2 + (b * mp.sin(th)) ** 2)
        # r = a^2 b^2 / s^3 on an ellipse
        d2s_fn = lambda th: a * a * b * b / s_fn(th) ** 3 - s_fn(th)
        oracle = float(quad_omega(s_fn, d2s_fn, p))
        assert affine_perimeter(s, p) == pytest.approx(oracle, rel=1e-9)
        assert oracle == pytest.approx(2 * math.pi * (a * b) ** ((2 - p) / (p + 2)), rel=1e-12)

    def test_perturbed_against_quadrature(self):
        s = SupportProfile.trig(1.0, [(4, 0.05)])
        oracle = float(quad_omega(*perturbed(), 2.0))
        assert affine_perimeter(s, 2) == pytest.approx(oracle, rel=1e-12)

    def test_rejects_nonpositive_p(self):
        with pytest.raises(ValueError):
            affine_perimeter(SupportProfile.disk(1.0), 0.0)

    @given(symmetric_profiles())
    def test_element_sums_to_omega1(self, s):
        g = arclength_element(s)
        assert g.sum() * 2 * math.pi / s.n == pytest.approx(affine_perimeter(s, 1), rel=1e-13)

    def test_exponent(self):
        assert perimeter_exponent(1) == pytest.approx(0.0)
        assert perimeter_exponent(2) == pytest.approx(-0.5)


class TestIsoperimetric:
    def test_bound_values(self):
        assert isoperimetric_bound(2) == pytest.approx(16 * math.pi ** 4)
        assert isoperimetric_bound(1) == pytest.approx(8 * math.pi ** 2)

    @pytest.mark.parametrize("a,b,phi", [(2.0, 0.5, 0.0), (3.0, 1.0, 0.4), (1.0, 1.0, 0.0)])
    def test_ellipse_equality(self, a, b, phi):
        s = SupportProfile.ellipse(a, b, phi)
        for p in (1.0,) + P_VALUES:
            assert isoperimetric_ratio(s, p) == pytest.approx(isoperimetric_bound(p), rel=1e-7)

    def test_disk_p1(self):
        assert isoperimetric_ratio(SupportProfile.disk(1.0), 1) == pytest.approx(8 * math.pi ** 2)

    def test_perturbed_strictly_below(self):
        s = SupportProfile.trig(1.0, [(4, 0.05)])
        a_exact = math.pi * (1 - 7.5 * 0.05 ** 2)
        oracle = float(quad_omega(*perturbed(), 2.0)) ** 4
        value = isoperimetric_ratio(s, 2)
        assert value == pytest.approx(oracle, rel=1e-11)
        assert area(s) == pytest.approx(a_exact, rel=1e-14)
        assert value < 16 * math.pi ** 4 * (1 - 0.1)

    @given(symmetric_profiles(), st.sampled_from(P_VALUES))
    def test_inequality(self, s, p):
        assert isoperimetric_ratio(s, p) <= isoperimetric_bound(p) * (1 + 1e-6)

    @given(symmetric_profiles(), gl2_maps(), st.sampled_from(P_VALUES))
    def test_gl2_invariance(self, s, T, p):
        assert isoperimetric_ratio(apply_linear_map(s, T), p) == pytest.approx(isoperimetric_ratio(s, p), rel=1e-6)

    @given(symmetric_profiles())
    def test_holder_chain(self, s):
        # Omega_1 = int sigma^{-1/3} sigma^{1/3} <= Omega_2^{2/3} (int sigma)^{1/3}, int sigma d s_aff = 2A
        om1, om2 = affine_perimeter(s, 1), affine_perimeter(s, 2)
        assert om2 >= math.sqrt(om1 ** 3 / (2 * area(s))) * (1 - 1e-8)

    def test_holder_chain_equality_on_ellipse(self):
        s = SupportProfile.ellipse(2.5, 0.7, 1.0)
        om1, om2 = affine_perimeter(s, 1), affine_perimeter(s, 2)
        assert om2 == pytest.approx(math.sqrt(om1 ** 3 / (2 * area(s))), rel=1e-9)


class TestCurvature:
    def test_circle(self):
        np.testing.assert_allclose(affine_curvature(SupportProfile.disk(1.0)), 1.0, atol=1e-12)

    def test_ellipse(self):
        np.testing.assert_allclose(affine_curvature(SupportProfile.ellipse(2.0, 0.5)), 1.0, atol=1e-6)

    def test_round_ellipse(self):
        np.testing.assert_allclose(affine_curvature(SupportProfile.ellipse(3.0, 3.0)), 9 ** (-2 / 3), atol=1e-10)

    def test_structure_equation(self):
        # sigma_ss + sigma mu = 1 with sigma_ss from an independent finite-difference-free route
        s = SupportProfile.trig(1.0, [(2, 0.05), (4, 0.01)])
        st_ = affine_state(s)
        sigma_ss = 1 - st_.sigma * st_.mu
        ds = np.fft.irfft(np.fft.rfft(st_.sigma_s) * 1j * np.arange(s.n // 2 + 1), n=s.n) / st_.g
        np.testing.assert_allclose(sigma_ss, ds, atol=1e-8)


class TestSigmaDerivative:
    def test_ellipse(self):
        np.testing.assert_allclose(sigma_affine_derivative(SupportProfile.ellipse(2.0, 0.5, 0.2)), 0.0, atol=1e-8)

    def test_circle(self):
        np.testing.assert_allclose(sigma_affine_derivative(SupportProfile.disk(1.0)), 0.0, atol=1e-14)

    def test_matches_finite_differences(self):
        errs = []
        for n in (128, 256):
            s = SupportProfile.trig(1.0, [(4, 0.05)], n)
            sigma = affine_support(s)
            g = arclength_element(s)
            # cumulative affine arclength by the trapezoidal rule
            arc = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * s.grid.spacing)])
            fd = (sigma[2:] - sigma[:-2]) / (arc[2:] - arc[:-2])
            errs.append(np.max(np.abs(fd - sigma_affine_derivative(s)[1:-1])))
        scale = np.max(np.abs(sigma_affine_derivative(s)))
        assert errs[1] < 0.02 * scale
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


class TestFrameIdentities:
    def test_circle(self):
        assert frame_identity_residuals(SupportProfile.disk(1.0)).worst < 1e-6

    def test_ellipse(self):
        res = frame_identity_residuals(SupportProfile.ellipse(2.0, 0.5))
        assert res.unimodular < 1e-6 and res.support < 1e-6

    def test_perturbed(self):
        # min r = 0.25 here, so the resampled curve needs a finer grid
        assert frame_identity_residuals(SupportProfile.trig(1.0, [(4, 0.05)], 512)).worst < 1e-6
