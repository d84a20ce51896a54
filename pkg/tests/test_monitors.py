import dataclasses
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings

from affineflow.flow import FlowParams, simulate, speed, stable_dt, step
from affineflow.geometry import SupportProfile, area, polar_area
from affineflow.monitors import (
    CheckReport,
    check_ancient_inequalities,
    check_area_law,
    check_harnack,
    check_monotone,
    check_omega_l_evolution,
    compute_record,
    ellipse_family,
    ellipse_residual,
    harnack_monotone_quantity,
    harnack_quantities,
    omega2_rate_bound,
    omega_l,
    omega_l_rate,
    sigma_ratio_diagnostic,
)

from runs import circle_run, ellipse_run, mixed_run, perturbed_run
from strategies import symmetric_profiles

P2 = FlowParams(2.0)


class TestRecord:
    def test_disk(self):
        rec = compute_record(SupportProfile.disk(1.0), P2, 0.0)
        assert rec.A == pytest.approx(math.pi)
        assert rec.AAstar == pytest.approx(math.pi ** 2)
        assert rec.Omega_1 == pytest.approx(2 * math.pi)
        assert rec.ratio_p == pytest.approx(16 * math.pi ** 4)
        assert rec.monotone_flags == {}

    def test_matches_geometry(self):
        s = SupportProfile.trig(1.0, [(2, 0.1, 0.2), (4, 0.02)])
        rec = compute_record(s, FlowParams(3.0), 0.1)
        assert rec.A == pytest.approx(area(s), rel=1e-14)
        assert rec.A_star == pytest.approx(polar_area(s), rel=1e-14)
        assert rec.Omega_p == pytest.approx(omega_l(s, 3.0), rel=1e-14)
        assert rec.ratio_p == pytest.approx(rec.Omega_p ** 5 * rec.A, rel=1e-14)

    def test_flags(self):
        s = SupportProfile.disk(1.0)
        rec = compute_record(s, P2, 0.1, compute_record(s.scaled(1.1), P2, 0.0))
        # all three are scale invariant
        assert rec.monotone_flags == {"AAstar": True, "ratio_p": True, "Omega_2": True}
        # ellipses maximize both A A* and the ratio
        prev = compute_record(SupportProfile.ellipse(2.0, 0.5), P2, 0.0)
        rec = compute_record(SupportProfile.trig(1.0, [(4, 0.05)]), P2, 0.1, prev)
        assert not rec.monotone_flags["AAstar"] and not rec.monotone_flags["ratio_p"]

    def test_serializable(self):
        rec = compute_record(SupportProfile.disk(1.0), P2, 0.0)
        json.dumps(rec.to_dict())


class TestHarnack:
    def test_circle_values(self):
        # c = sqrt(1 - 2t), F = 1/c, P = -1/c^3
        c = math.sqrt(0.5)
        h = harnack_quantities(SupportProfile.disk(c), P2, 0.25)
        np.testing.assert_allclose(h.P, -2.8284271247, rtol=1e-9)
        np.testing.assert_allclose(h.R, -1.1785113019, rtol=1e-9)
        np.testing.assert_allclose(h.Q, 1 / c, rtol=1e-12)

    def test_circle_monotone_quantity(self):
        traj = circle_run()
        for pt in traj.points[:: max(1, len(traj) // 30)]:
            c = math.sqrt(1 - 2 * pt.t)
            q = harnack_monotone_quantity(pt.state, P2, pt.t)
            np.testing.assert_allclose(q, pt.t ** (1 / 3) / c, rtol=1e-8)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            harnack_quantities(SupportProfile.disk(1.0), P2, -1.0)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_p_is_minus_time_derivative_of_speed(self, p):
        s = SupportProfile.trig(1.0, [(2, 0.1), (4, 0.02)], 64)
        prm = FlowParams(p)
        h = 0.01 * stable_dt(s, prm)
        s1 = step(s, prm, h)
        s2 = step(s1, prm, h)
        fd = (-3 * speed(s, prm) + 4 * speed(s1, prm) - speed(s2, prm)) / (2 * h)
        pv = harnack_quantities(s, prm, 0.0).P
        assert np.max(np.abs(-fd - pv)) < 1e-4 * np.max(np.abs(pv))

    @pytest.mark.parametrize("run", [circle_run, ellipse_run, perturbed_run])
    def test_runs_pass(self, run):
        traj = run()
        rep = check_harnack(traj, traj.params)
        assert rep.passed, rep.details
        assert rep.details["max_R"] <= 0


class TestMonotone:
    def test_ellipse_constant(self):
        traj = ellipse_run()
        rep = check_monotone(traj, traj.params)
        assert rep.passed
        for name in ("AAstar", "ratio_p", "Omega_2"):
            assert rep.details[name]["relative_spread"] < 1e-6

    def test_perturbed_strict_growth(self):
        traj = perturbed_run()
        rep = check_monotone(traj, traj.params)
        assert rep.passed, rep.details
        assert rep.details["Omega_2"]["net_change"] > 0
        assert rep.details["ratio_p"]["net_change"] > 0

    def test_mixed_p3(self):
        traj = mixed_run()
        assert check_monotone(traj, traj.params).passed

    def test_detects_decrease(self):
        # splice a non-ellipse record into a disk run: A A* drops below pi^2
        fake = simulate(SupportProfile.disk(1.0, 64), FlowParams(2.0, t_end=0.01), 1)
        pt = fake.points[2]
        bad = compute_record(SupportProfile.trig(1.0, [(4, 0.05)], 64), P2, pt.t)
        fake.points[2] = dataclasses.replace(pt, record=bad)
        rep = check_monotone(fake, fake.params)
        assert not rep.passed
        assert not rep.per_record[2]
        assert rep.details["AAstar"]["worst_margin"] < 0

    def test_rate_bound_zero_on_ellipse(self):
        assert abs(omega2_rate_bound(SupportProfile.ellipse(2.0, 0.5), P2)) < 1e-10

    def test_rate_bound_is_omega_l_rate_at_two(self):
        s = SupportProfile.trig(1.0, [(2, 0.1), (4, 0.02)])
        for p in (1.0, 2.0, 3.0):
            prm = FlowParams(p)
            assert omega2_rate_bound(s, prm) == pytest.approx(omega_l_rate(s, prm, 2.0), rel=1e-12)


class TestAreaLaw:
    @pytest.mark.parametrize("run", [circle_run, ellipse_run, perturbed_run, mixed_run])
    def test_runs(self, run):
        traj = run()
        assert check_area_law(traj, traj.params).passed

    def test_dense_records_tighter(self):
        traj = perturbed_run()
        assert check_area_law(traj, traj.params, rel_tol=1e-4).passed

    def test_too_short(self):
        traj = simulate(SupportProfile.disk(1.0, 64), FlowParams(2.0, t_end=1e-3), 10 ** 6)
        with pytest.raises(ValueError):
            check_area_law(traj, traj.params)


class TestOmegaL:
    @pytest.mark.parametrize("l", [2.0, 3.0, 4.0])
    def test_circle_closed_form(self, l):
        # on a circle of radius c: Omega_l = 2 pi c^{2(2-l)/(l+2)}, A = pi c^2
        s = SupportProfile.disk(0.8)
        c = 0.8
        assert omega_l(s, l) == pytest.approx(2 * math.pi * c ** (2 * (2 - l) / (l + 2)))
        # dc/dt = -1/c for p = 2
        expected = 2 * math.pi * 2 * (2 - l) / (l + 2) * c ** (2 * (2 - l) / (l + 2) - 1) * (-1 / c)
        assert omega_l_rate(s, P2, l) == pytest.approx(expected, rel=1e-12, abs=1e-14)

    @pytest.mark.parametrize("l", [2.0, 3.0, 4.0])
    def test_perturbed_run(self, l):
        traj = perturbed_run()
        assert check_omega_l_evolution(traj, traj.params, l).passed

    def test_refinement_shrinks_residual(self):
        coarse = perturbed_run(monitor_every=20)
        fine = perturbed_run()
        r_c = check_omega_l_evolution(coarse, coarse.params, 3.0).details["max_rel_residual"]
        r_f = check_omega_l_evolution(fine, fine.params, 3.0).details["max_rel_residual"]
        assert r_f < r_c / 10

    def test_needs_l_at_least_two(self):
        with pytest.raises(ValueError):
            check_omega_l_evolution(circle_run(), P2, 1.0)


class TestAncient:
    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_family(self, p):
        fam = ellipse_family(2.0, 0.5, p, np.linspace(-3.0, 0.2, 17))
        rep = check_ancient_inequalities(fam, FlowParams(p))
        assert rep.passed
        assert rep.details["max_rhs_abs"] < 1e-6

    def test_family_is_the_closed_form(self):
        fam = ellipse_family(2.0, 0.5, 2.0, [0.25])
        np.testing.assert_allclose(fam.profiles[0].values, SupportProfile.ellipse(math.sqrt(2), math.sqrt(2) / 4).values, atol=1e-12)


class TestDiagnostics:
    def test_ellipse_residual_ellipse(self):
        assert ellipse_residual(SupportProfile.ellipse(3.0, 1.0, 0.7)) < 1e-9

    def test_ellipse_residual_perturbed(self):
        # high-precision quadrature-free oracle: s^3 r at theta = 0 and pi/4 with mean from mpmath
        import mpmath as mp

        e = mp.mpf("0.05")
        f = lambda th: (1 + e * mp.cos(4 * th)) ** 3 * (1 - 15 * e * mp.cos(4 * th))
        mean = mp.quad(f, [0, mp.pi / 2]) / (mp.pi / 2)
        oracle = max(abs(f(0) - mean), abs(f(mp.pi / 4) - mean)) / mean
        assert ellipse_residual(SupportProfile.trig(1.0, [(4, 0.05)])) == pytest.approx(float(oracle), rel=1e-12)
        assert float(oracle) == pytest.approx(0.69454671388697634, rel=1e-14)

    def test_sigma_ratio_ellipse(self):
        series = sigma_ratio_diagnostic(ellipse_run())
        np.testing.assert_allclose(series.ratio, 1.0, atol=1e-9)
        assert not series.growing

    def test_sigma_ratio_perturbed_falls(self):
        assert sigma_ratio_diagnostic(perturbed_run()).decreased

    @settings(max_examples=10)
    @given(symmetric_profiles())
    def test_sigma_ratio_invariant_under_scaling(self, s):
        a = compute_record(s, P2, 0.0)
        b = compute_record(s.scaled(1.7), P2, 0.0)
        assert a.sigma_max / a.sigma_min == pytest.approx(b.sigma_max / b.sigma_min, rel=1e-10)


def test_report_to_dict():
    rep = CheckReport("x", True, 0.5, [True, False], {"a": np.float64(1.0), "b": np.arange(2)})
    d = rep.to_dict()
    assert d["failures"] == 1 and d["checked"] == 2
    json.dumps(d)
