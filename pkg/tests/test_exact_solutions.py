import math

import numpy as np
import pytest

from curvlab import exact_solutions as es
from curvlab import expr as ex
from curvlab import jets
from curvlab.exact_solutions import KasnerSpec, ParameterError, build_named_metric, kasner_exponents
from curvlab.functionals import PotentialSpec, residual
from curvlab.tensor_geometry import curvature, frame_components

import fixtures
from oracles import richardson_d1


def tau_poly(alpha, m, r):
    w = 1 - 2 * m / r
    return alpha / (32 * m * m) * (-2 - 6 * w + 2 * w * w - 0.4 * w ** 3)


class TestKasner:
    @pytest.mark.parametrize("a,want", [
        (1.0, (0, 0, 1)), (0.0, (0, 1, 0)), (-1.0, (2 / 3, 2 / 3, -1 / 3)), (0.5, (-1 / 3, 2 / 3, 2 / 3)),
    ])
    def test_examples(self, a, want):
        assert kasner_exponents(a) == pytest.approx(want, abs=1e-15)

    def test_identities(self):
        for a in np.round(np.arange(-1.0, 1.0001, 0.1), 10):
            al, be, ga = kasner_exponents(a)
            assert abs(al + be + ga - 1) <= 1e-12
            assert abs(al ** 2 + be ** 2 + ga ** 2 - 1) <= 1e-12

    @pytest.mark.parametrize("a", [-1.5, 1.01])
    def test_out_of_range(self, a):
        with pytest.raises(ParameterError):
            kasner_exponents(a)

    @pytest.mark.parametrize("a", [0.0, 1.0])
    def test_flat_members(self, a):
        chart = KasnerSpec(a).chart()
        rng = np.random.default_rng(5)
        for x in rng.uniform([0.3, -2, -2], [4, 2, 2], size=(10, 3)):
            assert np.max(np.abs(curvature(chart, x).riemann)) <= 1e-10


class TestTauClosedForm:
    @pytest.mark.parametrize("m", [0.5, 1.0, 2.7])
    def test_matches_polynomial(self, m):
        for r in np.geomspace(2 * m * (1 + 1e-8), 1e3 * m, 25):
            assert es.tau_closed_form(0.8, m, r) == pytest.approx(tau_poly(0.8, m, r), rel=1e-12)

    def test_frozen_values(self):
        assert es.tau_closed_form(1.0, 0.5, 2.0) == pytest.approx(fixtures.TAU_AT_2, rel=1e-13)
        assert es.tau_closed_form(1.0, 0.5, 5.0) == pytest.approx(fixtures.TAU_AT_5, rel=1e-13)

    def test_horizon_value(self):
        assert es.tau_closed_form(1.0, 0.5, 1.0 + 1e-12) == pytest.approx(-0.25, abs=1e-6)
        for m in (0.5, 1.0, 3.0):
            assert es.tau_closed_form(1.0, m, 2 * m * (1 + 1e-12)) == pytest.approx(
                es.tau_horizon_value(1.0, m), abs=1e-9)

    def test_negative_and_plateau(self):
        rs = np.geomspace(1.0001, 1e4, 40)
        assert all(es.tau_closed_form(1.0, 0.5, r) < 0 for r in rs)
        tau_o, change = es.tau_asymptote(1.0, 0.5)
        assert tau_o < 0 and change < 1e-4
        assert tau_o == pytest.approx(fixtures.TAU_O_QUADRATURE, rel=1e-12)
        assert tau_o == pytest.approx(fixtures.TAU_O_LIMIT, rel=1e-4)

    def test_horizon_slope_in_r_and_t(self):
        r0 = 1.0 + 1e-4
        slope = (es.tau_closed_form(1.0, 0.5, r0 + 1e-7) - es.tau_closed_form(1.0, 0.5, r0)) / 1e-7
        assert slope == pytest.approx(fixtures.TAU_SLOPE_AT_HORIZON, abs=1e-3)
        # arc-length derivative d tau/dt = (1 - 1/r)^(1/2) d tau/dr vanishes at the horizon
        for eps in (1e-4, 1e-6, 1e-8):
            r = 1.0 + eps
            _, d, _ = es.tau_derivatives(1.0, 0.5, r)
            assert abs(math.sqrt(1 - 1 / r) * d) <= 0.76 * math.sqrt(eps)

    def test_linear_in_alpha(self):
        for r in (1.2, 3.0, 40.0):
            assert es.tau_closed_form(2.0, 0.5, r) == pytest.approx(2 * es.tau_closed_form(1.0, 0.5, r), rel=1e-14)

    def test_domain(self):
        with pytest.raises(ParameterError):
            es.tau_closed_form(1.0, 0.5, 1.0)


class TestTauOde:
    @pytest.mark.parametrize("m", [0.5, 1.3])
    def test_agreement(self, m):
        sol = es.tau_ode(1.0, m, (2 * m * 1.01, 100 * m), 60)
        closed = np.array([es.tau_closed_form(1.0, m, r) for r in sol.r])
        assert np.max(np.abs(sol.tau - closed) / np.abs(closed)) <= 1e-6
        assert sol.provenance == "ode" and np.all(sol.tau < 0)

    def test_residuals(self):
        sol = es.tau_ode(1.0, 0.5, (1.01, 50.0), 60)
        assert np.max(np.abs(sol.residual_first_order)) <= 1e-8
        assert np.max(np.abs(sol.residual_second_order)) <= 1e-6

    def test_closed_solution_residuals(self):
        sol = es.tau_closed_solution(1.0, 0.5, np.linspace(1.01, 50, 20))
        assert sol.provenance == "closed-form"
        assert np.max(np.abs(sol.residual_first_order)) <= 1e-8
        assert np.max(np.abs(sol.residual_second_order)) <= 1e-6

    def test_delta_range(self):
        with pytest.raises(ParameterError):
            es.tau_ode(1.0, 0.5, (1.01, 2.0), delta=1e-8)
        with pytest.raises(ParameterError):
            es.tau_ode(1.0, 0.5, (1.0, 2.0))

    def test_csv(self):
        sol = es.tau_ode(1.0, 0.5, (1.01, 2.0), 5)
        lines = sol.to_csv().splitlines()
        assert lines[0] == "r,tau,taudot,residual_first_order,residual_second_order" and len(lines) == 6


class TestHorizonSeries:
    def test_leading_terms(self):
        c = es.horizon_series(1.0, 0.5, 2)
        assert c == pytest.approx([-0.25, -0.75])
        for m in (0.7, 2.0):
            c = es.horizon_series(1.3, m, 2)
            assert c[0] == pytest.approx(es.tau_horizon_value(1.3, m))
            assert c[1] == pytest.approx(3 * c[0] / (2 * m))

    def test_higher_order_series(self):
        c = es.horizon_series(1.0, 0.5, 6)
        for rho in (1e-3, 1e-2):
            assert np.polynomial.polynomial.polyval(rho, c) == pytest.approx(
                es.tau_closed_form(1.0, 0.5, 1 + rho), rel=1e-11)


class TestTauField:
    def test_jet_derivatives(self):
        f = es.TauField(1.0, 0.5)
        for r in (1.3, 4.0):
            j = f.jet(jets.seed_point([r, 1.0, 0.2]))
            assert j.value() == pytest.approx(es.tau_closed_form(1.0, 0.5, r), rel=1e-14)
            d = richardson_d1(lambda p: es.tau_closed_form(1.0, 0.5, p[0]), [r], 0, 1e-3)
            assert j.derivative((1, 0, 0)) == pytest.approx(d, rel=1e-7)
            assert j.derivative((0, 1, 0)) == 0

    def test_in_expression(self):
        f = es.TauField(1.0, 0.5)
        e = ex.parse("2*tau", ("tau",))
        assert ex.evaluate(e, [2.0, 0, 0], {"tau": f}) == pytest.approx(2 * fixtures.TAU_AT_2)


class TestNamedMetrics:
    @pytest.mark.parametrize("r", [1.5, 2.0, 5.0])
    def test_schwarzschild(self, r):
        nm = build_named_metric("schwarzschild", m=0.5)
        p = curvature(nm.chart, [r, 1.0, 0.2])
        assert abs(float(p.scalar)) <= 1e-10
        assert frame_components(p, p.ricci) == pytest.approx([-r ** -3, 0.5 * r ** -3, 0.5 * r ** -3], rel=1e-10)

    def test_homothety(self):
        lam = 2.0
        for r in (1.5, 3.0):
            a = curvature(build_named_metric("schwarzschild", m=0.5).chart, [r, 1.0, 0.2])
            b = curvature(build_named_metric("schwarzschild", m=0.5 * lam).chart, [lam * r, 1.0, 0.2])
            assert frame_components(b, b.ricci) == pytest.approx(
                list(np.array(frame_components(a, a.ricci)) / lam ** 2), rel=1e-12)

    @pytest.mark.parametrize("kw", [dict(m=0.0), dict(m=-1.0)])
    def test_bad_mass(self, kw):
        with pytest.raises(ParameterError):
            build_named_metric("schwarzschild", **kw)

    def test_bad_kasner(self):
        with pytest.raises(ParameterError):
            build_named_metric("kasner", a=2.0)

    def test_bad_warping(self):
        with pytest.raises(ParameterError):
            build_named_metric("warped", f1="-1", f2="1")

    def test_unknown(self):
        with pytest.raises(ParameterError):
            build_named_metric("taub-nut")

    def test_warped_trivial(self):
        nm = build_named_metric("warped", f1="1", f2="1")
        pts = [[0.1, 0.2, 0.3], [1.0, -1.0, 2.0]]
        for alpha in (0.0, 0.5, 3.0):
            assert residual("vacuum", nm.chart, PotentialSpec("2", alpha), pts).passed
            assert residual("R2s", nm.chart, PotentialSpec("2", alpha), pts).passed

    def test_kasner_potential(self):
        nm = build_named_metric("kasner", a=0.5)
        assert residual("vacuum", nm.chart, nm.potentials["vacuum"], [[1.2, 0, 0]], 1e-7).passed

    def test_s1_invariant(self):
        nm = build_named_metric("s1-invariant", gV=[["1 + 0.2*cos(x2)", "0"], ["0", "1"]],
                                f="1 + 0.1*sin(x1 + x2)")
        assert nm.chart.dim == 3
        assert float(curvature(nm.chart, [0.4, 0.9, 0.0]).scalar) != 0

    def test_canonical_potentials(self):
        nm = build_named_metric("schwarzschild", m=0.5, alpha=1.0, c=-1.0)
        assert residual("vacuum", nm.chart, nm.potentials["vacuum"], [[2.0, 1, 0]], 1e-9).passed
        assert residual("R2s", nm.chart, nm.potentials["R2s"], [[2.0, 1, 0]], 1e-6).passed
