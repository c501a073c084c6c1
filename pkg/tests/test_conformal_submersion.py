import numpy as np
import pytest

from curvlab import conformal_submersion as cs
from curvlab.conformal_submersion import ConformalPair, NonPositiveFactor
from curvlab.exact_solutions import build_named_metric
from curvlab.suites import POSITIVE_SCALAR_CHART, random_diagonal_metric, random_points
from curvlab.tensor_geometry import MetricChart, curvature, hessian_laplacian

RANDOM = [(random_diagonal_metric(300 + k), random_points(300 + k, 1)[0]) for k in range(10)]
RANDOM_2D = [(random_diagonal_metric(400 + k, dim=2), random_points(400 + k, 1, dim=2)[0]) for k in range(10)]
FLAT2 = MetricChart.diagonal(["1", "1"])
SPHERE2 = MetricChart.diagonal(["1", "sin(x1)^2"], domain=((0, np.pi), (-np.inf, np.inf)))
SCHW = build_named_metric("schwarzschild", m=0.5)


class TestConformalScalar:
    @pytest.mark.parametrize("lam", [0.5, 3.0])
    def test_homothety(self, lam):
        chart, x = RANDOM[0]
        d, f = cs.conformal_scalar(ConformalPair(chart, repr(lam ** 2)), x)
        s = float(curvature(chart, x).scalar)
        assert d == pytest.approx(s / lam ** 2, rel=1e-10)
        assert f == pytest.approx(s / lam ** 2, rel=1e-12)

    def test_random(self):
        for chart, x in RANDOM:
            d, f = cs.conformal_scalar(ConformalPair(chart, "1 + 0.3*sin(x1)"), x)
            assert abs(d - f) <= 1e-8

    def test_composition(self):
        phi1, phi2 = "1 + 0.2*cos(x3)", "exp(0.1*sin(x1 + x2))"
        for chart, x in RANDOM:
            twice, _ = cs.conformal_scalar(ConformalPair(ConformalPair(chart, phi1).scaled, phi2), x)
            once, _ = cs.conformal_scalar(ConformalPair(chart, f"({phi1})*({phi2})"), x)
            assert abs(twice - once) <= 1e-8

    def test_nonpositive(self):
        chart, x = RANDOM[0]
        with pytest.raises(NonPositiveFactor):
            cs.conformal_scalar(ConformalPair(chart, "-1"), x)


class TestScalarRescaled:
    def test_correction_term(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            x = [rng.uniform(0.6, 2.5), rng.uniform(0.6, 2.5), rng.uniform(-3, 3)]
            direct, closed, corr = cs.scalar_rescaled(POSITIVE_SCALAR_CHART, x)
            assert abs(direct - closed - corr) <= 1e-8

    def test_round_sphere(self):
        # s = 6 constant, |r|^2 = 12: the rescaled metric is g/6 with scalar 1
        chart = MetricChart.diagonal(["1", "sin(x1)^2", "sin(x1)^2*sin(x2)^2"],
                                     domain=((0, np.pi), (0, np.pi), (-np.inf, np.inf)))
        direct, closed, corr = cs.scalar_rescaled(chart, [1.0, 1.2, 0.3])
        assert direct == pytest.approx(1.0, rel=1e-10)
        assert closed == pytest.approx(1 + 2 / 3 * 12 / 36, rel=1e-10)
        assert corr == pytest.approx(-2 / 36 * 4, rel=1e-10)

    def test_requires_positive_scalar(self):
        with pytest.raises(NonPositiveFactor):
            cs.scalar_rescaled(MetricChart.diagonal(["1", "1", "1"]), [0.1, 0.2, 0.3])


class TestConformalRicci:
    def test_constant(self):
        chart, x = RANDOM[1]
        d, f = cs.conformal_ricci_429(chart, "2.5", x)
        r = curvature(chart, x).ricci
        assert np.max(np.abs(d - r)) <= 1e-10 and np.max(np.abs(f - r)) <= 1e-12

    def test_random(self):
        for chart, x in RANDOM:
            d, f = cs.conformal_ricci_429(chart, "exp(0.2*cos(x2))", x)
            assert np.max(np.abs(d - f)) <= 1e-8

    @pytest.mark.parametrize("r", [1.5, 2.0, 5.0])
    def test_schwarzschild_potential(self, r):
        d, f = cs.conformal_ricci_429(SCHW.chart, "(1 - 2*m/r)^0.5", [r, 1.1, 0.4])
        assert np.max(np.abs(d - f)) <= 1e-8

    def test_nonpositive(self):
        with pytest.raises(NonPositiveFactor):
            cs.conformal_ricci_429(FLAT2, "x1", [-1.0, 0.0])


class TestGauss2d:
    def test_flat_trivial(self):
        d, f = cs.gauss_conformal_2d(FLAT2, "1", [0.3, 0.4])
        assert d == 0 and f == 0

    def test_flat_torus(self):
        for x in random_points(9, 10, dim=2):
            d, f = cs.gauss_conformal_2d(FLAT2, "exp(0.1*sin(x1))", x)
            assert abs(d - f) <= 1e-9

    @pytest.mark.parametrize("lam", [0.5, 2.0])
    def test_sphere_homothety(self, lam):
        d, f = cs.gauss_conformal_2d(SPHERE2, repr(lam), [1.0, 0.2])
        assert d == pytest.approx(lam ** -2, rel=1e-10) and f == pytest.approx(lam ** -2, rel=1e-12)

    def test_random(self):
        for gV, x in RANDOM_2D:
            d, f = cs.gauss_conformal_2d(gV, "exp(0.1*sin(x1))", x)
            assert abs(d - f) <= 1e-9


class TestSubmersion:
    def test_total_space(self):
        g = cs.s1_total_space(FLAT2, "2")
        assert g.dim == 3
        np.testing.assert_allclose(g.metric_value([0.1, 0.2, 0.3]), np.diag([1, 1, 4]))

    def test_product(self):
        for gV, x in RANDOM_2D[:3]:
            lhs, rhs = cs.submersion_scalar_41(gV, "3", x)
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_flat_base(self):
        for x in random_points(11, 10, dim=2):
            lhs, rhs = cs.submersion_scalar_41(FLAT2, "exp(0.2*sin(x1))", x)
            assert abs(lhs - rhs) <= 1e-8

    def test_curved_base(self):
        gV = MetricChart.diagonal(["1 + 0.2*cos(x2)", "1"])
        for x in random_points(12, 10, dim=2):
            lhs, rhs = cs.submersion_scalar_41(gV, "1 + 0.1*sin(x1 + x2)", x)
            assert abs(lhs - rhs) <= 1e-8

    def test_random(self):
        for gV, x in RANDOM_2D:
            lhs, rhs = cs.submersion_scalar_41(gV, "1 + 0.1*sin(x1 + x2)", x)
            assert abs(lhs - rhs) <= 1e-8

    def test_theta_independent(self):
        gV, x = RANDOM_2D[0]
        a = cs.submersion_scalar_41(gV, "1 + 0.1*sin(x1 + x2)", x, 0.0)
        b = cs.submersion_scalar_41(gV, "1 + 0.1*sin(x1 + x2)", x, 2.0)
        assert a == pytest.approx(b, abs=1e-12)

    def test_warped_identity(self):
        # s = s_V - 2 Delta_V f / f for the warped product gV + f^2 dtheta^2
        gV = MetricChart.diagonal(["1 + 0.2*cos(x2)", "1"])
        f = "1 + 0.1*sin(x1 + x2)"
        for x in random_points(13, 5, dim=2):
            s = float(curvature(cs.s1_total_space(gV, f), list(x) + [0.0]).scalar)
            sV = float(curvature(gV, x).scalar)
            _, lap = hessian_laplacian(gV, f, x)
            fv = float(gV.scalar_jet(f, x, 0).value())
            assert s == pytest.approx(sV - 2 * lap / fv, abs=1e-9)

    def test_nonpositive(self):
        with pytest.raises(NonPositiveFactor):
            cs.submersion_scalar_41(FLAT2, "sin(x1)", [-0.5, 0.0])
