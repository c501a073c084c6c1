import numpy as np
import pytest

from curvlab import functionals as fn
from curvlab import grid_torus as gt
from curvlab.grid_torus import AliasingError, FlowGuard
from curvlab.tensor_geometry import MetricChart, NotPositiveDefinite, curvature

WAVY = MetricChart.diagonal(["1 + 0.1*sin(x2)", "1", "1"])


@pytest.fixture(scope="module")
def field16():
    return gt.random_field(16, 7)


class TestSampling:
    def test_flat(self):
        f = gt.flat_field(8)
        p = gt.curvature_pack(f, 2)
        assert np.all(np.asarray(p.scalar) == 0) and np.all(np.asarray(p.ricci) == 0)

    def test_flat_from_expressions(self):
        f = gt.sample([["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]], 8)
        assert np.array_equal(f.g, gt.flat_field(8).g)

    @pytest.mark.parametrize("N", [6, 9])
    def test_bad_size(self, N):
        with pytest.raises(ValueError):
            gt.flat_field(N)

    def test_aliasing_guard(self):
        with pytest.raises(AliasingError):
            gt.sample(MetricChart.diagonal(["1 + 0.1*sin(7*x1)", "1", "1"]), 16)

    def test_not_spd(self):
        with pytest.raises(NotPositiveDefinite) as err:
            gt.sample(MetricChart.diagonal(["sin(x1)", "1", "1"]), 8)
        assert "grid point" in str(err.value)

    def test_random_field_guards(self, field16):
        field16.check_spd()
        assert gt.aliasing_fraction(field16.g) <= 1e-10
        assert np.max(np.abs(field16.g - np.eye(3)[:, :, None, None, None])) <= 0.2 + 1e-15

    def test_seeded(self):
        assert np.array_equal(gt.random_field(10, 3).g, gt.random_field(10, 3).g)
        assert not np.array_equal(gt.random_field(10, 3).g, gt.random_field(10, 4).g)

    def test_random_field_too_coarse(self):
        # modes up to 3 exceed N/3 on an 8-point grid
        with pytest.raises(AliasingError):
            gt.random_field(8, 3)


class TestSpectral:
    def test_translation_commutes(self, field16):
        shift = (3, -5, 2)
        a = gt.spectral_derivative(np.roll(field16.g, shift, axis=(-3, -2, -1)), 1)
        b = np.roll(gt.spectral_derivative(field16.g, 1), shift, axis=(-3, -2, -1))
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_curvature_translation(self, field16):
        shift = (1, 2, 3)
        a = np.asarray(gt.curvature_pack(field16.shifted(shift), 2).scalar)
        b = np.roll(np.asarray(gt.curvature_pack(field16, 2).scalar), shift, axis=(-3, -2, -1))
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_derivative_of_mode(self):
        X = gt.grid_coordinates(16)
        d = gt.spectral_derivative(np.sin(3 * X[0]) * np.cos(X[2]), 0)
        assert np.max(np.abs(d - 3 * np.cos(3 * X[0]) * np.cos(X[2]))) <= 1e-12

    def test_quadrature_exact(self):
        f = gt.flat_field(16)
        X = gt.grid_coordinates(16)
        density = 1.7 + np.sin(2 * X[0]) * np.cos(3 * X[1]) + 0.4 * np.cos(X[2] - X[0])
        assert gt.integrate(f, density) == pytest.approx(1.7 * (2 * np.pi) ** 3, rel=1e-12)


class TestGridVsChart:
    def errors(self):
        out = {}
        for N in (16, 24, 32):
            s = np.asarray(gt.curvature_pack(gt.sample(WAVY, N), 2).scalar)
            X = gt.grid_coordinates(N)
            err = 0.0
            for idx in [(0, 1, 2), (3, 5, 7), (N - 1, N // 2, 1)]:
                x = [X[k][idx] for k in range(3)]
                err = max(err, abs(s[idx] - float(curvature(WAVY, x).scalar)))
            out[N] = err
        return out

    def test_agreement_and_spectral_decay(self):
        err = self.errors()
        assert err[32] <= 1e-8
        # spectral: 8 extra points per axis buy several orders of magnitude
        assert err[24] <= 1e-3 * err[16] or err[24] <= 1e-13
        assert err[32] <= 1e-13


class TestFunctionals:
    def test_flat(self):
        f = gt.flat_field(8)
        for F in ("R2", "Z2"):
            v, g = gt.functional_and_gradient(F, f)
            assert v == 0 and np.all(g == 0)

    def test_unknown(self):
        with pytest.raises(ValueError):
            gt.functional_value("S2", gt.flat_field(8))

    def test_value_paths_agree(self, field16):
        v, _ = gt.functional_and_gradient("R2", field16)
        assert v == pytest.approx(gt.functional_value("R2", field16), rel=1e-14)
        assert v == pytest.approx(fn.functional_values(field16)["R2"], rel=1e-14)

    def test_norm_split(self, field16):
        v = fn.functional_values(field16)
        assert v["R2"] >= v["Z2"] > 0


@pytest.mark.parametrize("F", ["R2", "Z2"])
def test_gradient_check(F):
    f = gt.random_field(24, 7)
    gc = gt.gradient_check(F, f, gt.perturbations(24, 7))
    assert gc.kappa_spread <= 1e-3
    assert abs(gc.kappa_mean - 1) <= 1e-3
    assert np.max(np.abs(gc.fd - gc.pairing) / np.abs(gc.pairing)) <= 1e-4


class TestFlow:
    def test_flat_unchanged(self):
        f = gt.flat_field(8)
        assert np.array_equal(gt.flow_step(f, "R2", 1e-3).g, f.g)

    def test_descent(self, field16):
        values, maxres, _ = gt.flow(field16, "R2", 1e-5, 10)
        assert len(values) == 11 and np.all(np.diff(values) < 0)
        assert np.all(maxres > 0)

    def test_guard(self, field16):
        with pytest.raises(FlowGuard) as err:
            gt.flow(field16, "R2", 10.0, 10)
        assert err.value.step == 1

    def test_bad_dt(self, field16):
        with pytest.raises(ValueError):
            gt.flow_step(field16, "R2", 0.0)
