import numpy as np
import pytest

from curvlab import suites
from curvlab.tensor_geometry import curvature


def test_random_metric_pinned():
    a = suites.random_diagonal_metric(5)
    b = suites.random_diagonal_metric(5)
    x = [0.2, -0.3, 0.4]
    assert np.array_equal(a.metric_value(x), b.metric_value(x))
    assert not np.array_equal(a.metric_value(x), suites.random_diagonal_metric(6).metric_value(x))


@pytest.mark.parametrize("seed", range(20))
def test_random_metric_spd_and_curved(seed):
    chart = suites.random_diagonal_metric(seed)
    for x in suites.random_points(seed, 3):
        assert np.all(np.linalg.eigvalsh(chart.metric_value(x)) > 0)
    assert np.max(np.abs(curvature(chart, suites.random_points(seed, 1)[0]).ricci)) > 1e-6


def test_points_shape():
    pts = suites.random_points(1, 4, dim=2, box=0.5)
    assert len(pts) == 4 and all(len(p) == 2 and max(map(abs, p)) <= 0.5 for p in pts)


def test_identity_row():
    assert suites.IdentityRow("a", 1e-9, 1e-8, 3).passed
    assert not suites.IdentityRow("a", 2e-8, 1e-8, 3).passed
    assert not suites.IdentityRow("a", float("nan"), 1e-8, 3).passed


@pytest.fixture(scope="module")
def battery():
    return suites.identity_battery(seed=7)


def test_battery_passes(battery):
    assert [r.name for r in battery] == list(suites.TOLERANCES)
    failing = [r for r in battery if not r.passed]
    assert not failing, failing
    assert all(r.count > 0 for r in battery)


def test_battery_csv(battery):
    text = suites.rows_to_csv(battery)
    lines = text.splitlines()
    assert lines[0] == "identity,max_error,tolerance,samples,pass"
    assert len(lines) == len(battery) + 1
    assert text == suites.rows_to_csv(suites.identity_battery(seed=7))


def test_tight_override_fails():
    rows = suites.identity_battery(seed=3, n_metrics=2, points_per_metric=1, tol=0.0)
    assert any(not r.passed for r in rows)
