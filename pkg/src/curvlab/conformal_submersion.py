"""Conformal-change and S^1-submersion identities, each paired with a direct
curvature computation of the transformed metric.

Every public function returns ``(direct, formula)`` so callers can compare
the closed-form law against the curvature pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from . import jets
from .tensor_geometry import Geometry, MetricChart, curvature


class NonPositiveFactor(ValueError):
    pass


def _positive(chart: MetricChart, f, x, what, extra=None):
    v = ex.evaluate(ex.as_expr(f, {**chart.params, **(extra or {})}), list(x),
                    {**chart.params, **(extra or {})})
    if not v > 0:
        raise NonPositiveFactor(f"{what} = {v} is not positive at {tuple(x)}")
    return v


def _log_derivatives(chart: MetricChart, f, x, extra=None):
    """(grad log f, |grad log f|^2, D^2 log f, Delta log f) w.r.t. ``chart``."""
    geo = Geometry.at(chart, x, 2)
    lf = jets.log(chart.scalar_jet(f, x, 2, extra))
    d = lf.grad().value()
    ginv = geo.ginv.value()
    hess = geo.hessian(lf).value()
    return d, float(d @ ginv @ d), hess, float(np.einsum("ij,ij->", ginv, hess))


class ScalarCurvatureField(ex.Field):
    """The scalar curvature of a chart, usable as an identifier in
    expressions evaluated on that chart's identity coordinate jets."""

    def __init__(self, chart: MetricChart):
        self.chart = chart

    def jet(self, coords):
        order = coords[0].order
        if order + 2 > jets.MAX_ORDER:
            raise ValueError("scalar curvature jets are limited to order 2")
        x = [float(c.value()) for c in coords]
        return Geometry.at(self.chart, x, order + 2).scalar

    def evaluate(self, coords):
        arr = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
        out = np.vectorize(lambda *p: float(curvature(self.chart, p).scalar))(*arr)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConformalPair:
    """A base chart ``g`` and a factor ``phi``; ``scaled`` is ``phi * g``."""

    base: MetricChart
    phi: object
    fields: tuple = ()

    @property
    def extra(self):
        return dict(self.fields)

    @property
    def scaled(self) -> MetricChart:
        chart = self.base.with_params(**self.extra) if self.fields else self.base
        return chart.scaled(ex.as_expr(self.phi, {**self.base.params, **self.extra}))


def conformal_scalar(pair: ConformalPair, x):
    """Scalar curvature of ``phi g``: direct, and
    ``phi^-1 (s - 2 Delta log phi - 1/2 |grad log phi|^2)`` (dimension 3)."""
    if pair.base.dim != 3:
        raise ValueError("the conformal scalar law implemented here is the 3-dimensional one")
    phi = _positive(pair.base, pair.phi, x, "phi", pair.extra)
    direct = float(curvature(pair.scaled, x).scalar)
    s = float(curvature(pair.base, x).scalar)
    _, dn2, _, lap = _log_derivatives(pair.base, pair.phi, x, pair.extra)
    return direct, (s - 2.0 * lap - 0.5 * dn2) / phi


def scalar_rescaled(chart: MetricChart, x):
    """The metric ``s g`` for a metric with ``s > 0``.

    Returns ``(direct, closed, correction)``: the direct scalar curvature of
    ``s g``, the expression ``1 + 2/3 |r|^2/s^2 + 3/2 |grad s|^2/s^3`` and the
    term ``-(2/s^2)(Delta s + |r|^2/3)`` by which they differ.  The
    correction vanishes exactly when ``Delta s = -|r|^2/3``.
    """
    p = curvature(chart, x, "fourth-order")
    s = float(p.scalar)
    if not s > 0:
        raise NonPositiveFactor(f"scalar curvature {s} is not positive at {tuple(x)}")
    sfield = ScalarCurvatureField(chart)
    direct, _ = conformal_scalar(ConformalPair(chart, "s", (("s", sfield),)), x)
    rn2 = float(p.ricci_norm2)
    closed = 1.0 + (2.0 / 3.0) * rn2 / s ** 2 + 1.5 * float(p.grad_scalar_norm2) / s ** 3
    correction = -(2.0 / s ** 2) * (float(p.lap_scalar) + rn2 / 3.0)
    return direct, closed, correction


def conformal_ricci_429(g: MetricChart, u, x, extra=None):
    """Ricci of ``u^2 g``: direct, and
    ``r - u^-1 D^2 u - u^-1 (Delta u) g + 2 (d log u)^2``."""
    uv = _positive(g, u, x, "u", extra)
    u2 = ex.BinOp((1, 1), "^", ex.as_expr(u, {**g.params, **(extra or {})}), ex.const(2))
    chart = g.with_params(**extra) if extra else g
    direct = curvature(chart.scaled(u2), x).ricci
    geo = Geometry.at(g, x, 2)
    uj = g.scalar_jet(u, x, 2, extra)
    hess = geo.hessian(uj).value()
    lap = float(np.einsum("ij,ij->", geo.ginv.value(), hess))
    dl = uj.grad().value() / uv
    formula = (geo.ricci.value() - hess / uv - (lap / uv) * geo.g.value()
               + 2.0 * np.outer(dl, dl))
    return direct, formula


def gauss_conformal_2d(gV: MetricChart, f, x):
    """Gauss curvature of ``f^2 gV``: direct, and ``f^-2 (K - Delta log f)``."""
    if gV.dim != 2:
        raise ValueError("gauss_conformal_2d needs a 2-dimensional chart")
    fv = _positive(gV, f, x, "f")
    f2 = ex.BinOp((1, 1), "^", ex.as_expr(f, gV.params), ex.const(2))
    direct = 0.5 * float(curvature(gV.scaled(f2), x).scalar)
    K = 0.5 * float(curvature(gV, x).scalar)
    _, _, _, lap = _log_derivatives(gV, f, x)
    return direct, (K - lap) / fv ** 2


def s1_total_space(gV: MetricChart, f) -> MetricChart:
    """The 3-chart ``gV + f^2 dtheta^2`` (theta is the third coordinate)."""
    if gV.dim != 2:
        raise ValueError("the base of the S^1 quotient must be 2-dimensional")
    comps = {(i, j): gV.components[i][j] for i in range(2) for j in range(2)}
    comps[(0, 2)] = comps[(1, 2)] = 0.0
    comps[(2, 2)] = ex.BinOp((1, 1), "^", ex.as_expr(f, gV.params), ex.const(2))
    domain = tuple(gV.domain) + ((-np.inf, np.inf),)
    return MetricChart.from_dict(comps, dim=3, params=gV.params, domain=domain,
                                 name=f"({gV.name}) + f^2 dtheta^2")


def submersion_scalar_41(gV: MetricChart, f, x, theta=0.0):
    """``(s_V, s + |A|^2 + 2 |grad log f|^2 + 2 Delta_V log f)``.

    ``s`` is the scalar curvature of the S^1-invariant total space and the
    log f terms are taken on the base.  The horizontal distribution of a
    warped product is integrable, so the O'Neill tensor term is zero.
    """
    _positive(gV, f, x, "f")
    lhs = float(curvature(gV, x).scalar)
    s = float(curvature(s1_total_space(gV, f), list(x) + [theta]).scalar)
    a_norm2 = 0.0  # |A|^2: zero for S^1-invariant warped products
    _, dn2, _, lap = _log_derivatives(gV, f, x)
    return lhs, s + a_norm2 + 2.0 * dn2 + 2.0 * lap
