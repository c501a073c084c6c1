"""Pinned-seed random metrics and the randomized identity battery."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import conformal_submersion as cs
from . import functionals as fn
from .functionals import fmt
from .tensor_geometry import (
    MetricChart, cotton_from_pack, curvature, divergence_sym2,
    scalar_gradient, trace,
)


def _num(v):
    return repr(float(v))


def random_diagonal_metric(seed, dim=3) -> MetricChart:
    """Diagonal metric with smooth positive entries ``c (1 + a sin(k.x + p))``
    (a <= 0.3), optionally times ``exp(b cos(x_j))``."""
    rng = np.random.default_rng(seed)
    entries = []
    for _ in range(dim):
        c = rng.uniform(0.7, 1.6)
        a = rng.uniform(0.05, 0.3)
        k = rng.integers(-2, 3, size=dim)
        k[rng.integers(dim)] = rng.choice([-1, 1]) * rng.integers(1, 3)
        p = rng.uniform(0, 2 * np.pi)
        phase = " + ".join(f"{int(kk)}*x{j+1}" for j, kk in enumerate(k) if kk)
        e = f"{_num(c)}*(1 + {_num(a)}*sin({phase} + {_num(p)}))"
        if rng.random() < 0.5:
            b = rng.uniform(-0.3, 0.3)
            e += f"*exp({_num(b)}*cos(x{int(rng.integers(dim)) + 1}))"
        entries.append(e)
    return MetricChart.diagonal(entries, name=f"random-diagonal(seed={seed})")


def random_points(seed, count, dim=3, box=1.0):
    rng = np.random.default_rng(seed)
    return [list(p) for p in rng.uniform(-box, box, size=(count, dim))]


@dataclass
class IdentityRow:
    name: str
    max_error: float
    tol: float
    count: int

    @property
    def passed(self):
        return bool(self.max_error <= self.tol)


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["identity", "max_error", "tolerance", "samples", "pass"])
    for r in rows:
        w.writerow([r.name, fmt(r.max_error), fmt(r.tol), r.count, int(r.passed)])
    return buf.getvalue()


class _Acc:
    def __init__(self):
        self.err = {}
        self.n = {}

    def add(self, name, value):
        self.err[name] = max(self.err.get(name, 0.0), float(np.max(np.abs(value))))
        self.n[name] = self.n.get(name, 0) + 1


def trace_identities(charts_points, acc=None):
    """Trace and divergence identities at every (chart, point)."""
    acc = acc or _Acc()
    for chart, x in charts_points:
        p = curvature(chart, x, "fourth-order")
        lap_s, rn2, zn2 = float(p.lap_scalar), float(p.ricci_norm2), float(p.traceless_norm2)
        acc.add("trace_grad_r2", float(trace(p, fn.grad_r2_from_pack(p))) - (-1.5 * lap_s - 0.5 * rn2))
        acc.add("trace_grad_z2", float(trace(p, fn.grad_z2_from_pack(p))) - (-lap_s / 6.0 - 0.5 * zn2))
        acc.add("ricci_norm_split", rn2 - (zn2 + float(p.scalar) ** 2 / 3.0))
        ds = scalar_gradient(chart, x)
        acc.add("divergence_ricci", divergence_sym2(chart, "ricci", x) + 0.5 * ds)
        acc.add("divergence_traceless", divergence_sym2(chart, "traceless", x) + ds / 6.0)
        R = p.riemann
        acc.add("first_bianchi", R + np.einsum("abcd->acdb", R) + np.einsum("abcd->adbc", R))
        acc.add("riemann_symmetries", [R + np.einsum("abcd->bacd", R), R - np.einsum("abcd->cdab", R)])
        acc.add("weitzenbock_form", fn.grad_r2_from_pack(p) - fn.weitzenbock_from_pack(p))
    return acc


def scaling_identities(charts_points, lam=1.7, acc=None):
    """Curvature scaling under ``g -> lam^2 g``."""
    acc = acc or _Acc()
    for chart, x in charts_points:
        p = curvature(chart, x, "second-order")
        q = curvature(chart.scaled(lam ** 2), x, "second-order")
        acc.add("scaling_scalar", float(q.scalar) * lam ** 2 - float(p.scalar))
        acc.add("scaling_ricci_tensor", q.ricci - p.ricci)
        acc.add("scaling_ricci_density",
                float(q.ricci_norm2) * lam ** 3 - float(p.ricci_norm2) * lam ** -1)
    return acc


def conformal_identities(charts_points, acc=None, seed=0):
    acc = acc or _Acc()
    for k, (chart, x) in enumerate(charts_points):
        d, f = cs.conformal_scalar(cs.ConformalPair(chart, "1 + 0.3*sin(x1)"), x)
        acc.add("conformal_scalar", d - f)
        d, f = cs.conformal_ricci_429(chart, "exp(0.2*cos(x2))", x)
        acc.add("conformal_ricci", d - f)
        # composition of two conformal factors
        phi1, phi2 = "1 + 0.2*cos(x3)", "exp(0.1*sin(x1 + x2))"
        twice, _ = cs.conformal_scalar(cs.ConformalPair(cs.ConformalPair(chart, phi1).scaled, phi2), x)
        once, _ = cs.conformal_scalar(cs.ConformalPair(chart, f"({phi1})*({phi2})"), x)
        acc.add("conformal_composition", twice - once)
        gV = random_diagonal_metric(seed * 1000 + 500 + k, dim=2)
        d, f = cs.gauss_conformal_2d(gV, "exp(0.1*sin(x1))", x[:2])
        acc.add("gauss_conformal_2d", d - f)
        lhs, rhs = cs.submersion_scalar_41(gV, "1 + 0.1*sin(x1 + x2)", x[:2])
        acc.add("submersion_warped", lhs - rhs)
    return acc


POSITIVE_SCALAR_CHART = MetricChart.diagonal(
    ["1 + 0.1*sin(x2)", "sin(x1)^2", "sin(x1)^2*sin(x2)^2*(1 + 0.1*cos(x3))"],
    domain=((0.0, np.pi), (0.0, np.pi), (-np.inf, np.inf)), name="perturbed-round-S3")


def rescaled_identity(points, acc=None):
    acc = acc or _Acc()
    for x in points:
        direct, closed, corr = cs.scalar_rescaled(POSITIVE_SCALAR_CHART, x)
        acc.add("scalar_rescaled_correction", direct - closed - corr)
    return acc


SPHERICAL_CHARTS = (
    MetricChart.diagonal(["1/(1 - 2*m/r)", "r^2", "r^2*sin(phi)^2"], params={"m": 0.5},
                         domain=((1.0, np.inf), (0, np.pi), (-np.inf, np.inf))),
    MetricChart.diagonal(["exp(0.3*r)", "(1 + r^2)", "(1 + r^2)*sin(phi)^2"],
                         domain=((0.0, np.inf), (0, np.pi), (-np.inf, np.inf))),
)


def cotton_identities(points, acc=None):
    acc = acc or _Acc()
    for chart in SPHERICAL_CHARTS:
        for x in points:
            acc.add("cotton_spherical", cotton_from_pack(curvature(chart, x, "third-order")))
    return acc


TOLERANCES = {
    "trace_grad_r2": 1e-8, "trace_grad_z2": 1e-8, "ricci_norm_split": 1e-8,
    "divergence_ricci": 1e-8, "divergence_traceless": 1e-8, "first_bianchi": 1e-10,
    "riemann_symmetries": 1e-10, "weitzenbock_form": 1e-8, "scaling_scalar": 1e-10,
    "scaling_ricci_tensor": 1e-10, "scaling_ricci_density": 1e-10,
    "conformal_scalar": 1e-8, "conformal_ricci": 1e-8, "conformal_composition": 1e-8,
    "gauss_conformal_2d": 1e-9, "submersion_warped": 1e-8,
    "scalar_rescaled_correction": 1e-8, "cotton_spherical": 1e-9,
}


def identity_battery(seed=7, n_metrics=20, points_per_metric=2, tol=None):
    """Run every identity; returns a list of :class:`IdentityRow`.

    ``tol`` overrides every per-identity tolerance when given.
    """
    cps = [(random_diagonal_metric(seed * 1000 + k), x)
           for k in range(n_metrics)
           for x in random_points(seed * 1000 + k, points_per_metric)]
    acc = _Acc()
    trace_identities(cps, acc)
    scaling_identities(cps, acc=acc)
    conformal_identities(cps[::points_per_metric][:10], acc, seed)
    rng = np.random.default_rng(seed)
    rescaled_identity([[rng.uniform(0.6, 2.5), rng.uniform(0.6, 2.5), rng.uniform(-3, 3)]
                       for _ in range(5)], acc)
    cotton_identities([[rng.uniform(1.2, 6.0), rng.uniform(0.3, 2.8), rng.uniform(-3, 3)]
                       for _ in range(5)], acc)
    return [IdentityRow(name, acc.err[name], TOLERANCES[name] if tol is None else tol, acc.n[name])
            for name in TOLERANCES]
