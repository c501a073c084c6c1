"""Euler-Lagrange operators of the quadratic curvature functionals and the
residual systems built from them.

Operators (sign conventions as in :mod:`curvlab.tensor_geometry`)::

    grad R2 = D*D r + D^2 s - 2 Rc o r - 1/2 (Delta s - |r|^2) g
    grad Z2 = D*D z + 1/3 D^2 s - 2 Rc o z + 1/2 (|z|^2 - 1/3 Delta s) g
    L* f    = D^2 f - (Delta f) g - f r

Systems checked by :func:`residual`:

    R2      grad R2 = 0,                Delta s = -|r|^2 / 3
    R2s     alpha grad R2 + L* w = 0,   Delta w = -alpha |r|^2 / 4,  s = 0
    Z2s     alpha grad Z2 + L* w = 0,   Delta w = -alpha |z|^2 / 4,  s = 0
    vacuum  L* w = 0,                   Delta w = 0
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as ex
from .tensor_geometry import (
    CurvaturePack, Geometry, MetricChart, compose, curvature, curvature_action,
    endomorphism_norm, times_metric, trace,
)

SYSTEMS = ("R2", "R2s", "Z2s", "vacuum")


class TraceConsistencyError(RuntimeError):
    """The trace of a full tensor residual disagrees with the independently
    computed trace equation."""


class PotentialError(ValueError):
    pass


# ---------------------------------------------------------------------------
# operators on packs (work pointwise and on grids)
# ---------------------------------------------------------------------------

def grad_r2_from_pack(p: CurvaturePack):
    return (p.rough_lap_ricci + p.hess_scalar - 2.0 * curvature_action(p, p.ricci)
            - 0.5 * times_metric(p, p.lap_scalar - p.ricci_norm2))


def grad_z2_from_pack(p: CurvaturePack):
    z = p.traceless
    return (p.rough_lap_traceless + p.hess_scalar / 3.0 - 2.0 * curvature_action(p, z)
            + 0.5 * times_metric(p, p.traceless_norm2 - p.lap_scalar / 3.0))


def weitzenbock_from_pack(p: CurvaturePack):
    """``1/2 delta d r + 1/2 D^2 s - r o r - Rc o r - 1/2 Delta s g + 1/2 |r|^2 g``.

    ``(d r)_kij = nabla_k r_ij - nabla_i r_kj``; ``delta`` is its formal
    adjoint for the full-contraction inner product on 3-tensors, so
    ``(delta w)_ij = -2 g^{kl} nabla_l w_kij`` on tensors antisymmetric in
    (k, i).
    """
    H = p.hess_ricci  # H[l, k, i, j] = nabla_l nabla_k r_ij
    grad_dr = H - np.einsum("lkij...->likj...", H)
    delta_dr = -2.0 * np.einsum("lk...,lkij...->ij...", p.ginv, grad_dr)
    return (0.5 * delta_dr + 0.5 * p.hess_scalar - compose(p, p.ricci, p.ricci)
            - curvature_action(p, p.ricci) - 0.5 * times_metric(p, p.lap_scalar)
            + 0.5 * times_metric(p, p.ricci_norm2))


def conformally_flat_short_form(p: CurvaturePack):
    """``-r o r - Rc o r + 1/2 |r|^2 g`` (valid for conformally flat,
    scalar-flat metrics)."""
    return (-compose(p, p.ricci, p.ricci) - curvature_action(p, p.ricci)
            + 0.5 * times_metric(p, p.ricci_norm2))


def l_star_from(p: CurvaturePack, f, hess_f):
    return hess_f - times_metric(p, trace(p, hess_f)) - np.einsum("...,ij...->ij...", f, p.ricci)


# ---------------------------------------------------------------------------
# chart-level operations
# ---------------------------------------------------------------------------

def grad_r2(chart: MetricChart, x):
    return grad_r2_from_pack(curvature(chart, x, "fourth-order"))


def grad_z2(chart: MetricChart, x):
    return grad_z2_from_pack(curvature(chart, x, "fourth-order"))


def grad_r2_weitzenbock(chart: MetricChart, x):
    return weitzenbock_from_pack(curvature(chart, x, "fourth-order"))


def l_star(chart: MetricChart, f, x, extra_params=None):
    """``L* f = D^2 f - (Delta f) g - f r`` at ``x``."""
    geo = Geometry.at(chart, x, 2)
    fj = chart.scalar_jet(f, x, 2, extra_params)
    p = geo.pack()
    return l_star_from(p, fj.value(), geo.hessian(fj).value())


# ---------------------------------------------------------------------------
# potentials and residual reports
# ---------------------------------------------------------------------------

@dataclass
class PotentialSpec:
    """Potential ``omega`` and coupling ``alpha >= 0``.

    ``fields`` binds extra identifiers used in ``omega`` (for instance
    ``tau``) to :class:`curvlab.expr.Field` objects or numbers.
    """

    omega: object
    alpha: float = 0.0
    fields: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = ex.as_expr(self.omega, tuple(self.fields))
        self.alpha = float(self.alpha)
        if self.alpha < 0:
            raise PotentialError("alpha must be non-negative")
        if self.alpha == 0 and ex.is_zero(self.omega):
            raise PotentialError("with alpha = 0 the potential must not vanish identically")


@dataclass
class ResidualRow:
    point: tuple
    full: float
    trace: float
    ricci_norm2: float
    scalar: float
    omega: Optional[float]
    trace_of_full: float
    trace_expected: float


@dataclass
class ResidualReport:
    system: str
    tolerance: float
    rows: list
    alpha: Optional[float] = None
    errors: list = field(default_factory=list)

    @property
    def max_full(self):
        return max((r.full for r in self.rows), default=float("nan"))

    @property
    def max_trace(self):
        return max((abs(r.trace) for r in self.rows), default=float("nan"))

    @property
    def max_residual(self):
        vals = [self.max_full, self.max_trace]
        if self.system in ("R2s", "Z2s"):
            vals.append(max(abs(r.scalar) for r in self.rows))
        return max(vals)

    @property
    def passed(self):
        if not self.rows or self.errors:
            return False
        return all(self._row_ok(r) for r in self.rows)

    def _row_ok(self, r):
        ok = r.full <= self.tolerance and abs(r.trace) <= self.tolerance
        if self.system in ("R2s", "Z2s"):
            ok = ok and abs(r.scalar) <= self.tolerance
        return ok

    COLUMNS = ("system", "point", "full_residual", "trace_residual", "ricci_norm2",
               "scalar", "omega", "tolerance", "pass")

    def records(self):
        for r in self.rows:
            yield {
                "system": self.system,
                "point": [float(v) for v in r.point],
                "full_residual": r.full,
                "trace_residual": r.trace,
                "ricci_norm2": r.ricci_norm2,
                "scalar": r.scalar,
                "omega": r.omega,
                "tolerance": self.tolerance,
                "pass": self._row_ok(r),
            }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for rec in self.records():
            w.writerow([
                rec["system"], " ".join(fmt(v) for v in rec["point"]),
                fmt(rec["full_residual"]), fmt(rec["trace_residual"]),
                fmt(rec["ricci_norm2"]), fmt(rec["scalar"]),
                "" if rec["omega"] is None else fmt(rec["omega"]),
                fmt(rec["tolerance"]), int(rec["pass"]),
            ])
        return buf.getvalue()

    def to_jsonl(self):
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.records())


def fmt(x):
    """17 significant digits, locale independent."""
    return format(float(x), ".17g")


def _system_depth(system):
    return 2 if system == "vacuum" else 4


def residual_at(system, chart: MetricChart, x, pot: Optional[PotentialSpec] = None):
    """Residual row for one point (raises on numerical-domain problems)."""
    if system not in SYSTEMS:
        raise ValueError(f"unknown system {system!r}")
    if system != "R2" and pot is None:
        raise PotentialError(f"system {system} requires a potential")
    geo = Geometry.at(chart, x, _system_depth(system))
    p = geo.pack()
    rn2 = float(p.ricci_norm2)
    s = float(p.scalar)
    omega = None
    if system == "R2":
        full = grad_r2_from_pack(p)
        lap_s = float(p.lap_scalar)
        tr_res = lap_s + rn2 / 3.0
        expected = -1.5 * lap_s - 0.5 * rn2
    else:
        wj = chart.scalar_jet(pot.omega, x, 2, pot.fields)
        omega = float(wj.value())
        hess_w = geo.hessian(wj).value()
        lap_w = float(geo.laplacian(wj).value())
        full = l_star_from(p, omega, hess_w)
        expected = -2.0 * lap_w - omega * s
        a = pot.alpha
        if system == "vacuum":
            tr_res = lap_w
        elif system == "R2s":
            full = a * grad_r2_from_pack(p) + full
            tr_res = lap_w + a * rn2 / 4.0
            expected += a * (-1.5 * float(p.lap_scalar) - 0.5 * rn2)
        else:
            zn2 = float(p.traceless_norm2)
            full = a * grad_z2_from_pack(p) + full
            tr_res = lap_w + a * zn2 / 4.0
            expected += a * (-float(p.lap_scalar) / 6.0 - 0.5 * zn2)
    tr_full = float(trace(p, full))
    scale = max(1.0, abs(tr_full), abs(expected))
    if abs(tr_full - expected) > 1e-8 * scale:
        raise TraceConsistencyError(
            f"{system} at {tuple(x)}: trace of full residual {tr_full!r} "
            f"but trace equation gives {expected!r}")
    return ResidualRow(tuple(float(v) for v in x), endomorphism_norm(p.g, full), tr_res,
                       rn2, s, omega, tr_full, expected)


def residual(system, chart: MetricChart, pot: Optional[PotentialSpec], points, tol=1e-8):
    """Evaluate a system at every point.

    Per-point numerical-domain errors are collected in ``report.errors``; if
    every point fails the last error is re-raised.
    """
    rows, errors = [], []
    last = None
    for x in points:
        try:
            rows.append(residual_at(system, chart, x, pot))
        except (ValueError, ArithmeticError) as err:
            if isinstance(err, PotentialError):
                raise
            errors.append((tuple(x), str(err)))
            last = err
    if not rows and last is not None:
        raise last
    return ResidualReport(system, tol, rows, None if pot is None else pot.alpha, errors)


# ---------------------------------------------------------------------------
# global values on the torus grid
# ---------------------------------------------------------------------------

def functional_values(field_, eps=0.1):
    """Quadrature values of the functionals on a closed torus grid.

    Returns a dict with ``R2 = int |r|^2``, ``Z2 = int |z|^2``,
    ``S2 = (int s^2)^(1/2)``, ``volume`` and the scale-invariant
    ``I_eps = eps v^(1/3) R2 + v^(1/6) S2``.
    """
    from .grid_torus import curvature_pack, integrate
    p = curvature_pack(field_, 2)
    v = integrate(field_, 1.0)
    R2 = integrate(field_, p.ricci_norm2)
    Z2 = integrate(field_, p.traceless_norm2)
    S2 = np.sqrt(integrate(field_, p.scalar ** 2))
    return {
        "R2": R2, "Z2": Z2, "S2": float(S2), "volume": v,
        "I_eps": eps * v ** (1.0 / 3.0) * R2 + v ** (1.0 / 6.0) * S2,
        "eps": eps,
    }
