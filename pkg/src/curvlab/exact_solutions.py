"""Named metric families and the Schwarzschild R2_s potential.

The Schwarzschild metric of mass m in areal coordinates (r, phi, psi),

    g = (1 - 2m/r)^(-1) dr^2 + r^2 (dphi^2 + sin(phi)^2 dpsi^2),

solves the static vacuum equations with potential u = (1 - 2m/r)^(1/2), and
the scalar-flat R2_s equations with potential tau + c u, where tau is the
spherically symmetric solution, regular at the horizon r = 2m, of

    (2/r)(1 - 2m/r) tau' - 2m tau / r^3 = alpha m^2 / r^6          (*)

(at m = 1/2 this is (2/r)(1 - 1/r) tau' - tau r^-3 = alpha r^-6 / 4).

``tau`` is available three ways: :func:`tau_closed_form` (a regularized
quadrature), :func:`tau_ode` (series start at the horizon plus an adaptive
Runge-Kutta march) and :class:`TauField` (Taylor jets of tau for the
curvature pipeline).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import expr as ex
from . import jets
from .functionals import PotentialSpec, fmt
from .tensor_geometry import MetricChart


class ParameterError(ValueError):
    pass


class StepSizeUnderflow(RuntimeError):
    """The ODE march could not leave the neighbourhood of r = 2m."""


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Kasner
# ---------------------------------------------------------------------------

def kasner_exponents(a):
    """Exponents (alpha, beta, gamma) of the Kasner family for a in [-1, 1].

    The metric is dr^2 + r^(2 alpha) dtheta1^2 + r^(2 beta) dtheta2^2 and the
    static potential is c r^gamma.
    """
    a = float(a)
    if not -1.0 <= a <= 1.0:
        raise ParameterError(f"Kasner parameter a={a} outside [-1, 1]")
    if a == 0.0:
        # the formulas are 0/inf forms here; these are their limits
        return 0.0, 1.0, 0.0
    d = a - 1.0 + 1.0 / a
    return (a - 1.0) / d, (1.0 / a - 1.0) / d, 1.0 / d


@dataclass(frozen=True)
class KasnerSpec:
    a: float

    @property
    def exponents(self):
        return kasner_exponents(self.a)

    def chart(self):
        al, be, _ = self.exponents
        return MetricChart.diagonal(
            ["1", f"r^{ex.to_source(ex.const(2 * al))}", f"r^{ex.to_source(ex.const(2 * be))}"],
            domain=((0.0, np.inf), (-np.inf, np.inf), (-np.inf, np.inf)),
            periodic=(False, True, True), name=f"kasner(a={self.a:g})")

    def potential(self, c=1.0):
        g = self.exponents[2]
        return f"{ex.to_source(ex.const(c))} * r^{ex.to_source(ex.const(g))}"


# ---------------------------------------------------------------------------
# Schwarzschild and tau
# ---------------------------------------------------------------------------

SCHWARZSCHILD_COMPONENTS = ("1/(1 - 2*m/r)", "r^2", "r^2*sin(phi)^2")
HORIZON_POTENTIAL = "(1 - 2*m/r)^0.5"


@dataclass(frozen=True)
class SchwarzschildSpec:
    m: float

    def __post_init__(self):
        if not self.m > 0:
            raise ParameterError("Schwarzschild mass must be positive")

    def chart(self):
        return MetricChart.diagonal(
            list(SCHWARZSCHILD_COMPONENTS), params={"m": self.m},
            domain=((2 * self.m, np.inf), (0.0, np.pi), (-np.inf, np.inf)),
            periodic=(False, False, True), name=f"schwarzschild(m={self.m:g})")

    def u(self, r):
        return math.sqrt(1.0 - 2.0 * self.m / r)


def _check_r(m, r):
    if not r > 2 * m:
        raise ParameterError(f"r={r} must exceed 2m={2 * m}")


def tau_horizon_value(alpha, m):
    """tau(2m+) = -alpha / (16 m^2) (equals -alpha/4 at m = 1/2)."""
    return -alpha / (16.0 * m * m)


def tau_closed_form(alpha, m, r):
    """tau(r) from the a -> 2m limit of the integral representation.

    With w = 1 - 2m/s the integrand s^-5 (1 - 2m/s)^(-3/2) contains the
    non-integrable piece q(s) = (2m/s^2) w^(-3/2) / (16 m^4), the derivative
    of -w^(-1/2) / (8 m^4).  Its boundary contribution at s = a cancels the
    divergent boundary term of the representation in the limit, leaving

        tau(r) = (alpha m^2 / 2) [ w_r^(1/2) I(r) - 1 / (8 m^4) ],
        I(r)   = int_2m^r (s^-5 w^-3/2 - q(s)) ds,

    where the remaining integrand behaves like (s - 2m)^(-1/2) and is
    integrated with an algebraic-endpoint-weight quadrature.
    """
    _check_r(m, r)
    pref = alpha * m * m / 2.0
    w = 1.0 - 2.0 * m / r
    return pref * (math.sqrt(w) * _regular_integral(m, r) - 1.0 / (8.0 * m ** 4))


def _regular_integral(m, r):
    c = 2.0 * m / (16.0 * m ** 4)

    def smooth(s):
        # (s^-5 w^-3/2 - q(s)) * (s - 2m)^(1/2) with the subtraction done
        # algebraically: (1-w)^3 - 1 = -w (3 - 3w + w^2)
        w = 1.0 - 2.0 * m / s
        return -c / s ** 2 * (3.0 - 3.0 * w + w * w) * math.sqrt(s)

    val, err, *info = integrate.quad(smooth, 2.0 * m, r, weight="alg", wvar=(-0.5, 0.0),
                                      epsabs=1e-15, epsrel=1e-13, limit=400, full_output=1)
    if len(info) > 1 and info[0]["last"] >= 400 or err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature did not converge at r={r} (error estimate {err:g})")
    return val


def tau_asymptote(alpha, m, r_start=None):
    """Plateau estimate tau_o = tau(10^4 m), confirmed by doubling r."""
    r1 = 1e4 * m if r_start is None else r_start
    t1 = tau_closed_form(alpha, m, r1)
    t2 = tau_closed_form(alpha, m, 2 * r1)
    return t2, abs(t2 - t1)


def _ode_coefficients(m, r0, order):
    """Taylor coefficients at r0 of A, B, C in A tau' - B tau = C."""
    r = jets.seed(0, r0, 1, order)
    A = 2.0 / r - 4.0 * m / (r * r)
    B = 2.0 * m / (r * r * r)
    C = 1.0 / (r * r * r * r * r * r)
    return A.data, B.data, C.data


def tau_taylor(alpha, m, r0, tau0, order=4):
    """Normalized Taylor coefficients of tau at r0 > 2m, given tau(r0).

    Obtained from (*) by matching powers of (r - r0).
    """
    A, B, C = _ode_coefficients(m, r0, order)
    C = alpha * m * m * C
    t = [float(tau0)]
    for k in range(order):
        rhs = sum(B[j] * t[k - j] for j in range(k + 1)) + C[k]
        rhs -= sum(A[j] * (k - j + 1) * t[k - j + 1] for j in range(1, k + 1))
        t.append(rhs / (A[0] * (k + 1)))
    return np.array(t)


def tau_derivatives(alpha, m, r, tau=None):
    """(tau, dtau/dr, d2tau/dr2) at r, using the closed form for tau."""
    if tau is None:
        tau = tau_closed_form(alpha, m, r)
    t = tau_taylor(alpha, m, r, tau, 2)
    return t[0], t[1], 2.0 * t[2]


class TauField(ex.Field):
    """``tau`` as an expression field (depends on the first coordinate)."""

    def __init__(self, alpha, m):
        self.alpha = float(alpha)
        self.m = float(m)

    def jet(self, coords):
        r = coords[0]
        r0 = float(r.value())
        taylor = tau_taylor(self.alpha, self.m, r0, tau_closed_form(self.alpha, self.m, r0), r.order)
        return r.compose(taylor)

    def evaluate(self, coords):
        r = np.asarray(coords[0], dtype=float)
        f = np.vectorize(lambda v: tau_closed_form(self.alpha, self.m, v))
        out = f(r)
        return float(out) if out.ndim == 0 else out


def horizon_series(alpha, m, terms=2):
    """Coefficients c_n of tau = sum c_n (r - 2m)^n, regular at r = 2m.

    (*) times r^6 reads 2 rho r^4 tau' - 2m r^3 tau = alpha m^2 with
    rho = r - 2m; powers of rho are matched term by term.
    """
    rm = 2.0 * m
    r4 = np.polynomial.polynomial.polypow([rm, 1.0], 4)
    r3 = np.polynomial.polynomial.polypow([rm, 1.0], 3)
    P = np.zeros(terms + 5)
    P[1:6] = 2.0 * r4          # coefficient polynomial of tau'
    Q = np.zeros(terms + 5)
    Q[:4] = 2.0 * m * r3        # coefficient polynomial of tau
    c = []
    for n in range(terms):
        # coefficient of rho^n:  sum_j P_j (n-j+1) c_{n-j+1} - sum_j Q_j c_{n-j}
        known = sum(P[j] * (n - j + 1) * c[n - j + 1] for j in range(2, n + 2) if n - j + 1 < len(c))
        known -= sum(Q[j] * c[n - j] for j in range(1, n + 1))
        rhs = (alpha * m * m if n == 0 else 0.0) - known
        # unknown c_n enters through P_1 * n * c_n - Q_0 * c_n
        c.append(rhs / (P[1] * n - Q[0]))
    return np.array(c)


@dataclass
class TauSolution:
    alpha: float
    m: float
    r: np.ndarray
    tau: np.ndarray
    taudot: np.ndarray
    tauddot: np.ndarray
    provenance: str
    tau_o: float = float("nan")

    @property
    def residual_first_order(self):
        """(2/r)(1 - 2m/r) tau' - 2m tau r^-3 - alpha m^2 r^-6."""
        r, m = self.r, self.m
        return (2 / r) * (1 - 2 * m / r) * self.taudot - 2 * m * self.tau / r ** 3 \
            - self.alpha * m * m / r ** 6

    @property
    def residual_second_order(self):
        """Tangential equation in arc length t, rewritten in r:
        tau_tt + (H/2) tau_t + m tau r^-3 + 2 alpha m^2 r^-6 with
        tau_t = F tau', tau_tt = F^2 tau'' + (m/r^2) tau', H = 2F/r."""
        r, m = self.r, self.m
        F2 = 1 - 2 * m / r
        return (F2 * self.tauddot + (m / r ** 2) * self.taudot + (F2 / r) * self.taudot
                + m * self.tau / r ** 3 + 2 * self.alpha * m * m / r ** 6)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "tau", "taudot", "residual_first_order", "residual_second_order"])
        for row in zip(self.r, self.tau, self.taudot, self.residual_first_order, self.residual_second_order):
            w.writerow([fmt(v) for v in row])
        return buf.getvalue()


def _fd_derivatives(fun, r, h):
    """Richardson central differences for first and second derivatives."""
    def d1(hh):
        return (fun(r + hh) - fun(r - hh)) / (2 * hh)

    def d2(hh):
        return (fun(r + hh) - 2 * fun(r) + fun(r - hh)) / (hh * hh)
    return (4 * d1(h) - d1(2 * h)) / 3, (4 * d2(h) - d2(2 * h)) / 3


def tau_closed_solution(alpha, m, rs):
    rs = np.asarray(rs, dtype=float)
    f = lambda v: tau_closed_form(alpha, m, v)
    tau = np.array([f(v) for v in rs])
    dd = [_fd_derivatives(f, v, 1e-3 * (v - 2 * m)) for v in rs]
    tau_o, _ = tau_asymptote(alpha, m)
    return TauSolution(alpha, m, rs, tau, np.array([d[0] for d in dd]),
                       np.array([d[1] for d in dd]), "closed-form", tau_o)


def tau_ode(alpha, m, r_range, steps=200, delta=1e-6, series_terms=2, rtol=1e-12):
    """Integrate (*) outward from r0 = 2m(1 + delta).

    The start value comes from the horizon series; the march uses DOP853.
    Returns samples on ``steps`` equally spaced radii spanning ``r_range``.
    """
    if not 1e-6 <= delta <= 1e-2:
        raise ParameterError("delta must lie in [1e-6, 1e-2]")
    r_lo, r_hi = map(float, r_range)
    r0 = 2 * m * (1 + delta)
    if r_lo < r0:
        raise ParameterError(f"range must start at or beyond r0 = {r0}")
    c = horizon_series(alpha, m, series_terms)
    tau0 = np.polynomial.polynomial.polyval(r0 - 2 * m, c)

    def rhs(r, y):
        return [(alpha * m * m / r ** 6 + 2 * m * y[0] / r ** 3) / ((2 / r) * (1 - 2 * m / r))]

    sol = integrate.solve_ivp(rhs, (r0, r_hi * 1.001), [tau0], method="DOP853",
                              rtol=rtol, atol=1e-15, dense_output=True)
    if sol.status != 0:
        raise StepSizeUnderflow(f"ODE march failed near r = 2m: {sol.message}")
    rs = np.linspace(r_lo, r_hi, steps)
    fun = lambda v: float(sol.sol(v)[0])
    tau = np.array([fun(v) for v in rs])
    dd = [_fd_derivatives(fun, v, 1e-3 * min(v - r0, 1.0) if v - r0 < 1e-2 else 1e-3 * v)
          for v in rs]
    return TauSolution(alpha, m, rs, tau, np.array([d[0] for d in dd]),
                       np.array([d[1] for d in dd]), "ode", tau[-1])


# ---------------------------------------------------------------------------
# named metrics
# ---------------------------------------------------------------------------

@dataclass
class NamedMetric:
    chart: MetricChart
    fields: dict = field(default_factory=dict)
    potentials: dict = field(default_factory=dict)


def _positive_const_check(name, e):
    e = ex.as_expr(e)
    if ex.is_constant(e):
        v = ex.evaluate(e, [0.0, 0.0, 0.0])
        if not v > 0:
            raise ParameterError(f"warping function {name} must be positive, got {v}")
    return e


def build_named_metric(name, **p) -> NamedMetric:
    """Construct a chart for a named family.

    ``flat-torus``; ``schwarzschild`` (m, optional alpha, c); ``kasner`` (a);
    ``warped`` (f1, f2): dx1^2 + f1^2 dx2^2 + f2^2 dx3^2; ``diagonal``
    (exprs); ``s1-invariant`` (gV: 2x2 expressions in x1, x2, f):
    gV + f^2 dx3^2.
    """
    if name == "flat-torus":
        chart = MetricChart.diagonal(["1", "1", "1"], domain=((0, 2 * np.pi),) * 3,
                                     periodic=(True,) * 3, name="flat-torus")
        return NamedMetric(chart, potentials={"vacuum": PotentialSpec("1")})
    if name == "schwarzschild":
        m = float(p.get("m", 0.5))
        spec = SchwarzschildSpec(m)
        alpha = float(p.get("alpha", 1.0))
        c = float(p.get("c", 0.0))
        fields = {"u": ex.ExprField(HORIZON_POTENTIAL, {"m": m}), "tau": TauField(alpha, m)}
        pots = {
            "vacuum": PotentialSpec("u", 0.0, fields),
            "R2s": PotentialSpec(f"tau + {ex.to_source(ex.const(c))} * u", alpha, fields),
        }
        return NamedMetric(spec.chart(), fields, pots)
    if name == "kasner":
        ks = KasnerSpec(float(p.get("a", 1.0)))
        return NamedMetric(ks.chart(), potentials={"vacuum": PotentialSpec(ks.potential(p.get("c", 1.0)))})
    if name == "warped":
        f1 = _positive_const_check("f1", p.get("f1", "1"))
        f2 = _positive_const_check("f2", p.get("f2", "1"))
        chart = MetricChart.diagonal(["1", ex.BinOp((1, 1), "^", f1, ex.const(2)),
                                      ex.BinOp((1, 1), "^", f2, ex.const(2))], name="warped")
        return NamedMetric(chart, potentials={"vacuum": PotentialSpec("1")})
    if name == "diagonal":
        exprs = p["exprs"]
        return NamedMetric(MetricChart.diagonal(list(exprs), params=p.get("params", {}),
                                                name="diagonal"))
    if name == "s1-invariant":
        gV = p["gV"]
        f = _positive_const_check("f", p["f"])
        comps = {(i, j): gV[i][j] for i in range(2) for j in range(2)}
        comps[(2, 2)] = ex.BinOp((1, 1), "^", f, ex.const(2))
        comps[(0, 2)] = comps[(1, 2)] = 0.0
        return NamedMetric(MetricChart.from_dict(comps, dim=3, name="s1-invariant"))
    raise ParameterError(f"unknown metric family {name!r}")
