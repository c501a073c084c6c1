"""Pointwise Riemannian calculus on coordinate charts (dimension 2 or 3).

Conventions used everywhere in the package:

* ``R^a_{bcd} = d_c G^a_{db} - d_d G^a_{cb} + G^a_{ce} G^e_{db} - G^a_{de} G^e_{cb}``
  and ``R_{abcd} = g_{ae} R^e_{bcd}``; Ricci ``r_{bd} = R^a_{bad}``, so round
  spheres have positive scalar curvature (unit 2-sphere: s = 2).
* ``Delta = tr_g D^2`` (non-negative on convex functions).
* ``D*D T = -g^{kl} nabla_k nabla_l T`` (positive rough Laplacian).
* ``(delta T)_j = -g^{ik} nabla_i T_{kj}``.
* ``(Rc o h)_{ij} = R_{ikjl} h^{kl}`` so that ``tr_g (Rc o h) = <r, h>``.

The heavy lifting is done on field arrays (jets at a point, or grid samples
via :mod:`curvlab.grid_torus`); :class:`CurvaturePack` holds plain values.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import expr as ex
from . import jets
from .fields import FieldArray, contract

DEPTHS = {"second-order": 2, "third-order": 3, "fourth-order": 4}


class NotPositiveDefinite(ValueError):
    """The metric failed the principal-minor SPD test."""


class DomainViolation(ValueError):
    """A point lies outside the chart domain."""


def check_spd(g, rtol=1e-12, where=None):
    """Leading principal minors test; raises :class:`NotPositiveDefinite`."""
    g = np.asarray(g, dtype=float)
    minors = np.array([np.linalg.det(g[:k, :k]) for k in range(1, g.shape[0] + 1)])
    scale = np.max(np.abs(minors))
    if not np.all(np.isfinite(minors)) or np.any(minors <= rtol * scale) or scale == 0:
        loc = "" if where is None else f" at {where}"
        raise NotPositiveDefinite(f"metric not positive definite{loc}: minors {minors}")


def _depth(depth):
    if isinstance(depth, str):
        return DEPTHS[depth]
    return int(depth)


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricChart:
    """A metric given by component expressions on a coordinate box."""

    dim: int
    components: tuple
    params: dict = field(default_factory=dict)
    domain: Optional[tuple] = None
    periodic: Optional[tuple] = None
    name: str = "chart"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("charts must have dimension 2 or 3")
        comps = tuple(tuple(ex.as_expr(c, self.params) for c in row) for row in self.components)
        if len(comps) != self.dim or any(len(row) != self.dim for row in comps):
            raise ValueError("component matrix shape does not match dimension")
        for i in range(self.dim):
            for j in range(i):
                if comps[i][j] != comps[j][i] and ex.to_source(comps[i][j]) != ex.to_source(comps[j][i]):
                    raise ValueError(f"metric components g{i+1}{j+1} and g{j+1}{i+1} differ")
        object.__setattr__(self, "components", comps)
        if self.domain is None:
            object.__setattr__(self, "domain", tuple((-np.inf, np.inf) for _ in range(self.dim)))
        if self.periodic is None:
            object.__setattr__(self, "periodic", (False,) * self.dim)

    @classmethod
    def from_dict(cls, comps, dim=3, **kw):
        """``comps`` maps (i, j) index pairs (0-based) to expressions; missing
        diagonal entries default to 1, missing off-diagonal ones to 0."""
        params = kw.get("params", {})
        rows = []
        for i in range(dim):
            row = []
            for j in range(dim):
                e = comps.get((i, j), comps.get((j, i), 1.0 if i == j else 0.0))
                row.append(ex.const(e) if isinstance(e, (int, float)) else ex.as_expr(e, params))
            rows.append(row)
        return cls(dim, tuple(map(tuple, rows)), **kw)

    @classmethod
    def diagonal(cls, entries, **kw):
        return cls.from_dict({(i, i): e for i, e in enumerate(entries)}, dim=len(entries), **kw)

    def with_params(self, **params):
        return replace(self, params={**self.params, **params})

    def scaled(self, factor):
        """The chart of ``factor * g`` (composed at the expression level)."""
        f = ex.as_expr(factor, self.params)
        comps = tuple(tuple(c if ex.is_zero(c) else ex.mul(f, c) for c in row)
                      for row in self.components)
        return replace(self, components=comps, name=f"({self.name})*phi")

    def check_point(self, x):
        if len(x) != self.dim:
            raise DomainViolation(f"point {x} has wrong dimension for a {self.dim}-chart")
        for k, (v, (lo, hi)) in enumerate(zip(x, self.domain)):
            if not (lo < v < hi):
                raise DomainViolation(f"coordinate x{k+1}={v} outside ({lo}, {hi})")

    def metric_jet(self, x, order=jets.MAX_ORDER, check=True):
        """Jet of the metric matrix at ``x``."""
        if check:
            self.check_point(x)
        coords = jets.seed_point(x, order)
        cache = {}
        rows = []
        for i in range(self.dim):
            row = []
            for j in range(self.dim):
                key = (min(i, j), max(i, j))
                if key not in cache:
                    cache[key] = ex.eval_jet_coords(self.components[key[0]][key[1]], coords, self.params)
                row.append(cache[key])
            rows.append(jets.stack(row))
        g = jets.stack(rows)
        check_spd(g.value(), where=tuple(x))
        return g

    def metric_value(self, x):
        return np.array([[ex.evaluate(c, list(x), self.params) for c in row]
                         for row in self.components], dtype=float)

    def scalar_jet(self, f, x, order=2, extra_params=None):
        """Jet of a scalar expression with this chart's parameter bindings."""
        params = {**self.params, **(extra_params or {})}
        return ex.eval_jet(ex.as_expr(f, params), list(x), params, order)


# ---------------------------------------------------------------------------
# field-level calculus
# ---------------------------------------------------------------------------

_SLOTS = "ijklnopq"


class Geometry:
    """Curvature fields of a metric field array ``g`` (shape (n, n)).

    With jets the usable derivative depth is the jet order of ``g``; fields
    are computed lazily and cached.
    """

    def __init__(self, g: FieldArray, depth=4):
        self.g = g
        self.n = g.shape[0]
        self.depth = _depth(depth)
        self._cache = {}

    @classmethod
    def at(cls, chart: MetricChart, x, depth=4):
        d = _depth(depth)
        return cls(chart.metric_jet(x, order=d), d)

    def _get(self, name, fn):
        if name not in self._cache:
            self._cache[name] = fn()
        return self._cache[name]

    @property
    def ginv(self):
        return self._get("ginv", lambda: _matinv(self.g))

    @property
    def christoffel(self):
        """``G^k_{ij}``, array index order (k, i, j)."""
        def build():
            dg = self.g.grad()  # dg[k, i, j] = d_k g_ij
            first = (dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg) * 0.5
            return contract("kl,lij->kij", self.ginv, first)
        return self._get("christoffel", build)

    @property
    def riemann_up(self):
        """``R^a_{bcd}``."""
        def build():
            G = self.christoffel
            dG = G.grad()  # dG[c, a, i, j] = d_c G^a_ij
            A = dG.transpose(1, 3, 0, 2) + contract("ace,edb->abcd", G, G)
            return A - A.transpose(0, 1, 3, 2)
        return self._get("riemann_up", build)

    @property
    def riemann(self):
        return self._get("riemann", lambda: contract("ae,ebcd->abcd", self.g, self.riemann_up))

    @property
    def ricci(self):
        eye = np.eye(self.n)
        return self._get("ricci", lambda: contract("abcd,ac->bd", self.riemann_up, eye))

    @property
    def scalar(self):
        return self._get("scalar", lambda: contract("ij,ij->", self.ginv, self.ricci))

    def cov(self, T):
        """Covariant derivative of a covariant tensor field; new axis first."""
        G = self.christoffel
        rank = T.ndim
        letters = _SLOTS[:rank]
        out = T.grad()
        for s in range(rank):
            t_sub = letters[:s] + "m" + letters[s + 1:]
            out = out - contract(f"ma{letters[s]},{t_sub}->a{letters}", G, T)
        return out

    def hessian(self, f):
        """Covariant Hessian ``D^2 f`` of a scalar field."""
        return self.cov(f.grad())

    def laplacian(self, f):
        """``Delta f`` via the contracted Christoffel symbol (independent of
        :meth:`hessian`): ``g^{ij} d_i d_j f - g^{ij} G^k_{ij} d_k f``."""
        df = f.grad()
        ddf = df.grad()
        gam = contract("ij,kij->k", self.ginv, self.christoffel)
        return contract("ij,ij->", self.ginv, ddf) - contract("k,k->", gam, df)

    @property
    def grad_ricci(self):
        return self._get("grad_ricci", lambda: self.cov(self.ricci))

    @property
    def hess_ricci(self):
        return self._get("hess_ricci", lambda: self.cov(self.grad_ricci))

    @property
    def grad_scalar(self):
        return self._get("grad_scalar", lambda: self.scalar.grad())

    @property
    def hess_scalar(self):
        return self._get("hess_scalar", lambda: self.cov(self.grad_scalar))

    def rough_laplacian(self, T):
        """``D*D T = -g^{kl} nabla_k nabla_l T`` for a covariant field ``T``."""
        hh = self.cov(self.cov(T))
        rest = _SLOTS[: T.ndim]
        return -contract(f"kl,kl{rest}->{rest}", self.ginv, hh)

    def pack(self, depth=None) -> "CurvaturePack":
        depth = self.depth if depth is None else _depth(depth)
        v = lambda a: a.value() if isinstance(a, FieldArray) else np.asarray(a)
        kw = dict(
            dim=self.n, depth=depth,
            g=v(self.g), ginv=v(self.ginv), christoffel=v(self.christoffel),
            riemann=v(self.riemann), ricci=v(self.ricci), scalar=v(self.scalar),
        )
        if depth >= 3:
            kw.update(grad_ricci=v(self.grad_ricci), grad_scalar=v(self.grad_scalar))
        if depth >= 4:
            kw.update(hess_ricci=v(self.hess_ricci), hess_scalar=v(self.hess_scalar))
        return CurvaturePack(**kw)


def _matinv(g):
    if isinstance(g, jets.JetArray):
        return jets.matinv(g)
    return g.matinv()


# ---------------------------------------------------------------------------
# value-level pack
# ---------------------------------------------------------------------------

@dataclass
class CurvaturePack:
    """Curvature data at a point (or, with trailing grid axes, on a grid).

    Index layout: ``christoffel[k, i, j] = G^k_ij``, ``grad_ricci[k, i, j] =
    nabla_k r_ij``, ``hess_ricci[l, k, i, j] = nabla_l nabla_k r_ij``.
    """

    dim: int
    depth: int
    g: np.ndarray
    ginv: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    grad_ricci: Optional[np.ndarray] = None
    grad_scalar: Optional[np.ndarray] = None
    hess_ricci: Optional[np.ndarray] = None
    hess_scalar: Optional[np.ndarray] = None

    def _need(self, depth, what):
        if self.depth < depth:
            raise ValueError(f"{what} needs derivative depth {depth}, pack has {self.depth}")

    @property
    def traceless(self):
        return self.ricci - np.einsum("...,ij...->ij...", self.scalar / self.dim, self.g)

    @property
    def ricci_norm2(self):
        return norm2(self, self.ricci)

    @property
    def traceless_norm2(self):
        return norm2(self, self.traceless)

    @property
    def grad_scalar_norm2(self):
        self._need(3, "|ds|^2")
        return np.einsum("ij...,i...,j...->...", self.ginv, self.grad_scalar, self.grad_scalar)

    @property
    def lap_scalar(self):
        self._need(4, "Delta s")
        return trace(self, self.hess_scalar)

    @property
    def rough_lap_ricci(self):
        self._need(4, "D*D r")
        return -np.einsum("kl...,klij...->ij...", self.ginv, self.hess_ricci)

    @property
    def grad_traceless(self):
        self._need(3, "nabla z")
        return self.grad_ricci - np.einsum("k...,ij...->kij...", self.grad_scalar / self.dim, self.g)

    @property
    def rough_lap_traceless(self):
        self._need(4, "D*D z")
        return self.rough_lap_ricci + np.einsum("...,ij...->ij...", self.lap_scalar / self.dim, self.g)


# -- algebra on packs ------------------------------------------------------------

def raise_both(pack, T):
    return np.einsum("ia...,jb...,ab...->ij...", pack.ginv, pack.ginv, T)


def inner(pack, A, B):
    """``<A, B>_g = A_ij B_kl g^ik g^jl``."""
    return np.einsum("ij...,ij...->...", raise_both(pack, A), B)


def norm2(pack, A):
    return inner(pack, A, A)


def trace(pack, A):
    return np.einsum("ij...,ij...->...", pack.ginv, A)


def compose(pack, A, B):
    """Endomorphism composition ``(A o B)_ij = A_ik g^kl B_lj``."""
    return np.einsum("ik...,kl...,lj...->ij...", A, pack.ginv, B)


def curvature_action(pack, h):
    """``(Rc o h)_ij = R_ikjl h^{kl}``; satisfies ``tr(Rc o h) = <r, h>``."""
    return np.einsum("ikjl...,kl...->ij...", pack.riemann, raise_both(pack, h))


def times_metric(pack, f):
    return np.einsum("...,ij...->ij...", np.asarray(f), pack.g)


def frame_components(pack, T):
    """Diagonal components in an orthonormal frame adapted to a diagonal
    chart: ``T_ii / g_ii``."""
    return np.array([T[i, i] / pack.g[i, i] for i in range(pack.dim)])


def endomorphism_eigenvalues(g, T):
    """Eigenvalues of ``g^{-1} T`` for symmetric T at a single point."""
    L = np.linalg.cholesky(np.asarray(g, float))
    Li = np.linalg.inv(L)
    return np.linalg.eigvalsh(Li @ np.asarray(T, float) @ Li.T)


def endomorphism_norm(g, T):
    """Frame-invariant max-norm: largest |eigenvalue| of ``g^{-1} T``."""
    return float(np.max(np.abs(endomorphism_eigenvalues(g, T))))


# ---------------------------------------------------------------------------
# chart-level operations
# ---------------------------------------------------------------------------

def curvature(chart: MetricChart, x, depth="second-order") -> CurvaturePack:
    """All curvature data at ``x`` to the requested derivative depth."""
    return Geometry.at(chart, x, depth).pack()


def hessian_laplacian(chart: MetricChart, f, x, extra_params=None):
    """``(D^2 f, Delta f)`` at ``x``; ``Delta f = tr_g D^2 f``."""
    geo = Geometry.at(chart, x, 2)
    fj = chart.scalar_jet(f, x, 2, extra_params)
    hess = geo.hessian(fj).value()
    return hess, float(np.einsum("ij,ij->", geo.ginv.value(), hess))


def _tensor_field(geo, chart, T, x, order):
    if isinstance(T, str):
        if T == "metric":
            return geo.g
        if T == "ricci":
            return geo.ricci
        if T == "traceless":
            return geo.ricci - geo.g * (geo.scalar * (1.0 / geo.n))
        raise ValueError(f"unknown internal tensor field {T!r}")
    coords = jets.seed_point(x, order)
    rows = [jets.stack([ex.eval_jet_coords(ex.as_expr(c, chart.params), coords, chart.params)
                        for c in row]) for row in T]
    return jets.stack(rows)


def rough_laplacian_sym2(chart: MetricChart, T, x):
    """``D*D T`` at ``x``; ``T`` is 'ricci', 'traceless', 'metric' or a
    matrix of component expressions."""
    geo = Geometry.at(chart, x, 4)
    return geo.rough_laplacian(_tensor_field(geo, chart, T, x, 4)).value()


def divergence_sym2(chart: MetricChart, T, x):
    """``(delta T)_j = -g^{ik} nabla_i T_kj``."""
    geo = Geometry.at(chart, x, 3)
    field_ = _tensor_field(geo, chart, T, x, 3)
    dT = geo.cov(field_).value()
    return -np.einsum("ik,ikj->j", geo.ginv.value(), dT)


def cotton_closedness(chart: MetricChart, x):
    """``C_ijk = nabla_k S_ij - nabla_j S_ik`` for ``S = r - (s/4) g``."""
    pack = curvature(chart, x, "third-order")
    return cotton_from_pack(pack)


def cotton_from_pack(pack):
    dS = pack.grad_ricci - 0.25 * np.einsum("k...,ij...->kij...", pack.grad_scalar, pack.g)
    # dS[k, i, j] = nabla_k S_ij
    return np.einsum("kij...->ijk...", dS) - np.einsum("jik...->ijk...", dS)


def scalar_gradient(chart: MetricChart, x):
    """``ds`` at ``x`` from a separate scalar pipeline (jet of s only)."""
    geo = Geometry.at(chart, x, 3)
    return geo.scalar.grad().value()
