"""Periodic 3-torus discretization with Fourier collocation derivatives.

Used to evaluate the quadratic functionals globally, to check the
Euler-Lagrange tensors as L2 gradients through finite-difference first
variations, and to run a short explicit gradient flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import expr as ex
from .fields import FieldArray
from .tensor_geometry import Geometry, NotPositiveDefinite, inner

TWO_PI = 2.0 * np.pi


class AliasingError(ValueError):
    """Sampled field carries energy in the top third of resolved modes."""


class FlowGuard(RuntimeError):
    """A flow step lost positive definiteness or increased the functional."""

    def __init__(self, message, step=None, point=None):
        self.step = step
        self.point = point
        super().__init__(message)


@lru_cache(maxsize=None)
def wavenumbers(N):
    k = np.fft.fftfreq(N, d=1.0 / N)
    return k


@lru_cache(maxsize=None)
def _deriv_multipliers(N):
    k = wavenumbers(N).astype(complex)
    ik = 1j * k
    # odd derivatives of the Nyquist mode are not representable
    ik[N // 2] = 0.0
    shape = [(N, 1, 1), (1, N, 1), (1, 1, N)]
    return [ik.reshape(s) for s in shape]


def spectral_derivative(a, axis):
    """d/dx_axis of samples ``a`` (last three axes are the grid)."""
    N = a.shape[-1]
    ah = np.fft.fftn(a, axes=(-3, -2, -1))
    return np.fft.ifftn(ah * _deriv_multipliers(N)[axis], axes=(-3, -2, -1)).real


class GridArray(FieldArray):
    """Tensor of scalar fields sampled on an N^3 periodic grid."""

    nfield = 3

    def _like(self, data):
        return GridArray(data)

    def _const_data(self, c):
        return c.reshape(c.shape + (1, 1, 1))

    def _align(self, other):
        if not isinstance(other, GridArray):
            raise TypeError(f"cannot combine GridArray with {type(other)}")
        return self.data, other.data

    def _mul_data(self, a, b):
        return a * b

    def contract(self, subscripts, other):
        lhs, out = subscripts.split("->")
        sa, sb = lhs.split(",")
        if isinstance(other, GridArray):
            return GridArray(np.einsum(f"{sa}...,{sb}...->{out}...", self.data, other.data))
        return GridArray(np.einsum(f"{sa}...,{sb}->{out}...", self.data, other))

    def grad(self):
        N = self.data.shape[-1]
        ah = np.fft.fftn(self.data, axes=(-3, -2, -1))
        mult = _deriv_multipliers(N)
        return GridArray(np.stack(
            [np.fft.ifftn(ah * mult[k], axes=(-3, -2, -1)).real for k in range(3)]))

    def value(self):
        return self.data.copy()

    def matinv(self):
        a = np.moveaxis(self.data, (0, 1), (-2, -1))
        return GridArray(np.moveaxis(np.linalg.inv(a), (-2, -1), (0, 1)))

    def reciprocal(self):
        return GridArray(1.0 / self.data)


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

@dataclass
class TorusField:
    """Metric samples ``g[i, j, a, b, c]`` on the grid ``(2 pi / N) * (a, b, c)``."""

    N: int
    g: np.ndarray
    h: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.g.shape != (3, 3, self.N, self.N, self.N):
            raise ValueError("metric samples must have shape (3, 3, N, N, N)")

    @property
    def cell_volume(self):
        return (TWO_PI / self.N) ** 3

    def metric(self):
        return GridArray(self.g)

    def check_spd(self):
        """Raise :class:`NotPositiveDefinite` naming the first failing point."""
        a = np.moveaxis(self.g, (0, 1), (-2, -1))
        minors = [a[..., 0, 0], np.linalg.det(a[..., :2, :2]), np.linalg.det(a)]
        for m in minors:
            bad = np.argwhere(~(m > 0))
            if len(bad):
                idx = tuple(int(v) for v in bad[0])
                raise NotPositiveDefinite(f"metric not positive definite at grid point {idx}")

    def with_metric(self, g):
        return TorusField(self.N, g, self.h, dict(self.meta))

    def shifted(self, shift):
        return self.with_metric(np.roll(self.g, shift, axis=(-3, -2, -1)))


def grid_coordinates(N):
    x = TWO_PI * np.arange(N) / N
    return np.meshgrid(x, x, x, indexing="ij")


def aliasing_fraction(a):
    """Fraction of spectral energy of ``a`` in modes with |k|_inf > N/3."""
    N = a.shape[-1]
    ah = np.fft.fftn(a, axes=(-3, -2, -1))
    k = np.abs(wavenumbers(N))
    kmax = np.maximum.outer(np.maximum.outer(k, k), k)
    energy = np.abs(ah) ** 2
    total = energy.sum()
    if total == 0:
        return 0.0
    return float(energy[..., kmax > N / 3].sum() / total)


def _check_aliasing(a, tol=1e-10):
    frac = aliasing_fraction(a)
    if frac > tol:
        raise AliasingError(f"spectral energy fraction {frac:.3e} in the top third of modes")


def _check_N(N):
    if N < 8 or N % 2:
        raise ValueError("grid size N must be even and at least 8")


def sample(source, N, params=None) -> TorusField:
    """Sample a metric on the torus grid.

    ``source`` is a 3x3 nested sequence of expressions (strings or ASTs), or
    a :class:`~curvlab.tensor_geometry.MetricChart`.
    """
    _check_N(N)
    if hasattr(source, "components"):
        params = {**source.params, **(params or {})}
        source = source.components
    X = grid_coordinates(N)
    g = np.empty((3, 3, N, N, N))
    for i in range(3):
        for j in range(3):
            g[i, j] = np.broadcast_to(ex.evaluate(ex.as_expr(source[i][j], params or {}), X, params), (N, N, N))
    g = 0.5 * (g + g.transpose(1, 0, 2, 3, 4))
    _check_aliasing(g)
    f = TorusField(N, g)
    f.check_spd()
    return f


def band_limited_tensor(N, seed, amplitude=0.2, modes=3):
    """Smooth random symmetric tensor field with Fourier modes <= ``modes``.

    The pointwise max-norm of every component is scaled to ``amplitude``.
    """
    rng = np.random.default_rng(seed)
    X = grid_coordinates(N)
    out = np.zeros((3, 3, N, N, N))
    ks = [k for k in np.ndindex(2 * modes + 1, 2 * modes + 1, 2 * modes + 1)]
    for i in range(3):
        for j in range(i, 3):
            comp = np.zeros((N, N, N))
            for kk in ks:
                k = np.array(kk) - modes
                if not k.any():
                    continue
                phase = k[0] * X[0] + k[1] * X[1] + k[2] * X[2]
                a, b = rng.normal(size=2) / (1.0 + (k ** 2).sum())
                comp += a * np.cos(phase) + b * np.sin(phase)
            comp *= amplitude / np.max(np.abs(comp))
            out[i, j] = comp
            out[j, i] = comp
    return out


def random_field(N, seed, amplitude=0.2, modes=3) -> TorusField:
    """Band-limited seeded perturbation of the flat metric."""
    _check_N(N)
    # off-diagonal parts are damped so the sum stays well inside the SPD cone
    pert = band_limited_tensor(N, seed, amplitude, modes)
    pert[~np.eye(3, dtype=bool)] *= 0.5
    g = np.eye(3)[:, :, None, None, None] + pert
    _check_aliasing(g)
    f = TorusField(N, g, meta={"seed": seed, "amplitude": amplitude})
    f.check_spd()
    return f


def flat_field(N) -> TorusField:
    _check_N(N)
    return TorusField(N, np.broadcast_to(np.eye(3)[:, :, None, None, None], (3, 3, N, N, N)).copy())


# ---------------------------------------------------------------------------
# functionals and gradients
# ---------------------------------------------------------------------------

def integrate(field_: TorusField, density):
    """Trapezoid (spectrally exact) quadrature of ``density * dV_g``."""
    a = np.moveaxis(field_.g, (0, 1), (-2, -1))
    dv = np.sqrt(np.linalg.det(a))
    return float(np.sum(np.asarray(density) * dv, dtype=np.float64) * field_.cell_volume)


def curvature_pack(field_: TorusField, depth=2):
    field_.check_spd()
    return Geometry(field_.metric(), depth).pack(depth)


def functional_and_gradient(F, field_: TorusField):
    """Value and L2 gradient tensor of R2 = int |r|^2 or Z2 = int |z|^2."""
    from . import functionals as fn
    pack = curvature_pack(field_, 4)
    if F == "R2":
        density, grad = pack.ricci_norm2, fn.grad_r2_from_pack(pack)
    elif F == "Z2":
        density, grad = pack.traceless_norm2, fn.grad_z2_from_pack(pack)
    else:
        raise ValueError(f"unknown functional {F!r}")
    return integrate(field_, density), grad


def functional_value(F, field_: TorusField):
    pack = curvature_pack(field_, 2)
    if F == "R2":
        return integrate(field_, pack.ricci_norm2)
    if F == "Z2":
        return integrate(field_, pack.traceless_norm2)
    raise ValueError(f"unknown functional {F!r}")


def l2_pairing(field_: TorusField, A, B):
    """``int <A, B>_g dV_g``."""
    pack = curvature_pack(field_, 2)
    return integrate(field_, inner(pack, A, B))


@dataclass
class GradientCheck:
    functional: str
    fd: np.ndarray
    pairing: np.ndarray

    @property
    def kappa(self):
        return self.fd / self.pairing

    @property
    def kappa_mean(self):
        return float(np.mean(self.kappa))

    @property
    def kappa_spread(self):
        """std / mean of the ratio across perturbations."""
        return float(np.std(self.kappa) / abs(np.mean(self.kappa)))


def first_variation(F, field_: TorusField, h, t=1e-3):
    """Richardson-extrapolated central difference of ``F(g + t h)`` at 0."""
    def D(step):
        fp = functional_value(F, field_.with_metric(field_.g + step * h))
        fm = functional_value(F, field_.with_metric(field_.g - step * h))
        return (fp - fm) / (2 * step)
    return (4 * D(t) - D(2 * t)) / 3


def gradient_check(F, field_: TorusField, perturbations, t=1e-3) -> GradientCheck:
    _, grad = functional_and_gradient(F, field_)
    fd, pair = [], []
    for h in perturbations:
        fd.append(first_variation(F, field_, h, t))
        pair.append(l2_pairing(field_, grad, h))
    return GradientCheck(F, np.array(fd), np.array(pair))


def perturbations(N, seed, count=5, amplitude=0.1):
    return [band_limited_tensor(N, seed * 1000 + 17 + k, amplitude) for k in range(count)]


def flow_step(field_: TorusField, F="R2", dt=1e-5, step=None, grad=None):
    """One explicit Euler step ``g <- g - dt * gradient``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if grad is None:
        _, grad = functional_and_gradient(F, field_)
    new = field_.with_metric(field_.g - dt * grad)
    try:
        new.check_spd()
    except NotPositiveDefinite as err:
        raise FlowGuard(f"positive definiteness lost at step {step}: {err}", step=step) from err
    return new


def flow(field_: TorusField, F="R2", dt=1e-5, steps=10):
    """Run ``steps`` Euler steps; returns (values, max |gradient| per step).

    Raises :class:`FlowGuard` if positive definiteness is lost or the
    functional fails to decrease.
    """
    values = [functional_value(F, field_)]
    maxres = []
    cur = field_
    for k in range(steps):
        _, grad = functional_and_gradient(F, cur)
        maxres.append(float(np.max(np.abs(grad))))
        cur = flow_step(cur, F, dt, step=k + 1, grad=grad)
        values.append(functional_value(F, cur))
        if not values[-1] < values[-2]:
            raise FlowGuard(f"{F} increased at step {k + 1}: {values[-2]!r} -> {values[-1]!r}",
                            step=k + 1)
    return np.array(values), np.array(maxres), cur
