"""Taylor-mode forward differentiation in up to three variables.

A :class:`JetArray` holds, for every component of a tensor, the truncated
Taylor expansion of a smooth function about a base point ``x0``::

    f(x0 + h) = sum_{|a| <= order} c_a h^a,     c_a = d^a f(x0) / a!

The normalized coefficients ``c_a`` are what is stored (so that products
are plain truncated convolutions); :meth:`JetArray.derivative` returns the
partial derivative ``d^a f(x0) = a! c_a``.  Coefficients are kept densely in
graded order, so the order-``q`` truncation of an order-``p`` jet is a
prefix of its coefficient vector.

Differentiating a jet of order ``p`` yields a jet of order ``p - 1``; mixing
jets of different orders truncates to the smaller one.  This is how the
curvature pipeline tracks how many derivatives remain trustworthy.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .fields import FieldArray

MAX_ORDER = 4


class JetDomainError(ValueError):
    """An elementary function was applied outside its domain."""

    def __init__(self, func, value):
        self.func = func
        self.value = value
        super().__init__(f"{func}: argument {value!r} outside domain")


@lru_cache(maxsize=None)
def multi_indices(dim, order=MAX_ORDER):
    """All multi-indices with ``|a| <= order`` in graded-lexicographic order."""
    out = []
    for deg in range(order + 1):
        level = [a for a in itertools.product(range(deg + 1), repeat=dim)
                 if sum(a) == deg]
        out.extend(sorted(level, reverse=True))
    return tuple(out)


@lru_cache(maxsize=None)
def _index(dim):
    return {a: i for i, a in enumerate(multi_indices(dim))}


def ncoef(dim, order):
    return math.comb(dim + order, order)


@lru_cache(maxsize=None)
def _order_of(dim):
    return {ncoef(dim, p): p for p in range(MAX_ORDER + 1)}


@lru_cache(maxsize=None)
def _product_tables(dim, order):
    mi = multi_indices(dim, order)
    idx = _index(dim)
    P, Q, R = [], [], []
    for i, a in enumerate(mi):
        for j, b in enumerate(mi):
            c = tuple(x + y for x, y in zip(a, b))
            if sum(c) <= order:
                P.append(i)
                Q.append(j)
                R.append(idx[c])
    S = np.zeros((len(P), len(mi)))
    S[np.arange(len(P)), R] = 1.0
    return np.array(P), np.array(Q), S


@lru_cache(maxsize=None)
def _grad_tables(dim, order):
    """For each axis k: source index and factor producing d/dx_k."""
    lower = multi_indices(dim, order - 1)
    idx = _index(dim)
    src = np.empty((dim, len(lower)), dtype=int)
    fac = np.empty((dim, len(lower)))
    for k in range(dim):
        for j, b in enumerate(lower):
            up = list(b)
            up[k] += 1
            src[k, j] = idx[tuple(up)]
            fac[k, j] = up[k]
    return src, fac


class JetArray(FieldArray):
    """Tensor of truncated multivariate Taylor jets (order <= 4)."""

    nfield = 1

    def __init__(self, data, dim):
        data = np.asarray(data, dtype=float)
        try:
            order = _order_of(dim)[data.shape[-1]]
        except KeyError:
            raise ValueError(
                f"{data.shape[-1]} coefficients is not a valid jet size "
                f"in dimension {dim}") from None
        super().__init__(data)
        self.dim = dim
        self.order = order

    def _like(self, data):
        return JetArray(data, self.dim)

    def _const_data(self, c):
        out = np.zeros(c.shape + (self.data.shape[-1],))
        out[..., 0] = c
        return out

    def _like_add_const(self, c):
        out = self.data + np.zeros(c.shape + (1,))
        out[..., 0] += c
        return JetArray(out, self.dim)

    def _align(self, other):
        if not isinstance(other, JetArray):
            raise TypeError(f"cannot combine JetArray with {type(other)}")
        if other.dim != self.dim:
            raise ValueError(f"jet dimension mismatch: {self.dim} vs {other.dim}")
        n = min(self.data.shape[-1], other.data.shape[-1])
        return self.data[..., :n], other.data[..., :n]

    def _mul_data(self, a, b):
        P, Q, S = _product_tables(self.dim, _order_of(self.dim)[a.shape[-1]])
        return (a[..., P] * b[..., Q]) @ S

    def contract(self, subscripts, other):
        lhs, out = subscripts.split("->")
        sa, sb = lhs.split(",")
        if isinstance(other, JetArray):
            a, b = self._align(other)
            P, Q, S = _product_tables(self.dim, _order_of(self.dim)[a.shape[-1]])
            z = np.einsum(f"{sa}z,{sb}z->{out}z", a[..., P], b[..., Q])
            return JetArray(z @ S, self.dim)
        return JetArray(np.einsum(f"{sa}z,{sb}->{out}z", self.data, other), self.dim)

    def grad(self):
        """Jet of the gradient, new leading axis of length ``dim``."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = _grad_tables(self.dim, self.order)
        return JetArray(self.data[..., src] * fac, self.dim).transpose(
            *([self.ndim] + list(range(self.ndim))))

    def value(self):
        return self.data[..., 0].copy()

    def truncate(self, order):
        return JetArray(self.data[..., : ncoef(self.dim, order)], self.dim)

    def derivative(self, alpha):
        """Partial derivative ``d^alpha`` at the base point."""
        alpha = tuple(alpha)
        if len(alpha) != self.dim:
            raise ValueError("multi-index length must equal jet dimension")
        if sum(alpha) > self.order:
            raise ValueError(f"derivative of order {sum(alpha)} exceeds jet order {self.order}")
        c = self.data[..., _index(self.dim)[alpha]]
        return c * math.prod(math.factorial(k) for k in alpha)

    @property
    def coeffs(self):
        """Mapping multi-index -> partial derivative (scalar jets only)."""
        if self.ndim:
            raise ValueError("coeffs is defined for scalar jets")
        return {a: self.derivative(a) for a in multi_indices(self.dim, self.order)}

    # -- composition with univariate functions ---------------------------
    def compose(self, taylor):
        """Return sum_k taylor[k] * (self - self.value)^k.

        ``taylor`` is a sequence of arrays broadcastable to ``self.shape``
        holding ``f^(k)(x0) / k!`` for k = 0..order.
        """
        delta = self.data.copy()
        delta[..., 0] = 0.0
        d = JetArray(delta, self.dim)
        out = self._const_data(np.broadcast_to(np.asarray(taylor[0], float), self.shape))
        power = None
        for k in range(1, self.order + 1):
            power = d if power is None else power * d
            out = out + power.data * np.asarray(taylor[k], float)[..., None]
        return JetArray(out, self.dim)

    def reciprocal(self):
        return recip(self)

    def __pow__(self, p):
        return power(self, p)


Jet3 = JetArray


def seed(index, base_value, dim=1, order=MAX_ORDER):
    """Jet of the coordinate function ``x_index`` at ``base_value``."""
    if not 0 <= index < dim:
        raise IndexError(f"coordinate index {index} out of range for dim {dim}")
    data = np.zeros(ncoef(dim, order))
    data[0] = base_value
    if order >= 1:
        e = [0] * dim
        e[index] = 1
        data[_index(dim)[tuple(e)]] = 1.0
    return JetArray(data, dim)


def seed_point(x, order=MAX_ORDER):
    """Coordinate jets for every axis of the point ``x``."""
    dim = len(x)
    return [seed(i, float(v), dim, order) for i, v in enumerate(x)]


def constant(value, dim, order=MAX_ORDER):
    c = np.asarray(value, dtype=float)
    data = np.zeros(c.shape + (ncoef(dim, order),))
    data[..., 0] = c
    return JetArray(data, dim)


def stack(jets, dim=None):
    """Stack equally shaped jets along a new leading tensor axis."""
    jets = list(jets)
    dim = jets[0].dim if dim is None else dim
    n = min(j.data.shape[-1] for j in jets)
    return JetArray(np.stack([j.data[..., :n] for j in jets]), dim)


def arith(a, b, op):
    """Truncated Taylor arithmetic, ``op`` in {'add', 'sub', 'mul', 'div'}."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown jet operation {op!r}")


# -- elementary functions ------------------------------------------------

def _check(name, ok, x0):
    if not np.all(ok):
        bad = np.asarray(x0)[~np.asarray(ok)]
        raise JetDomainError(name, float(bad.flat[0]))


def exp(a):
    e = np.exp(a.value())
    return a.compose([e / math.factorial(k) for k in range(a.order + 1)])


def sin(a):
    x0 = a.value()
    cycle = [np.sin(x0), np.cos(x0), -np.sin(x0), -np.cos(x0)]
    return a.compose([cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)])


def cos(a):
    x0 = a.value()
    cycle = [np.cos(x0), -np.sin(x0), -np.cos(x0), np.sin(x0)]
    return a.compose([cycle[k % 4] / math.factorial(k) for k in range(a.order + 1)])


def log(a):
    x0 = a.value()
    _check("log", x0 > 0, x0)
    taylor = [np.log(x0)]
    for k in range(1, a.order + 1):
        taylor.append((-1) ** (k + 1) / (k * x0 ** k))
    return a.compose(taylor)


def recip(a):
    x0 = a.value()
    _check("recip", x0 != 0, x0)
    return a.compose([(-1) ** k / x0 ** (k + 1) for k in range(a.order + 1)])


def power(a, p):
    """``a ** p`` for a constant exponent ``p``."""
    p = float(p)
    if p.is_integer():
        n = int(p)
        if n == 0:
            return constant(np.ones(a.shape), a.dim, a.order)
        out = a
        for _ in range(abs(n) - 1):
            out = out * a
        return out if n > 0 else recip(out)
    x0 = a.value()
    _check(f"pow({p:g})", x0 > 0, x0)
    taylor = []
    coef = 1.0
    for k in range(a.order + 1):
        taylor.append(coef * x0 ** (p - k) / math.factorial(k))
        coef *= p - k
    return a.compose(taylor)


def sqrt(a):
    x0 = a.value()
    _check("sqrt", x0 > 0, x0)
    return power(a, 0.5)


def neg(a):
    return -a


ELEMENTARY = {
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "neg": neg,
    "recip": recip,
}


def elementary(a, f, p=None):
    """Apply the named elementary function (``pow`` takes exponent ``p``)."""
    if f == "pow":
        return power(a, p)
    try:
        return ELEMENTARY[f](a)
    except KeyError:
        raise ValueError(f"unknown elementary function {f!r}") from None


def matinv(a):
    """Inverse of a square matrix of jets via a terminating Neumann series."""
    a0 = a.value()
    inv0 = np.linalg.inv(a0)
    e = a - a0  # nilpotent: zero constant term
    term = constant(inv0, a.dim, a.order).truncate(a.order)
    out = term
    for _ in range(a.order):
        term = -_matmul_const_left(inv0, e, term)
        out = out + term
    return out


def _matmul_const_left(c, e, t):
    from .fields import contract
    return contract("ij,jk,kl->il", c, e, t)
