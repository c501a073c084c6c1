"""Tensor-valued differentiable fields.

A field array stores a tensor of shape ``shape`` whose every component is a
scalar "field". Two concrete representations exist:

* :class:`curvlab.jets.JetArray` -- truncated Taylor jets at a point,
* :class:`curvlab.grid_torus.GridArray` -- samples on a periodic grid.

Both expose the same small algebra (elementwise arithmetic, pairwise
contraction, differentiation) so the geometry code in
:mod:`curvlab.tensor_geometry` is written once and runs on either.
"""

from __future__ import annotations

import numbers

import numpy as np


class FieldArray:
    """Base class. ``data`` has shape ``shape + field_shape``."""

    __array_priority__ = 1000
    #: number of trailing axes that belong to the field representation
    nfield = 1

    def __init__(self, data):
        self.data = data

    # -- hooks for subclasses -------------------------------------------
    def _like(self, data):
        raise NotImplementedError

    def _const_data(self, c):
        """Embed a constant ndarray (tensor shape) as field data."""
        raise NotImplementedError

    def _mul_data(self, a, b):
        raise NotImplementedError

    def _align(self, other):
        """Return (a_data, b_data) compatible for arithmetic."""
        return self.data, other.data

    def contract(self, subscripts, other):
        raise NotImplementedError

    def grad(self):
        raise NotImplementedError

    def value(self):
        raise NotImplementedError

    def reciprocal(self):
        raise NotImplementedError

    # -- shape handling -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape[: self.data.ndim - self.nfield]

    @property
    def ndim(self):
        return len(self.shape)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return self._like(self.data[idx])

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        nd = self.ndim
        full = tuple(axes) + tuple(range(nd, nd + self.nfield))
        return self._like(self.data.transpose(full))

    @property
    def T(self):
        return self.transpose(*reversed(range(self.ndim)))

    def sum(self, axis):
        if axis < 0:
            axis += self.ndim
        return self._like(self.data.sum(axis=axis))

    # -- arithmetic -----------------------------------------------------
    def _is_const(self, other):
        return isinstance(other, (numbers.Number, np.ndarray))

    def _pad(self, a, nd):
        """Insert leading unit tensor axes so ``a`` has ``nd`` tensor axes."""
        cur = a.ndim - self.nfield
        if cur < nd:
            a = a.reshape((1,) * (nd - cur) + a.shape)
        return a

    def _binary_data(self, other):
        a, b = self._align(other)
        nd = max(a.ndim, b.ndim) - self.nfield
        return self._pad(a, nd), self._pad(b, nd)

    def __add__(self, other):
        if self._is_const(other):
            return self._like_add_const(np.asarray(other, dtype=float))
        a, b = self._binary_data(other)
        return self._like(a + b)

    __radd__ = __add__

    def _like_add_const(self, c):
        a, b = self._binary_data(self._like(self._const_data(c)))
        return self._like(a + b)

    def __neg__(self):
        return self._like(-self.data)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if self._is_const(other):
            c = np.asarray(other, dtype=float)
            c = c.reshape(c.shape + (1,) * self.nfield)
            return self._like(self.data * c)
        a, b = self._binary_data(other)
        return self._like(self._mul_data(a, b))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if self._is_const(other):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other


def contract(subscripts, *operands):
    """Einstein summation over field arrays and constant ndarrays.

    Operands are reduced left to right, pairwise; every pairwise product is
    a genuine field product (jet convolution or pointwise product).
    """
    inputs, output = subscripts.replace(" ", "").split("->")
    terms = inputs.split(",")
    if len(terms) != len(operands):
        raise ValueError("operand count does not match subscripts")
    acc, acc_sub = operands[0], terms[0]
    for k in range(1, len(operands)):
        later = "".join(terms[k + 1:]) + output
        nxt = terms[k]
        keep = "".join(
            dict.fromkeys(c for c in acc_sub + nxt if c in later)
        )
        spec = f"{acc_sub},{nxt}->{keep}"
        acc = _pair(spec, acc, operands[k])
        acc_sub = keep
    if acc_sub != output:
        if isinstance(acc, FieldArray):
            acc = acc.transpose(*[acc_sub.index(c) for c in output])
        else:
            acc = np.einsum(f"{acc_sub}->{output}", acc)
    return acc


def _pair(spec, a, b):
    if isinstance(a, FieldArray):
        return a.contract(spec, b)
    if isinstance(b, FieldArray):
        lhs, out = spec.split("->")
        sa, sb = lhs.split(",")
        return b.contract(f"{sb},{sa}->{out}", a)
    return np.einsum(spec, a, b)
