"""Symmetric tridiagonal matrices that act along one axis of an ndarray."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def _along(vec, axis, ndim):
    shape = [1] * ndim
    shape[axis] = -1
    return vec.reshape(shape)


def _slices(ndim, axis, sl):
    idx = [slice(None)] * ndim
    idx[axis] = sl
    return tuple(idx)


@dataclass(frozen=True, eq=False)
class TridiagonalSym:
    """Symmetric tridiagonal matrix stored by its main and off diagonal."""

    main: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        main = np.atleast_1d(np.asarray(self.main, dtype=float))
        off = np.atleast_1d(np.asarray(self.off, dtype=float))
        if main.ndim != 1 or off.ndim != 1:
            raise ValueError("diagonals must be one-dimensional")
        if off.size != max(main.size - 1, 0):
            raise ValueError(
                f"off diagonal has length {off.size}, expected {max(main.size - 1, 0)}"
            )
        object.__setattr__(self, "main", main)
        object.__setattr__(self, "off", off)

    @classmethod
    def constant(cls, n, diag, offdiag):
        return cls(np.full(n, float(diag)), np.full(max(n - 1, 0), float(offdiag)))

    @property
    def n(self):
        return self.main.size

    def toarray(self):
        return np.diag(self.main) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def matvec(self, v, axis=0):
        """Multiply along ``axis`` of ``v``."""
        v = np.asarray(v, dtype=float)
        axis = axis % v.ndim
        if v.shape[axis] != self.n:
            raise ValueError(f"axis {axis} has length {v.shape[axis]}, expected {self.n}")
        y = v * _along(self.main, axis, v.ndim)
        if self.n > 1:
            off = _along(self.off, axis, v.ndim)
            lo = _slices(v.ndim, axis, slice(None, -1))
            hi = _slices(v.ndim, axis, slice(1, None))
            y[hi] += off * v[lo]
            y[lo] += off * v[hi]
        return y

    @cached_property
    def _thomas(self):
        # forward-elimination factors, reused for every right-hand side
        n = self.n
        cp = np.zeros(max(n - 1, 0))
        denom = np.empty(n)
        denom[0] = self.main[0]
        for i in range(1, n):
            cp[i - 1] = self.off[i - 1] / denom[i - 1]
            denom[i] = self.main[i] - self.off[i - 1] * cp[i - 1]
        if np.any(denom == 0.0):
            raise np.linalg.LinAlgError("zero pivot in tridiagonal elimination")
        return cp, denom

    def solve(self, rhs, axis=0):
        """Thomas sweep along ``axis``; linear in the number of entries."""
        if self.n == 0:
            raise ValueError("cannot solve an empty system")
        rhs = np.asarray(rhs, dtype=float)
        axis = axis % rhs.ndim
        if rhs.shape[axis] != self.n:
            raise ValueError(
                f"axis {axis} has length {rhs.shape[axis]}, expected {self.n}"
            )
        cp, denom = self._thomas
        x = np.moveaxis(rhs, axis, 0).copy()
        off = self.off
        x[0] /= denom[0]
        for i in range(1, self.n):
            x[i] -= off[i - 1] * x[i - 1]
            x[i] /= denom[i]
        for i in range(self.n - 2, -1, -1):
            x[i] -= cp[i] * x[i + 1]
        return np.moveaxis(x, 0, axis)
