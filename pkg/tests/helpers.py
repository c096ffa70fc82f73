"""Test-side evaluation of discrete space-time functions, independent of the package."""

import string

import numpy as np

from heatopt.targets import FunctionTarget


def hats(points, n_el, length, n_dof):
    h = length / n_el
    nodes = np.arange(1, n_dof + 1)
    return np.clip(1.0 - np.abs(points[:, None] / h - nodes[None, :]), 0.0, None)


def discrete_target(field):
    """Exact pointwise evaluation of ``field`` on open grids laid out like the quadrature."""
    grid, mesh = field.grid, field.mesh
    d = grid.dim
    U = field.coeffs.reshape((mesh.N_t,) + grid.shape)
    letters = string.ascii_lowercase

    def f(x, t):
        t = np.asarray(t)
        bt = hats(t.ravel(), mesh.n_t, mesh.T, mesh.N_t)
        # coordinate a sits on array axis d - a of an open grid
        bx = [hats(np.asarray(x[a]).ravel(), grid.n_x, 1.0, grid.m_per_axis) for a in range(d)]
        coef = "A" + "".join(letters[d - 1 - k] for k in range(d))
        out = "T" + "".join(letters[10 + d - 1 - k] for k in range(d))
        terms = ["TA", coef] + [letters[10 + a] + letters[a] for a in range(d)]
        vals = np.einsum(",".join(terms) + "->" + out, bt, U, *bx)
        return vals

    return FunctionTarget(f, d)
