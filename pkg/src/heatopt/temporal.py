"""Temporal discretization: mass matrix, analytic eigenpairs and sine transforms.

The temporal ansatz space consists of piecewise linear hat functions on a
uniform mesh of ``(0, T)`` that vanish at ``t = 0``. The stiffness matrix of
the first time derivative tested with the modified Hilbert transformation is
dense, but its generalized eigenvectors with respect to the mass matrix are
the columns of a type-II sine transform, so every operation here is either
tridiagonal or ``O(N log N)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .tridiag import TridiagonalSym

#: relative cutoff for the eigenvalue series
SERIES_TOL = 1e-14
#: hard cap on the number of series terms
SERIES_MAX_TERMS = 10**6
#: modal periods summed by the dense oracle (``k_max = 4 * N_t * 200``)
ORACLE_PERIODS = 200


@dataclass(frozen=True)
class TemporalMesh:
    """Uniform mesh of ``(0, T)`` with ``n_t`` elements."""

    n_t: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.n_t) != self.n_t or self.n_t < 1:
            raise ValueError(f"n_t must be a positive integer, got {self.n_t!r}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        object.__setattr__(self, "n_t", int(self.n_t))
        object.__setattr__(self, "T", float(self.T))

    @property
    def h_t(self):
        return self.T / self.n_t

    @property
    def N_t(self):
        """Number of degrees of freedom (node at ``t = 0`` is removed)."""
        return self.n_t

    def nodes(self):
        """Times ``t_1, ..., t_{N_t}`` of the free nodes."""
        return self.h_t * np.arange(1, self.n_t + 1)


def temporal_mass_matrix(mesh: TemporalMesh) -> TridiagonalSym:
    h = mesh.h_t
    main = np.full(mesh.N_t, 2.0 * h / 3.0)
    main[-1] = h / 3.0
    return TridiagonalSym(main, np.full(mesh.N_t - 1, h / 6.0))


def mass_tridiag_solve(m: TridiagonalSym, rhs, axis=0):
    """Solve ``m x = rhs`` along ``axis`` by a Thomas sweep."""
    return m.solve(rhs, axis=axis)


def _frequencies(k):
    return (0.5 + np.asarray(k, dtype=float)) * np.pi


def eigenvector_component(l, i, n_t):
    """Component ``i`` (1-based) of eigenvector ``l`` (0-based)."""
    return np.sin(_frequencies(l) * np.asarray(i, dtype=float) / n_t)


def eigenvector_matrix(n_t):
    """Dense matrix whose column ``l`` is eigenvector ``l``."""
    i = np.arange(1, n_t + 1, dtype=float)
    return np.sin(np.outer(i, _frequencies(np.arange(n_t))) / n_t)


def _series(l, n_t, tol, max_terms, chunk=4096):
    """Sum over mu of the bracketed terms in the eigenvalue formula.

    For every ``l`` the summation stops before the first term that is smaller
    than ``tol`` times the partial sum accumulated so far.
    """
    a = 2.0 * np.asarray(l, dtype=float) + 1.0
    a4 = a**4
    b = 4.0 * n_t - a
    n4 = 4.0 * n_t
    total = np.zeros_like(a)
    done = np.zeros(a.shape, dtype=bool)
    mu0 = 0
    while not done.all() and mu0 < max_terms:
        act = np.flatnonzero(~done)
        mu = np.arange(mu0, min(mu0 + chunk, max_terms), dtype=float)[None, :]
        terms = a4[act, None] * (
            1.0 / (n4 * mu + a[act, None]) ** 3 + 1.0 / (n4 * mu + b[act, None]) ** 3
        )
        before = total[act, None] + np.cumsum(terms, axis=1) - terms
        stop = terms < tol * before
        hit = stop.any(axis=1)
        first = np.argmax(stop, axis=1)
        total[act] = np.where(hit, before[np.arange(act.size), first], before[:, -1] + terms[:, -1])
        done[act[hit]] = True
        mu0 += mu.shape[1]
    return total


def eigenvalues(mesh: TemporalMesh, tol=SERIES_TOL, l=None):
    """Generalized eigenvalues of the temporal stiffness/mass pair.

    Returned in channel order ``l = 0, ..., N_t - 1`` (not sorted).
    """
    n = mesh.N_t
    l = np.arange(n) if l is None else np.asarray(l)
    x = _frequencies(l) / (2.0 * n)
    sinc4 = (np.sin(x) / x) ** 4
    return (
        1.5 * np.pi / mesh.T
        * sinc4 / (2.0 + np.cos(2.0 * x))
        * _series(l, n, tol, SERIES_MAX_TERMS)
    )


def eigenvalue(l: int, mesh: TemporalMesh, tol=SERIES_TOL) -> float:
    if not 0 <= l < mesh.N_t:
        raise IndexError(f"eigenvalue index {l} out of range for N_t={mesh.N_t}")
    return float(eigenvalues(mesh, tol, l=np.array([l]))[0])


def dst2(v, axis=-1, workers=None):
    """``w_i = sum_k sin((pi/2 + k pi) i / N) v_k`` for ``i = 1..N``.

    This is the eigenvector matrix applied to ``v`` (half of the usual DST-II).
    """
    return 0.5 * scipy.fft.dst(np.asarray(v, dtype=float), type=2, axis=axis, workers=workers)


def idst2(w, axis=-1, workers=None):
    """Inverse of :func:`dst2`."""
    return 2.0 * scipy.fft.idst(np.asarray(w, dtype=float), type=2, axis=axis, workers=workers)


@dataclass(frozen=True, eq=False)
class TemporalEigenSystem:
    """Eigenvalues ``lambdas[l]`` of ``A v = lambda M v``; the eigenvectors are implicit."""

    n_t: int
    T: float
    lambdas: np.ndarray
    truncation_tol: float = SERIES_TOL

    @classmethod
    def build(cls, mesh: TemporalMesh, tol=SERIES_TOL):
        return cls(mesh.n_t, mesh.T, eigenvalues(mesh, tol), tol)

    def matches(self, mesh: TemporalMesh):
        return self.n_t == mesh.n_t and self.T == mesh.T

    def eigenvectors(self):
        return eigenvector_matrix(self.n_t)

    def to_modal(self, u, axis=0, workers=None):
        return idst2(u, axis=axis, workers=workers)

    def from_modal(self, v, axis=0, workers=None):
        return dst2(v, axis=axis, workers=workers)


def _modal_coefficients(k, n_t):
    """Sine-series coefficients of the hat functions, shape ``(len(k), N_t)``."""
    w = _frequencies(k)
    x = w / (2.0 * n_t)
    i = np.arange(1, n_t + 1, dtype=float)
    coef = (2.0 / n_t) * ((np.sin(x) / x) ** 2)[:, None] * np.sin(np.outer(w, i) / n_t)
    coef[:, -1] *= 0.5
    return w, coef


def _modal_sum(n_t, k_start, k_stop, chunk_entries=2_000_000):
    out = np.zeros((n_t, n_t))
    step = max(1, chunk_entries // n_t)
    for k0 in range(k_start, k_stop, step):
        w, coef = _modal_coefficients(np.arange(k0, min(k_stop, k0 + step)), n_t)
        out += 0.5 * (coef * w[:, None]).T @ coef
    return out


def assemble_A_ht_dense(mesh: TemporalMesh, k_max=None, extrapolate=True):
    """Dense temporal stiffness matrix from its raw Fourier-mode expansion.

    ``A[j, i] = 1/2 sum_k (pi/2 + k pi) a_k^i a_k^j`` where ``a_k^i`` are the
    sine coefficients of hat function ``i``. Modes are summed directly, without
    the folding onto ``k < N_t`` used by the eigenvalue formula, so this is an
    independent check of it. The matrix does not depend on ``T``.

    The mode count is rounded up to whole blocks of ``4 N_t`` modes. With
    ``extrapolate`` the ``k_max**-2`` tail of the truncated sum is removed by
    one Richardson step against the sum over the first ``k_max / 2`` modes.
    """
    n = mesh.N_t
    block = 4 * n
    if k_max is None:
        k_max = block * ORACLE_PERIODS
    if k_max < 1:
        raise ValueError("k_max must be positive")
    if not extrapolate:
        return _modal_sum(n, 0, int(k_max))
    k_max = block * -(-int(k_max) // block)
    half = _modal_sum(n, 0, k_max // 2)
    full = half + _modal_sum(n, k_max // 2, k_max)
    return (4.0 * full - half) / 3.0

