import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heatopt.tridiag import TridiagonalSym


def random_dd(rng, n):
    off = rng.uniform(-1, 1, max(n - 1, 0))
    main = 2.5 + rng.uniform(0, 1, n)
    return TridiagonalSym(main, off)


def test_rejects_bad_lengths():
    with pytest.raises(ValueError):
        TridiagonalSym([1.0, 2.0], [0.5, 0.5])


def test_toarray_is_symmetric(rng):
    m = random_dd(rng, 6).toarray()
    assert np.array_equal(m, m.T)


@pytest.mark.parametrize("axis", [0, 1, 2, -1])
def test_matvec_along_axis(rng, axis):
    m = random_dd(rng, 5)
    v = rng.standard_normal((5, 5, 5))
    expected = np.moveaxis(np.tensordot(m.toarray(), np.moveaxis(v, axis, 0), axes=1), 0, axis)
    assert np.allclose(m.matvec(v, axis=axis), expected, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("axis", [0, 1])
def test_solve_inverts_matvec(rng, axis):
    m = random_dd(rng, 7)
    x = rng.standard_normal((7, 3)) if axis == 0 else rng.standard_normal((3, 7))
    assert np.allclose(m.solve(m.matvec(x, axis=axis), axis=axis), x, rtol=1e-13, atol=1e-13)


def test_solve_rejects_empty_and_mismatch():
    with pytest.raises(ValueError):
        TridiagonalSym([], []).solve(np.zeros(0))
    with pytest.raises(ValueError):
        TridiagonalSym.constant(3, 4, 1).solve(np.zeros(4))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**32 - 1))
def test_solve_residual_property(n, seed):
    rng = np.random.default_rng(seed)
    m = random_dd(rng, n)
    rhs = rng.standard_normal(n)
    x = m.solve(rhs)
    assert np.max(np.abs(m.matvec(x) - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))
