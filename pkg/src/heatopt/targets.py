"""Analytic target states used in the convergence studies.

Targets are evaluated with numpy broadcasting: ``x`` is a sequence of ``dim``
arrays (one per coordinate) and ``t`` an array, all mutually broadcastable.
Passing open-grid arrays keeps separable targets cheap.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit


class Kind(enum.Enum):
    SMOOTH = "smooth"
    ANISOTROPIC = "anisotropic"
    DISCONTINUOUS = "discontinuous"
    TURNING_WAVE = "turning-wave"


_DIMS = {
    Kind.SMOOTH: 3,
    Kind.ANISOTROPIC: 3,
    Kind.DISCONTINUOUS: 3,
    Kind.TURNING_WAVE: 2,
}

# (uniform h_t ~ h_x, parabolic h_t ~ h_x^2)
_EOC = {
    Kind.SMOOTH: (2.0, 2.0),
    Kind.ANISOTROPIC: (1.0, 2.0),
    Kind.DISCONTINUOUS: (0.5, 0.5),
    Kind.TURNING_WAVE: (0.5, 0.5),
}

_WAVE_SLOPE = 70.0
_WAVE_LO, _WAVE_HI = 1.0 / 8.0, 7.0 / 8.0


def _bubble(x):
    return x * (1.0 - x)


def _box(x, lo, hi):
    # closed interval: points on the faces count as inside
    return (x >= lo) & (x <= hi)


@dataclass(frozen=True)
class TargetSpec:
    kind: Kind
    dim: int
    T: float = 1.0
    expected_eoc_uniform: float = field(default=None)
    expected_eoc_parabolic: float = field(default=None)

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.dim != _DIMS[kind]:
            raise ValueError(f"{kind.value} target is defined for dim={_DIMS[kind]}, not {self.dim}")
        if kind is Kind.TURNING_WAVE and self.T != 1.0:
            raise ValueError("the turning wave is defined for T=1 only")
        uni, par = _EOC[kind]
        if self.expected_eoc_uniform is None:
            object.__setattr__(self, "expected_eoc_uniform", uni)
        if self.expected_eoc_parabolic is None:
            object.__setattr__(self, "expected_eoc_parabolic", par)

    @property
    def name(self):
        return self.kind.value

    @property
    def space_breakpoints(self):
        """Coordinates (same on every axis) where the target jumps."""
        if self.kind is Kind.DISCONTINUOUS:
            return (0.25, 0.75)
        if self.kind is Kind.TURNING_WAVE:
            return (_WAVE_LO, _WAVE_HI)
        return ()

    @property
    def time_breakpoints(self):
        if self.kind is Kind.TURNING_WAVE:
            return (_WAVE_LO, 0.75)
        return ()

    @property
    def time_endpoint_singular(self):
        """True when the time derivative blows up at ``t = 0`` and ``t = T``."""
        return self.kind is Kind.ANISOTROPIC

    def evaluate(self, x: Sequence[np.ndarray], t):
        return evaluate(self, x, t)


def evaluate(target: TargetSpec, x: Sequence[np.ndarray], t):
    if len(x) != target.dim:
        raise ValueError(f"expected {target.dim} coordinates, got {len(x)}")
    x = [np.asarray(xi, dtype=float) for xi in x]
    t = np.asarray(t, dtype=float)
    kind = target.kind
    if kind is Kind.SMOOTH:
        return t**2 * _bubble(x[0]) * _bubble(x[1]) * _bubble(x[2])
    if kind is Kind.ANISOTROPIC:
        tt = np.sqrt(np.clip(t * (target.T - t), 0.0, None))
        return tt * _bubble(x[0]) * _bubble(x[1]) * _bubble(x[2])
    if kind is Kind.DISCONTINUOUS:
        inside = _box(x[0], 0.25, 0.75) & _box(x[1], 0.25, 0.75) & _box(x[2], 0.25, 0.75)
        return np.broadcast_to(inside, np.broadcast_shapes(inside.shape, t.shape)).astype(float)
    return _turning_wave(x[0], x[1], t)


def _turning_wave(x1, x2, t):
    g = (2.0 * np.pi / 3.0) * np.minimum(0.75, t)
    c, s = np.cos(g), np.sin(g)
    k = _WAVE_SLOPE
    z1 = (c * (k / 3.0 - k * x1) + s * (k / 3.0 - k * x2)) / np.sqrt(2.0)
    z2 = (c * (k * x1 - 2.0 * k / 3.0) + s * (k * x2 - 2.0 * k / 3.0)) / np.sqrt(2.0)
    # 1 / (1 + exp(z)) == expit(-z), without overflow
    val = expit(-z1) + expit(-z2) - 1.0
    support = _box(x1, _WAVE_LO, _WAVE_HI) & _box(x2, _WAVE_LO, _WAVE_HI) & (t >= _WAVE_LO)
    return np.where(support, val, 0.0)


def reaction(u):
    """Cubic reaction ``R(u) = u (u + 1) (u - 1/4)``."""
    u = np.asarray(u, dtype=float)
    return u * (u + 1.0) * (u - 0.25)


TARGET_NAMES = tuple(k.value for k in Kind)


def get_target(name: str, T: float = 1.0) -> TargetSpec:
    try:
        kind = Kind(name)
    except ValueError:
        raise ValueError(f"unknown target {name!r}; choose from {', '.join(TARGET_NAMES)}") from None
    return TargetSpec(kind, _DIMS[kind], T=T)


@dataclass(frozen=True)
class FunctionTarget:
    """Wraps an arbitrary callable ``f(x, t)`` so it can be assembled or measured."""

    func: Callable
    dim: int
    space_breakpoints: tuple = ()
    time_breakpoints: tuple = ()
    time_endpoint_singular: bool = False

    def evaluate(self, x, t):
        return self.func(x, t)
