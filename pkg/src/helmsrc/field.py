"""Compactly supported source fields on uniform Cartesian grids.

A field lives on the box ``[-R, R]^n`` sampled with ``m`` points per axis
(``m`` odd, so the origin is a node).  Every field vanishes at nodes with
``|x| >= R``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

FLUSH_BELOW = 1e-300
# bump cutoff: flat up to BUMP_FLAT * R, zero beyond R - max(BUMP_GAP * R, (d + 1) h),
# with a ramp of at least BUMP_RAMP * R in between
BUMP_FLAT = 0.9
BUMP_GAP = 0.03
BUMP_RAMP = 0.05


@dataclass(frozen=True)
class GridSpec:
    n: int
    R: float
    m: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"dimension must be >= 2, got {self.n}")
        if self.m < 3 or self.m % 2 == 0:
            raise ValueError(f"points per axis must be odd and >= 3, got {self.m}")
        if not self.R > 0:
            raise ValueError(f"radius must be positive, got {self.R}")

    @property
    def h(self) -> float:
        return 2.0 * self.R / (self.m - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @property
    def nyquist(self) -> float:
        """Largest resolvable spectral radius, ``pi / h``."""
        return math.pi / self.h

    def axis(self) -> np.ndarray:
        # symmetric by construction: axis[i] == -axis[m - 1 - i]
        c = np.arange(self.m) - (self.m - 1) // 2
        return c * self.h

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        ax = self.axis()
        out = []
        for j in range(self.n):
            shape = [1] * self.n
            shape[j] = self.m
            out.append(ax.reshape(shape))
        return out

    def radius(self) -> np.ndarray:
        r2 = sum(c * c for c in self.coords())
        return np.sqrt(r2)

    def outside_mask(self) -> np.ndarray:
        return self.radius() >= self.R


@dataclass(frozen=True)
class SourceField:
    """Complex source samples on a grid, with smoothness order ``d``."""

    spec: GridSpec
    values: np.ndarray
    d: int = 1
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.shape != self.spec.shape:
            raise ValueError(f"values have shape {vals.shape}, grid expects {self.spec.shape}")
        if self.d < 0:
            raise ValueError("smoothness order must be nonnegative")
        if np.any(vals[self.spec.outside_mask()] != 0):
            raise ValueError("source must vanish at all nodes with |x| >= R")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def with_values(self, values: np.ndarray, meta: dict | None = None) -> "SourceField":
        return SourceField(self.spec, values, self.d, dict(self.meta if meta is None else meta))

    def __add__(self, other: "SourceField") -> "SourceField":
        return self.with_values(self.values + other.values, {"op": "sum"})

    def scaled(self, a: complex) -> "SourceField":
        return self.with_values(a * self.values, {"op": "scaled", "factor": str(a)})


def cutoff(r: np.ndarray, r0: float, r1: float) -> np.ndarray:
    """Smooth radial cutoff: 1 for ``r <= r0``, 0 for ``r >= r1``."""
    t = (np.asarray(r, dtype=float) - r0) / (r1 - r0)
    out = np.zeros_like(t)
    out[t <= 0] = 1.0
    mid = (t > 0) & (t < 1)
    tm = t[mid]
    out[mid] = np.exp(1.0 - 1.0 / (1.0 - tm * tm))
    return out


def make_bump(spec: GridSpec, center, width: float, amplitude: complex = 1.0, d: int = 1) -> SourceField:
    """Gaussian bump ``amplitude * exp(-|x - c|^2 / (2 width^2))`` times a cutoff.

    The cutoff vanishes beyond ``r1 = R - max(0.03 R, (d + 1) h)``, so ``d``
    applications of the Laplacian stencil stay inside ``B_R`` and no nonzero
    node sits within ``h`` of the sphere.  It equals 1 up to
    ``min(0.9 R, r1 - 0.05 R)``; a bump of moderate width is therefore a
    Gaussian to within ``exp(-(0.9 R - |c|)^2 / (2 width^2))`` on fine grids.
    """
    c = np.zeros(spec.n) if center is None else np.asarray(center, dtype=float)
    if c.shape != (spec.n,):
        raise ValueError(f"center must have {spec.n} components")
    if not width > 0:
        raise ValueError("width must be positive")
    r1 = spec.R - max(BUMP_GAP * spec.R, (d + 1) * spec.h)
    r0 = min(BUMP_FLAT * spec.R, r1 - BUMP_RAMP * spec.R)
    if r0 <= 0:
        raise ValueError("grid too coarse for the bump cutoff")
    if np.linalg.norm(c) + 3 * width >= spec.R:
        raise ValueError("bump not supported inside B_R: need |center| + 3 width < R")
    xs = spec.coords()
    d2 = sum((x - cj) ** 2 for x, cj in zip(xs, c))
    r = spec.radius()
    vals = amplitude * np.exp(-d2 / (2 * width**2)) * cutoff(r, r0, r1)
    vals = np.asarray(vals, dtype=np.complex128)
    vals[np.abs(vals) < FLUSH_BELOW] = 0
    meta = {"kind": "bump", "center": c.tolist(), "width": width, "amplitude": str(amplitude),
            "cutoff": [r0, r1]}
    return SourceField(spec, vals, d, meta)


def make_truncated_power(spec: GridSpec, radius: float, power: int, amplitude: complex = 1.0,
                         d: int = 1) -> SourceField:
    """Radial profile ``amplitude * (1 - |x|^2 / radius^2)_+^power``.

    The profile is piecewise polynomial with its only break on the sphere
    ``|x| = radius``, where derivatives of order ``power`` jump.  In 2-D its
    spectral energy outside ``|xi| > s`` decays like ``s^-(2 power + 1)``.
    """
    if not 0 < radius < spec.R:
        raise ValueError("profile radius must lie in (0, R)")
    if power < 1:
        raise ValueError("power must be >= 1")
    r = spec.radius()
    base = np.clip(1.0 - (r / radius) ** 2, 0.0, None)
    vals = np.asarray(amplitude * base**power, dtype=np.complex128)
    vals[r >= spec.R] = 0
    meta = {"kind": "truncated_power", "radius": radius, "power": power, "amplitude": str(amplitude)}
    return SourceField(spec, vals, d, meta)


def _shift(a: np.ndarray, axis: int, step: int) -> np.ndarray:
    """``out[i] = a[i + step]`` along ``axis`` with zero fill."""
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if step > 0:
        src[axis] = slice(step, None)
        dst[axis] = slice(None, -step)
    else:
        src[axis] = slice(None, step)
        dst[axis] = slice(-step, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _d1(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (_shift(a, axis, 1) - _shift(a, axis, -1)) / (2 * h)


def _d2(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (_shift(a, axis, 1) - 2 * a + _shift(a, axis, -1)) / (h * h)


def partial(a: np.ndarray, axis: int, order: int, h: float) -> np.ndarray:
    """Second-order centered difference of the given order along one axis."""
    out = a
    for _ in range(order // 2):
        out = _d2(out, axis, h)
    if order % 2:
        out = _d1(out, axis, h)
    return out


def _trapz_sum(a: np.ndarray) -> float:
    """Trapezoidal sum over every axis (end nodes weighted 1/2), without h^n."""
    w = a
    for ax in range(a.ndim):
        shape = [1] * a.ndim
        shape[ax] = a.shape[ax]
        wt = np.ones(a.shape[ax])
        wt[0] = wt[-1] = 0.5
        w = w * wt.reshape(shape)
    return float(np.sum(w))


def l2_norm(f: SourceField) -> float:
    return math.sqrt(_trapz_sum(np.abs(f.values) ** 2) * f.spec.h ** f.spec.n)


def laplacian_power(f: SourceField, m_iter: int) -> SourceField:
    """``Delta^m_iter f`` by repeated application of the (2n+1)-point stencil."""
    if m_iter < 0:
        raise ValueError("m_iter must be nonnegative")
    if m_iter > f.d:
        raise ValueError(f"m_iter={m_iter} exceeds the smoothness order d={f.d}")
    if f.spec.m < 2 * m_iter + 3:
        raise ValueError("grid too coarse for the requested stencil depth")
    h = f.spec.h
    vals = np.array(f.values)
    for _ in range(m_iter):
        vals = sum(_d2(vals, ax, h) for ax in range(f.spec.n))
    if np.any(vals[f.spec.outside_mask()] != 0):
        raise ValueError("iterated Laplacian leaves B_R; support too close to the boundary")
    meta = {"op": "laplacian_power", "m_iter": m_iter, "of": f.meta}
    return SourceField(f.spec, vals, f.d, meta)


def h2d_norm(f: SourceField, d: int | None = None) -> float:
    """Discrete ``H^{2d}`` norm: ``(sum_{|alpha| <= 2d} ||D^alpha f||^2)^(1/2)``.

    Derivatives are centered differences, the L2 norms trapezoidal sums.
    ``d`` defaults to the field's smoothness order.
    """
    d = f.d if d is None else d
    order = 2 * d
    if f.spec.m < 2 * order + 3:
        raise ValueError("grid too coarse for the derivative order")
    h = f.spec.h
    n = f.spec.n

    def accumulate(arr: np.ndarray, axis: int, budget: int) -> float:
        # sum over multi-indices of the remaining axes, depth-first
        if axis == n:
            return _trapz_sum(np.abs(arr) ** 2)
        total = 0.0
        even = arr
        for a in range(budget + 1):
            if a % 2 == 0:
                if a > 0:
                    even = _d2(even, axis, h)
                cur = even
            else:
                cur = _d1(even, axis, h)
            total += accumulate(cur, axis + 1, budget - a)
        return total

    return math.sqrt(accumulate(np.asarray(f.values), 0, order) * h**n)
