"""Gauss-Legendre rules, product rules on spheres, and interpolation through
Gauss-Legendre nodes."""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial.legendre import leggauss


def gauss_legendre(count: int, a: float = 0.0, b: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (ascending) and weights of the ``count``-point rule on ``[a, b]``."""
    if count < 1:
        raise ValueError("rule needs at least one node")
    x, w = leggauss(count)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def sphere_area(n: int, R: float = 1.0) -> float:
    """Surface measure of the sphere of radius ``R`` in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2) * R ** (n - 1)


def product_sphere_rule(n: int, resolution: int, R: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``|x| = R`` in R^n.

    Points are parametrized as ``(cos p1, sin p1 cos p2, ..., sin p1 ...
    sin p_{n-2} sin p_{n-1})``.  The polar angles ``p1 .. p_{n-2}`` each get
    a ``resolution``-point Gauss-Legendre rule on ``[0, pi]`` with the
    ``sin^(n-1-j)`` Jacobian folded into the weights; the last angle gets
    ``resolution`` equispaced points starting at 0 (trapezoidal rule).  For
    ``n = 2`` this is the plain trapezoidal rule on the circle.
    """
    if n < 2:
        raise ValueError("sphere rules need n >= 2")
    az = 2.0 * math.pi * np.arange(resolution) / resolution
    az_w = np.full(resolution, 2.0 * math.pi / resolution)
    if n == 2:
        nodes = np.stack([np.cos(az), np.sin(az)], axis=1)
        return R * nodes, R * az_w
    t, tw = gauss_legendre(resolution, 0.0, math.pi)
    angles = [t] * (n - 2) + [az]
    grids = np.meshgrid(*angles, indexing="ij")
    ang = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.ones(ang.shape[0])
    for j in range(n - 2):
        idx = np.searchsorted(t, ang[:, j])
        weights *= tw[idx] * np.sin(ang[:, j]) ** (n - 2 - j)
    weights *= 2.0 * math.pi / resolution
    nodes = np.empty((ang.shape[0], n))
    sprod = np.ones(ang.shape[0])
    for j in range(n - 1):
        nodes[:, j] = sprod * np.cos(ang[:, j])
        sprod = sprod * np.sin(ang[:, j])
    nodes[:, n - 1] = sprod
    return R * nodes, R ** (n - 1) * weights


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric weights ``1 / prod_{k != j} (x_j - x_k)``, rescaled to max 1."""
    x = np.asarray(nodes, dtype=float)
    span = x.max() - x.min() if x.size > 1 else 1.0
    xs = 4.0 * x / span
    diff = xs[:, None] - xs[None, :]
    np.fill_diagonal(diff, 1.0)
    logmag = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    return sign * np.exp(logmag - logmag.max())


def barycentric_matrix(nodes: np.ndarray, bweights: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Matrix ``P`` with ``P @ values(nodes) = interpolant(targets)``."""
    nodes = np.asarray(nodes, dtype=float)
    targets = np.asarray(targets, dtype=float)
    diff = targets[:, None] - nodes[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        c = bweights[None, :] / diff
        P = c / c.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    if rows.any():
        P[rows] = exact[rows].astype(float)
    return P
