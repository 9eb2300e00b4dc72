"""Synthetic multi-frequency boundary data for the Helmholtz source problem.

For a source ``f`` on a grid of spacing ``h`` the radiating field is the
discrete convolution ``u(x) = -sum_y Phi_k(|x - y|) f(y) h^n``; its normal
derivative on ``|x| = R`` is formed from the kernel's normal derivative.
That Neumann trace is exactly what the exterior Dirichlet-to-Neumann map
returns for radiating data, so no DtN operator is built.

The sum is evaluated exactly, but kernel rows are computed only for one
boundary node per orbit of the signed-permutation symmetries shared by the
grid and the sphere rule; the other nodes reuse those rows against the
correspondingly permuted source.
"""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.spatial import cKDTree

from .field import SourceField
from .quadrature import gauss_legendre, product_sphere_rule, sphere_area
from .specfun import kernel_block

logger = logging.getLogger(__name__)

MIN_SPHERE_RESOLUTION = 8
# kernel block budget in complex entries (two arrays of this size are live)
_BLOCK_ENTRIES = 6_000_000


@dataclass(frozen=True)
class SphereRule:
    n: int
    R: float
    nodes: np.ndarray
    weights: np.ndarray
    resolution: int = 0

    @property
    def normals(self) -> np.ndarray:
        return self.nodes / self.R

    @property
    def size(self) -> int:
        return self.nodes.shape[0]


def make_sphere_rule(n: int, R: float, resolution: int) -> SphereRule:
    """Product-angle quadrature rule on ``|x| = R`` (see
    :func:`helmsrc.quadrature.product_sphere_rule`)."""
    if resolution < MIN_SPHERE_RESOLUTION:
        raise ValueError(f"sphere rule resolution must be >= {MIN_SPHERE_RESOLUTION}")
    nodes, weights = product_sphere_rule(n, resolution, R)
    return SphereRule(n, float(R), nodes, weights, resolution)


def radial_rule(K: float, count: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre wave numbers and weights on ``(0, K)``."""
    if not K > 0:
        raise ValueError("band limit must be positive")
    return gauss_legendre(count, 0.0, K)


@dataclass(frozen=True)
class BoundaryDataset:
    """Traces ``u`` and ``du = d_nu u`` at the rule nodes, one row per wave number.

    ``kweights`` are the radial quadrature weights of ``freqs`` on
    ``(0, K)`` when the wave numbers come from a rule, else ``None``.
    """

    rule: SphereRule
    freqs: np.ndarray
    u: np.ndarray
    du: np.ndarray
    K: float
    kweights: np.ndarray | None = None
    noise_meta: dict = dc_field(default_factory=lambda: {"kind": "none"})

    def __post_init__(self):
        nf = len(self.freqs)
        shape = (nf, self.rule.size)
        if np.shape(self.u) != shape or np.shape(self.du) != shape:
            raise ValueError(f"trace matrices must have shape {shape}")
        if nf and (np.any(np.diff(self.freqs) <= 0) or self.freqs[0] <= 0):
            raise ValueError("wave numbers must be positive and strictly increasing")
        if self.kweights is not None and len(self.kweights) != nf:
            raise ValueError("one radial weight per wave number required")

    @property
    def n(self) -> int:
        return self.rule.n

    @property
    def R(self) -> float:
        return self.rule.R

    def scaled(self, lam: complex) -> "BoundaryDataset":
        return replace(self, u=lam * self.u, du=lam * self.du)

    def __sub__(self, other: "BoundaryDataset") -> "BoundaryDataset":
        if not np.array_equal(self.freqs, other.freqs) or self.rule.size != other.rule.size:
            raise ValueError("datasets are on different frequency or node sets")
        return replace(self, u=self.u - other.u, du=self.du - other.du,
                       noise_meta={"kind": "difference"})


# -- symmetry bookkeeping ---------------------------------------------------

def _signed_permutations(n: int):
    for perm in itertools.permutations(range(n)):
        for signs in itertools.product((1, -1), repeat=n):
            yield np.array(perm), np.array(signs)


def _apply(perm: np.ndarray, signs: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """``(P x)_a = s_a x_{perm[a]}`` row-wise."""
    return pts[:, perm] * signs


def rule_symmetries(rule: SphereRule, tol: float = 1e-9):
    """Signed permutations mapping the node set onto itself.

    Returns ``[(perm, signs, node_map)]`` with ``node_map[j]`` the index of
    ``P x_j``.  The identity always comes first.
    """
    tree = cKDTree(rule.nodes)
    out = []
    for perm, signs in _signed_permutations(rule.n):
        dist, idx = tree.query(_apply(perm, signs, rule.nodes))
        if np.all(dist < tol * rule.R):
            out.append((perm, signs, idx))
    return out


def _orbits(syms, size: int) -> np.ndarray:
    """Representative node index for each node: ``rep_of[j]``."""
    rep_of = np.full(size, -1)
    for j in range(size):
        if rep_of[j] >= 0:
            continue
        for _, _, node_map in syms:
            k = node_map[j]
            if rep_of[k] < 0:
                rep_of[k] = j
    return rep_of


def _transform_mask(mask: np.ndarray, perm: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """``B[y] = mask[P y]`` on a centered symmetric grid."""
    flip_axes = tuple(int(a) for a in np.nonzero(signs < 0)[0])
    a = np.flip(mask, axis=flip_axes) if flip_axes else mask
    return np.transpose(a, np.argsort(perm))


def _traces(f: SourceField, freqs: np.ndarray, rule: SphereRule) -> tuple[np.ndarray, np.ndarray]:
    spec = f.spec
    n, h = spec.n, spec.h
    nf, nb = len(freqs), rule.size
    u = np.zeros((nf, nb), dtype=np.complex128)
    du = np.zeros((nf, nb), dtype=np.complex128)
    support = f.values != 0
    if nf == 0 or not support.any():
        return u, du

    syms = rule_symmetries(rule)
    rep_of = _orbits(syms, nb)
    reps = np.unique(rep_of)
    rep_pos = {int(r): i for i, r in enumerate(reps)}
    xr = np.ascontiguousarray(rule.nodes[reps])

    union = np.zeros_like(support)
    for perm, signs, _ in syms:
        union |= _transform_mask(support, perm, signs)
    flat = np.flatnonzero(union)
    off = (spec.m - 1) // 2
    fvals = f.values.ravel()

    nr, ng = len(reps), len(syms)
    acc_u = np.zeros((nr * nf, ng), dtype=np.complex128)
    acc_du = np.zeros((nr * nf, ng), dtype=np.complex128)
    chunk = max(256, _BLOCK_ENTRIES // (nr * nf))
    rmin = np.inf
    for start in range(0, len(flat), chunk):
        idx = flat[start:start + chunk]
        cint = np.stack(np.unravel_index(idx, spec.shape), axis=1) - off
        ys = cint * h
        F = np.empty((len(idx), ng), dtype=np.complex128)
        for g, (perm, signs, _) in enumerate(syms):
            moved = _apply(perm, signs, cint) + off
            F[:, g] = fvals[np.ravel_multi_index(moved.T, spec.shape)]
        phi, dphi, rm = kernel_block(xr, ys, freqs, n - 2, rule.R)
        rmin = min(rmin, rm)
        acc_u += phi.reshape(nr * nf, -1) @ F
        acc_du += dphi.reshape(nr * nf, -1) @ F
    if rmin < 0.5 * h:
        raise ValueError(
            f"boundary node within {rmin:.3g} < h/2 of a source node; R too tight for the grid")

    scale = -(h ** n)
    acc_u = (scale * acc_u).reshape(nr, nf, ng)
    acc_du = (scale * acc_du).reshape(nr, nf, ng)
    filled = np.zeros(nb, dtype=bool)
    for g, (_, _, node_map) in enumerate(syms):
        for r in reps:
            j = node_map[r]
            if not filled[j]:
                u[:, j] = acc_u[rep_pos[int(r)], :, g]
                du[:, j] = acc_du[rep_pos[int(r)], :, g]
                filled[j] = True
    assert filled.all()
    return u, du


# -- public operations -------------------------------------------------------

def _check_geometry(f: SourceField, rule: SphereRule):
    if rule.n != f.spec.n:
        raise ValueError(f"rule dimension {rule.n} does not match source dimension {f.spec.n}")
    if abs(rule.R - f.spec.R) > 1e-12 * f.spec.R:
        raise ValueError(f"rule radius {rule.R} does not match source radius {f.spec.R}")


def forward_solve(f: SourceField, k: float, rule: SphereRule) -> tuple[np.ndarray, np.ndarray]:
    """Dirichlet and Neumann traces of the radiating field at one wave number."""
    if not k > 0:
        raise ValueError("wave number must be positive")
    _check_geometry(f, rule)
    u, du = _traces(f, np.array([float(k)]), rule)
    return u[0], du[0]


def sweep(f: SourceField, freqs, rule: SphereRule, K: float | None = None,
          kweights=None, threads: int = 1) -> BoundaryDataset:
    """Stack traces over a set of wave numbers (stored ascending).

    ``K`` defaults to ``max(freqs)``; pass the band limit and radial weights
    when ``freqs`` are nodes of a rule on ``(0, K)``.
    """
    _check_geometry(f, rule)
    freqs = np.asarray(freqs, dtype=float)
    if np.any(freqs <= 0):
        raise ValueError("wave numbers must be positive")
    order = np.argsort(freqs, kind="stable")
    freqs = freqs[order]
    if kweights is not None:
        kweights = np.asarray(kweights, dtype=float)[order]
    if threads > 1 and len(freqs) > 1:
        blocks = np.array_split(np.arange(len(freqs)), min(threads, len(freqs)))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _traces(f, freqs[b], rule), blocks))
        u = np.concatenate([p[0] for p in parts])
        du = np.concatenate([p[1] for p in parts])
    else:
        u, du = _traces(f, freqs, rule)
    band = float(freqs[-1]) if K is None else float(K)
    logger.debug("swept %d wave numbers on %d nodes", len(freqs), rule.size)
    return BoundaryDataset(rule, freqs, u, du, band, kweights, {"kind": "none"})


def add_noise(data: BoundaryDataset, level: float, seed: int) -> BoundaryDataset:
    """Row-scaled complex Gaussian perturbation of both traces.

    Each row of ``u`` gets ``level * rms(row) * eta`` with ``eta`` unit
    complex normal (``E|eta|^2 = 1``) from NumPy's PCG64 generator seeded
    with ``seed``; ``du`` gets an independent draw from the same stream.
    """
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    if level == 0:
        return data
    rng = np.random.default_rng(seed)

    def perturb(a: np.ndarray) -> np.ndarray:
        rms = np.sqrt(np.mean(np.abs(a) ** 2, axis=1, keepdims=True))
        eta = (rng.standard_normal(a.shape) + 1j * rng.standard_normal(a.shape)) / np.sqrt(2.0)
        return a + level * rms * eta

    u = perturb(data.u)
    du = perturb(data.du)
    meta = {"kind": "gaussian", "level": float(level), "seed": int(seed),
            "generator": "numpy.random.PCG64", "scaling": "row rms"}
    return replace(data, u=u, du=du, noise_meta=meta)


def surface_measure(rule: SphereRule) -> float:
    return sphere_area(rule.n, rule.R)
