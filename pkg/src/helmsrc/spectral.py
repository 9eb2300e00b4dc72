"""Fourier-side quantities built on the source transform over spheres ``|xi| = k``.

The module splits its energy into low and high frequencies and inverts it
by truncated Fourier synthesis.

Two independent routes to ``fhat(xi) = int f(x) exp(-i xi.x) dx`` are
provided.  The boundary route needs only the traces at ``|xi| = k``:

    fhat(xi) = int_{|x|=R} exp(-i xi.x) (d_nu u + i (xi.nu) u) ds(x),

and the direct route sums the grid samples of ``f``.  Radial integrals use
Gauss-Legendre rules on ``[0, s]`` written as ``k = s t``, ``t in (0, 1)``;
when ``s`` differs from the band the samples were taken on, ``|fhat|^2``
(or ``fhat``) is carried to the new nodes by barycentric interpolation
through the sampled wave numbers.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import GridSpec, SourceField, l2_norm
from .forward import BoundaryDataset
from .quadrature import (barycentric_matrix, barycentric_weights, gauss_legendre,
                         product_sphere_rule, sphere_area)

# max complex entries of a partial contraction held at once
_CONTRACT_ENTRIES = 4_000_000


@dataclass(frozen=True)
class DirectionSet:
    n: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.nodes.ndim != 2 or self.nodes.shape[1] != self.n:
            raise ValueError("direction nodes must be an (count, n) array")
        if not np.allclose(np.linalg.norm(self.nodes, axis=1), 1.0, atol=1e-12):
            raise ValueError("directions must be unit vectors")

    @property
    def size(self) -> int:
        return self.nodes.shape[0]


def make_direction_set(n: int, resolution: int) -> DirectionSet:
    """Product-angle rule on the unit sphere (same layout as the boundary rule)."""
    if resolution < 2:
        raise ValueError("direction resolution must be >= 2")
    nodes, weights = product_sphere_rule(n, resolution, 1.0)
    return DirectionSet(n, nodes, weights)


def random_directions(n: int, count: int, seed: int = 0) -> DirectionSet:
    """``count`` seeded uniform directions with equal weights summing to ``|S^{n-1}|``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return DirectionSet(n, v, np.full(count, sphere_area(n) / count))


@dataclass(frozen=True)
class SpectralSamples:
    """``vals[i, j] = fhat(freqs[i] * dirs.nodes[j])``.

    ``kweights`` are radial weights of ``freqs`` on ``[0, band]``; they (and
    the interpolation that relies on the nodes being a full rule) are
    required by the energy and inversion operations.
    """

    dirs: DirectionSet
    freqs: np.ndarray
    vals: np.ndarray
    band: float
    kweights: np.ndarray | None = None
    source_meta: dict = dc_field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.dirs.n

    def _require_rule(self):
        if self.kweights is None:
            raise ValueError("samples carry no radial rule; energies and inversion need one")


# -- single evaluations ------------------------------------------------------

def fhat_boundary_matrix(data: BoundaryDataset, k_indices, dirs: np.ndarray) -> np.ndarray:
    """``out[a, j]`` = boundary-route transform at ``freqs[k_indices[a]] * dirs[j]``."""
    X = data.rule.nodes
    nu = data.rule.normals
    w = data.rule.weights
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    dx = dirs @ X.T
    dn = dirs @ nu.T
    out = np.empty((len(k_indices), dirs.shape[0]), dtype=np.complex128)
    for a, i in enumerate(k_indices):
        k = data.freqs[i]
        integrand = np.exp(-1j * k * dx) * (data.du[i][None, :] + 1j * k * dn * data.u[i][None, :])
        out[a] = integrand @ w
    return out


def fhat_from_boundary(data: BoundaryDataset, k_index: int, dir) -> complex:
    """Transform of the source at ``freqs[k_index] * dir`` from boundary traces."""
    if not 0 <= k_index < len(data.freqs):
        raise IndexError(f"wave number index {k_index} out of range")
    d = np.asarray(dir, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    return complex(fhat_boundary_matrix(data, [k_index], d[None, :])[0, 0])


def fhat_direct_many(f: SourceField, xis) -> np.ndarray:
    """Grid quadrature of ``int f(x) exp(-i xi.x) dx`` for each row of ``xis``.

    ``xis`` may be complex.  The exponential factorizes over axes, so the
    sum is a chain of axis contractions.  Nodes on the box faces carry
    trapezoidal half weights, but sources vanish there.
    """
    spec = f.spec
    n, m = spec.n, spec.m
    xis = np.atleast_2d(np.asarray(xis))
    x = spec.axis()
    vals = np.asarray(f.values).reshape(m, -1)
    out = np.empty(xis.shape[0], dtype=np.complex128)
    per = max(1, _CONTRACT_ENTRIES // max(1, vals.shape[1]))
    for start in range(0, xis.shape[0], per):
        xi = xis[start:start + per]
        T = np.exp(-1j * xi[:, 0:1] * x[None, :]) @ vals
        for a in range(1, n):
            T = T.reshape(xi.shape[0], m, -1)
            E = np.exp(-1j * xi[:, a:a + 1] * x[None, :])
            T = np.einsum("qi,qij->qj", E, T)
        out[start:start + per] = T.reshape(-1)
    return out * spec.h**n


def fhat_direct(f: SourceField, xi) -> complex:
    xi = np.asarray(xi)
    if xi.shape != (f.spec.n,):
        raise ValueError(f"frequency vector must have {f.spec.n} components")
    return complex(fhat_direct_many(f, xi[None, :])[0])


# -- assembly ----------------------------------------------------------------

def assemble_spectra(source: BoundaryDataset | SourceField, dirs: DirectionSet,
                     freqs=None, kweights=None, band: float | None = None) -> SpectralSamples:
    """Fill ``fhat`` on the polar grid ``freqs x dirs``.

    Boundary route for a dataset (its wave numbers and radial weights are
    used; ``freqs`` must be omitted), direct route for a source field
    (``freqs``, and for energies ``kweights``/``band``, must be given).
    """
    if isinstance(source, BoundaryDataset):
        if source.n != dirs.n:
            raise ValueError(f"dataset dimension {source.n} != direction dimension {dirs.n}")
        if freqs is not None:
            raise ValueError("boundary route uses the dataset's own wave numbers")
        vals = fhat_boundary_matrix(source, range(len(source.freqs)), dirs.nodes)
        return SpectralSamples(dirs, np.array(source.freqs), vals, float(source.K),
                               None if source.kweights is None else np.array(source.kweights),
                               {"path": "boundary", "noise": dict(source.noise_meta)})
    if source.spec.n != dirs.n:
        raise ValueError(f"source dimension {source.spec.n} != direction dimension {dirs.n}")
    if freqs is None:
        raise ValueError("direct route needs radial nodes")
    freqs = np.asarray(freqs, dtype=float)
    xis = (freqs[:, None, None] * dirs.nodes[None, :, :]).reshape(-1, dirs.n)
    vals = fhat_direct_many(source, xis).reshape(len(freqs), dirs.size)
    band = float(freqs.max()) if band is None else float(band)
    return SpectralSamples(dirs, freqs, vals, band,
                           None if kweights is None else np.asarray(kweights, dtype=float),
                           {"path": "direct", "source": dict(source.meta)})


def direct_spectra(f: SourceField, dirs: DirectionSet, band: float, count: int = 64) -> SpectralSamples:
    """Direct-route samples on a ``count``-point Gauss-Legendre rule over ``(0, band)``."""
    k, w = gauss_legendre(count, 0.0, band)
    return assemble_spectra(f, dirs, k, w, band)


# -- energies ----------------------------------------------------------------

def _carry(samples: SpectralSamples, values: np.ndarray, targets: np.ndarray) -> np.ndarray:
    P = barycentric_matrix(samples.freqs, barycentric_weights(samples.freqs), targets)
    return P @ values


def _shell_energy(samples: SpectralSamples, a: float, b: float) -> float:
    """Polar quadrature of ``|fhat|^2`` over ``a < |xi| <= b``."""
    samples._require_rule()
    n = samples.n
    power = np.abs(samples.vals) ** 2
    band = samples.band
    if a == 0.0 and abs(b - band) <= 1e-14 * band:
        radial = (samples.kweights * samples.freqs ** (n - 1)) @ power
    else:
        t, wt = gauss_legendre(len(samples.freqs), 0.0, 1.0)
        k = a + (b - a) * t
        radial = ((b - a) * wt * k ** (n - 1)) @ _carry(samples, power, k)
    return float(radial @ samples.dirs.weights)


def i1(samples: SpectralSamples, s: float) -> float:
    """``int_{|xi| <= s} |fhat|^2 dxi``."""
    if s < 0:
        raise ValueError("radius must be nonnegative")
    if s > samples.band * (1 + 1e-14):
        raise ValueError(f"s = {s} exceeds the sampled band {samples.band}")
    if s == 0:
        return 0.0
    return _shell_energy(samples, 0.0, float(s))


def i2(samples: SpectralSamples, s: float, cutoff: float) -> float:
    """``int_{s < |xi| <= cutoff} |fhat|^2 dxi``: the high-frequency energy
    truncated at ``cutoff`` (see :func:`tail_bar` for the neglected part)."""
    if cutoff <= s:
        raise ValueError("cutoff must exceed s")
    if cutoff > samples.band * (1 + 1e-14):
        raise ValueError(f"cutoff {cutoff} exceeds the sampled band {samples.band}")
    return _shell_energy(samples, float(s), float(cutoff))


def tail_bar(M: float, cutoff: float, n: int, d: int) -> float:
    """Energy bound ``M^2 cutoff^-(4d-n) / (4d-n)`` beyond ``cutoff`` for sources in H^{2d}."""
    p = 4 * d - n
    if p <= 0:
        raise ValueError("needs 4d > n")
    return M * M * cutoff ** (-p) / p


def data_bound_constant(n: int, R: float) -> float:
    """Constant ``C`` in ``I1(s) <= C eps^2`` for ``s <= K``.

    Cauchy-Schwarz on the boundary identity with ``|xi.nu| <= k`` gives
    ``|fhat(k w)|^2 <= 2 |dB_R| int (|d_nu u|^2 + k^2 |u|^2) ds``;
    integrating over directions adds ``|S^{n-1}|``.
    """
    return 2.0 * sphere_area(n) * sphere_area(n, R)


def i1_complex(f: SourceField, dirs: DirectionSet, s: complex, count: int = 64) -> complex:
    """Entire extension of ``I1`` to complex ``s``:

    ``sum_j w_j int_0^1 s^n t^(n-1) A(st) B(st) dt`` with
    ``A = int f exp(-i s t w_j.x) dx`` and ``B = int conj(f) exp(i s t w_j.x) dx``.
    """
    s = complex(s)
    if abs(s.imag) * f.spec.R > 700:
        raise ValueError("|Im s| R > 700 overflows the exponentials")
    if s == 0:
        return 0j
    n = f.spec.n
    t, wt = gauss_legendre(count, 0.0, 1.0)
    xis = (s * t[:, None, None] * dirs.nodes[None, :, :]).reshape(-1, n)
    A = fhat_direct_many(f, xis).reshape(count, dirs.size)
    fbar = f.with_values(np.conj(f.values))
    B = fhat_direct_many(fbar, -xis).reshape(count, dirs.size)
    radial = (wt * t ** (n - 1)) @ (A * B)
    return complex(s**n * (radial @ dirs.weights))


def tail_energy(f: SourceField, s_list, dirs: DirectionSet | None = None, count: int = 64) -> np.ndarray:
    """``I2(s)`` of the grid source for each ``s``, as ``(2 pi)^n ||f||^2 - I1(s)``.

    The grid transform is periodic, so the complement covers the whole
    Nyquist cell; ``I1`` uses a direct-route rule on ``[0, s]``.
    """
    n = f.spec.n
    if dirs is None:
        res = max(16, int(2 * max(s_list) * f.spec.R) + 16)
        dirs = make_direction_set(n, res if n == 2 else max(8, res // 2))
    total = (2 * math.pi) ** n * l2_norm(f) ** 2
    out = []
    for s in s_list:
        samples = direct_spectra(f, dirs, float(s), count)
        out.append(total - i1(samples, float(s)))
    return np.array(out)


def tail_slope(f: SourceField, s_list, dirs: DirectionSet | None = None, count: int = 64) -> float:
    """Least-squares slope of ``log I2(s)`` against ``log s``."""
    s_arr = np.asarray(s_list, dtype=float)
    if s_arr.size < 4:
        raise ValueError("need at least four radii")
    if np.any(s_arr * f.spec.h >= 1):
        raise ValueError("radii beyond the resolvable band (s h >= 1) would alias")
    energy = tail_energy(f, s_arr, dirs, count)
    if np.any(energy <= 0):
        raise ValueError("tail energy below the quadrature floor; shrink the radii")
    slope, _ = np.polyfit(np.log(s_arr), np.log(energy), 1)
    return float(slope)


# -- inversion ---------------------------------------------------------------

def _polar_rule(samples: SpectralSamples, s_cut: float):
    """Wave numbers, radial weights and transform values for ``|xi| <= s_cut``."""
    samples._require_rule()
    band = samples.band
    if abs(s_cut - band) <= 1e-14 * band:
        return samples.freqs, samples.kweights, samples.vals
    k, w = gauss_legendre(len(samples.freqs), 0.0, s_cut)
    return k, w, _carry(samples, samples.vals, k)


def _synthesize(coef: np.ndarray, xis: np.ndarray, spec: GridSpec) -> np.ndarray:
    """``out(x) = sum_q coef_q exp(i xi_q . x)`` on the grid, axis by axis."""
    n, m = spec.n, spec.m
    x = spec.axis()
    out = np.zeros(m**n, dtype=np.complex128)
    per = max(1, _CONTRACT_ENTRIES // max(1, m ** (n - 1)))
    for start in range(0, len(coef), per):
        xi = xis[start:start + per]
        # Khatri-Rao product over axes 1..n-1, then one matmul against axis 0
        tail = np.ones((xi.shape[0], 1), dtype=np.complex128)
        for a in range(1, n):
            E = np.exp(1j * xi[:, a:a + 1] * x[None, :])
            tail = (tail[:, :, None] * E[:, None, :]).reshape(xi.shape[0], -1)
        head = np.exp(1j * xi[:, 0:1] * x[None, :]) * coef[start:start + per, None]
        out += (head.T @ tail).reshape(-1)
    return out.reshape(spec.shape)


def reconstruct(samples: SpectralSamples, s_cut: float, out_spec: GridSpec, d: int = 1) -> SourceField:
    """Band-limited inverse ``(2 pi)^-n int_{|xi| <= s_cut} fhat exp(i xi.x) dxi``,
    clipped to ``B_R``."""
    if out_spec.n != samples.n:
        raise ValueError(f"output grid dimension {out_spec.n} != samples dimension {samples.n}")
    if s_cut > samples.band * (1 + 1e-14):
        raise ValueError(f"s_cut = {s_cut} exceeds the sampled band {samples.band}")
    if not s_cut > 0:
        raise ValueError("s_cut must be positive")
    n = samples.n
    k, w, vals = _polar_rule(samples, float(s_cut))
    W = (w * k ** (n - 1))[:, None] * samples.dirs.weights[None, :]
    coef = (W * vals).reshape(-1) / (2 * math.pi) ** n
    xis = (k[:, None, None] * samples.dirs.nodes[None, :, :]).reshape(-1, n)
    values = _synthesize(coef, xis, out_spec)
    values[out_spec.outside_mask()] = 0
    meta = {"kind": "reconstruction", "s_cut": float(s_cut), "from": dict(samples.source_meta)}
    return SourceField(out_spec, values, d, meta)


# -- export ------------------------------------------------------------------

def spectra_csv(samples: SpectralSamples) -> str:
    """One row per (wave number, direction): ``k, direction, xi_hat_1 ..
    xi_hat_n, re_fhat, im_fhat``; floats in shortest round-trip form."""
    n = samples.n
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "direction"] + [f"xi_hat_{a + 1}" for a in range(n)] + ["re_fhat", "im_fhat"])
    for i, k in enumerate(samples.freqs):
        for j in range(samples.dirs.size):
            v = samples.vals[i, j]
            w.writerow([repr(float(k)), j] + [repr(float(c)) for c in samples.dirs.nodes[j]]
                       + [repr(float(v.real)), repr(float(v.imag))])
    return buf.getvalue()
