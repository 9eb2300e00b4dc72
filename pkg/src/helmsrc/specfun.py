"""Hankel functions and the outgoing Helmholtz kernel in R^n.

Orders are restricted to integers and half-integers, which is all the
kernel ``Phi_k`` needs: its order is ``(n - 2) / 2``.  Internally an order
is carried as ``two_nu = 2 * nu`` so the compiled kernels stay integer
typed.

Integer orders use the ascending series for ``z <= SERIES_SWITCH`` and the
Hankel asymptotic expansion (truncated at its smallest term) beyond, with
upward recurrence from orders 0 and 1.  Half-integer orders use the finite
elementary sums of the spherical Hankel functions, except for
``z < |nu| + 2`` where the public functions switch to the power series of
``J_{+-nu}`` so that ``J_nu`` keeps its relative accuracy (the kernel only
needs the complex value and always takes the elementary form).

Sign convention: ``(Delta + k^2) Phi = -delta``, so the radiating solution
of ``Delta u + k^2 u = f`` is ``u = -(Phi * f)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

SERIES_SWITCH = 12.0
MAX_ASYMPTOTIC_TERMS = 40
_EULER_GAMMA = 0.57721566490153286061


@njit(cache=True)
def _jy_series(nu, z):
    """J_nu(z), Y_nu(z) for integer nu >= 0 by ascending series."""
    half = 0.5 * z
    q = -half * half
    # J_nu
    term = 1.0
    for i in range(1, nu + 1):
        term *= half / i
    jsum = 0.0
    # psi(k+1) + psi(nu+k+1) with psi(m+1) = -gamma + H_m
    hk = 0.0
    hnk = 0.0
    for i in range(1, nu + 1):
        hnk += 1.0 / i
    ysum = 0.0
    tmax = abs(term)
    k = 0
    while True:
        jsum += term
        ysum += (hk + hnk - 2.0 * _EULER_GAMMA) * term
        k += 1
        term *= q / (k * (k + nu))
        hk += 1.0 / k
        hnk += 1.0 / (k + nu)
        tmax = max(tmax, abs(term))
        if abs(term) < 1e-18 * tmax and k > half:
            break
        if k > 400:
            break
    j = jsum
    # finite part: sum_{k<nu} (nu-k-1)!/k! (z/2)^(2k-nu)
    fin = 0.0
    if nu > 0:
        t = 1.0
        for i in range(1, nu):
            t *= i
        t /= half ** nu  # k = 0: (nu-1)! (z/2)^-nu
        for kk in range(nu):
            fin += t
            if kk + 1 < nu:
                t *= half * half / ((kk + 1) * (nu - kk - 1))
    y = (2.0 / math.pi) * j * math.log(half) - fin / math.pi - ysum / math.pi
    return j, y


@njit(cache=True)
def _h_asymptotic(nu, z):
    """H^(1)_nu(z) for integer nu, large z; stops at the smallest term."""
    mu4 = 4.0 * nu * nu
    a = 1.0
    s = 1.0 + 0.0j
    ik = 1.0 + 0.0j
    prev = 1.0
    for k in range(1, MAX_ASYMPTOTIC_TERMS + 1):
        a *= (mu4 - (2 * k - 1) ** 2) / (8.0 * k * z)
        mag = abs(a)
        if mag > prev or mag < 1e-18:
            break
        ik *= 1j
        s += ik * a
        prev = mag
    phase = z - 0.5 * nu * math.pi - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * z)) * (math.cos(phase) + 1j * math.sin(phase)) * s


@njit(cache=True)
def _h_int(nu, z):
    """H^(1)_nu(z) for any integer nu."""
    m = abs(nu)
    if z <= SERIES_SWITCH:
        j, y = _jy_series(m, z)
        h = j + 1j * y
    elif m == 0:
        h = _h_asymptotic(0, z)
    else:
        h0 = _h_asymptotic(0, z)
        h1 = _h_asymptotic(1, z)
        for i in range(1, m):
            h0, h1 = h1, (2.0 * i / z) * h1 - h0
        h = h1
    if nu < 0 and m % 2 == 1:
        h = -h
    return h


@njit(cache=True)
def _jy_series_pair(nu, z):
    """(J_nu, Y_nu, J_{nu+1}, Y_{nu+1}) for integer nu >= 0 in one pass."""
    half = 0.5 * z
    q = -half * half
    t0 = 1.0
    for i in range(1, nu + 1):
        t0 *= half / i
    t1 = t0 * half / (nu + 1)
    hk = 0.0
    hn0 = 0.0
    for i in range(1, nu + 1):
        hn0 += 1.0 / i
    hn1 = hn0 + 1.0 / (nu + 1)
    j0 = 0.0
    j1 = 0.0
    y0 = 0.0
    y1 = 0.0
    tmax = abs(t0)
    k = 0
    while True:
        j0 += t0
        j1 += t1
        y0 += (hk + hn0 - 2.0 * _EULER_GAMMA) * t0
        y1 += (hk + hn1 - 2.0 * _EULER_GAMMA) * t1
        k += 1
        t0 *= q / (k * (k + nu))
        t1 *= q / (k * (k + nu + 1))
        hk += 1.0 / k
        hn0 += 1.0 / (k + nu)
        hn1 += 1.0 / (k + nu + 1)
        tmax = max(tmax, abs(t0))
        if (abs(t0) < 1e-18 * tmax and k > half) or k > 400:
            break
    lg = (2.0 / math.pi) * math.log(half)
    # finite parts for orders nu and nu + 1
    fin0 = 0.0
    if nu > 0:
        t = 1.0
        for i in range(1, nu):
            t *= i
        t /= half ** nu
        for kk in range(nu):
            fin0 += t
            if kk + 1 < nu:
                t *= half * half / ((kk + 1) * (nu - kk - 1))
    m = nu + 1
    t = 1.0
    for i in range(1, m):
        t *= i
    t /= half ** m
    fin1 = 0.0
    for kk in range(m):
        fin1 += t
        if kk + 1 < m:
            t *= half * half / ((kk + 1) * (m - kk - 1))
    return (j0, lg * j0 - (fin0 + y0) / math.pi,
            j1, lg * j1 - (fin1 + y1) / math.pi)


@njit(cache=True)
def _h_asymptotic_pair(z):
    """(H_0, H_1) for large z, each truncated at its smallest term."""
    return _h_asymptotic(0, z), _h_asymptotic(1, z)


@njit(cache=True)
def _h_int_pair(nu, z):
    """(H_nu, H_{nu+1}) for integer nu >= 0."""
    if z <= SERIES_SWITCH:
        j0, y0, j1, y1 = _jy_series_pair(nu, z)
        return j0 + 1j * y0, j1 + 1j * y1
    h0, h1 = _h_asymptotic_pair(z)
    for i in range(1, nu + 1):
        h0, h1 = h1, (2.0 * i / z) * h1 - h0
    return h0, h1


@njit(cache=True)
def _h_half(two_nu, z):
    """H^(1)_nu(z) for half-integer nu = two_nu / 2 (two_nu odd)."""
    if two_nu < 0:
        # H_{-nu} = exp(i pi nu) H_nu
        nu = -two_nu
        ang = 0.5 * nu * math.pi
        return (math.cos(ang) + 1j * math.sin(ang)) * _h_half(nu, z)
    l = (two_nu - 1) // 2
    # h_l(z) = (-i)^(l+1) e^{iz}/z sum_m (i/(2z))^m (l+m)!/(m!(l-m)!)
    s = 0.0 + 0.0j
    c = 1.0
    p = 1.0 + 0.0j
    for m in range(l + 1):
        s += c * p
        c *= (l + m + 1) * (l - m) / (m + 1.0)
        p *= 1j / (2.0 * z)
    pref = 1.0 + 0.0j
    for _ in range(l + 1):
        pref *= -1j
    hl = pref * (math.cos(z) + 1j * math.sin(z)) / z * s
    return math.sqrt(2.0 * z / math.pi) * hl


@njit(cache=True)
def _j_power_series(alpha, z):
    """J_alpha(z) from its power series; alpha must not be a negative integer."""
    q = -0.25 * z * z
    term = (0.5 * z) ** alpha / math.gamma(alpha + 1.0)
    total = term
    tmax = abs(term)
    for k in range(1, 400):
        term *= q / (k * (k + alpha))
        total += term
        tmax = max(tmax, abs(term))
        if abs(term) < 1e-18 * tmax and k > 0.5 * z:
            break
    return total


@njit(cache=True)
def _h_half_series(two_nu, z):
    """Half-integer H from the power series of J_nu and J_-nu.

    Used where the elementary form loses the (tiny) real part to
    cancellation.  With nu = l + 1/2: Y_nu = (-1)^(l+1) J_-nu, and
    Y_-nu = (-1)^l J_nu.
    """
    a = abs(two_nu)
    l = (a - 1) // 2
    jp = _j_power_series(0.5 * a, z)
    jm = _j_power_series(-0.5 * a, z)
    sign = 1.0 if l % 2 == 0 else -1.0
    if two_nu > 0:
        return jp - 1j * sign * jm
    return jm + 1j * sign * jp


@njit(cache=True)
def _hankel(two_nu, z):
    if two_nu % 2 == 0:
        return _h_int(two_nu // 2, z)
    if z < 0.5 * abs(two_nu) + 2.0:
        return _h_half_series(two_nu, z)
    return _h_half(two_nu, z)


@njit(cache=True)
def _hankel_array(two_nu, z):
    out = np.empty(z.shape[0], dtype=np.complex128)
    for i in range(z.shape[0]):
        out[i] = _hankel(two_nu, z[i])
    return out


def _two_nu(nu: float) -> int:
    two = 2.0 * float(nu)
    if abs(two - round(two)) > 1e-12:
        raise ValueError(f"unsupported order nu={nu}: must be an integer or half-integer")
    return int(round(two))


def hankel1(nu: float, z):
    """Hankel function of the first kind ``J_nu(z) + i Y_nu(z)``.

    ``z`` may be a scalar or array of positive reals.
    """
    two = _two_nu(nu)
    za = np.asarray(z, dtype=np.float64)
    if np.any(~(za > 0)):
        raise ValueError("hankel1 requires z > 0")
    out = _hankel_array(two, za.ravel()).reshape(za.shape)
    return complex(out) if out.ndim == 0 else out


def hankel1_derivative(nu: float, z):
    """``H'_nu(z) = H_{nu-1}(z) - (nu / z) H_nu(z)``."""
    za = np.asarray(z, dtype=np.float64)
    return hankel1(nu - 1, za) - (nu / za) * hankel1(nu, za)


def besselj(nu: float, z):
    return np.real(hankel1(nu, z))


def bessely(nu: float, z):
    return np.imag(hankel1(nu, z))


@dataclass(frozen=True)
class KernelParams:
    """Dimension ``n`` and wave number ``k`` of the kernel ``Phi_k``."""

    n: int
    k: float

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"dimension must be >= 2, got {self.n}")
        if not self.k > 0:
            raise ValueError(f"wave number must be positive, got {self.k}")

    @property
    def nu(self) -> float:
        return (self.n - 2) / 2


def fundamental_solution(p: KernelParams, r):
    """Outgoing kernel ``(i/4) (k / (2 pi r))^nu H_nu(k r)``, nu = (n-2)/2."""
    ra = np.asarray(r, dtype=np.float64)
    if np.any(~(ra > 0)):
        raise ValueError("fundamental solution is singular at r <= 0")
    nu = p.nu
    out = 0.25j * (p.k / (2 * np.pi * ra)) ** nu * hankel1(nu, p.k * ra)
    return complex(out) if np.ndim(out) == 0 else out


def fundamental_solution_radial_derivative(p: KernelParams, r):
    """d/dr of :func:`fundamental_solution`."""
    ra = np.asarray(r, dtype=np.float64)
    if np.any(~(ra > 0)):
        raise ValueError("fundamental solution is singular at r <= 0")
    nu, k = p.nu, p.k
    z = k * ra
    out = 0.25j * (k / (2 * np.pi * ra)) ** nu * k * (
        hankel1(nu - 1, z) - (2 * nu / z) * hankel1(nu, z)
    )
    return complex(out) if np.ndim(out) == 0 else out


def fundamental_solution_normal_derivative(p: KernelParams, x, y, h: float | None = None):
    """Normal derivative of ``Phi_k(|x - y|)`` at ``x`` on the sphere ``|x| = R``.

    The outward normal is ``x / |x|``.  If the grid spacing ``h`` is given,
    pairs closer than ``h / 2`` are rejected: they indicate a boundary node
    sitting on top of the source grid.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    diff = x - y
    r = float(np.linalg.norm(diff))
    if h is not None and r < 0.5 * h:
        raise ValueError(f"|x - y| = {r:.3g} is below h/2 = {0.5 * h:.3g}; grid too close to boundary")
    if r == 0:
        raise ValueError("x and y coincide")
    nrm = x / np.linalg.norm(x)
    return fundamental_solution_radial_derivative(p, r) * float(diff @ nrm) / r


@njit(cache=True, nogil=True)
def kernel_block(xs, ys, freqs, two_nu, R):
    """Kernel and normal-derivative rows for boundary points ``xs``.

    Returns ``phi[a, q, p] = Phi_{k_q}(|x_a - y_p|)``, the matching normal
    derivatives at ``x_a`` (normal ``x_a / R``) and the smallest distance
    encountered.
    """
    na = xs.shape[0]
    npnt = ys.shape[0]
    nf = freqs.shape[0]
    dim = xs.shape[1]
    nu = 0.5 * two_nu
    phi = np.empty((na, nf, npnt), dtype=np.complex128)
    dphi = np.empty((na, nf, npnt), dtype=np.complex128)
    rr = np.empty(npnt)
    cs = np.empty(npnt)
    rmin = np.inf
    for a in range(na):
        for p in range(npnt):
            r2 = 0.0
            proj = 0.0
            for c in range(dim):
                d = xs[a, c] - ys[p, c]
                r2 += d * d
                proj += d * xs[a, c]
            r = math.sqrt(r2)
            rr[p] = r
            cs[p] = proj / (R * r)
            if r < rmin:
                rmin = r
        for q in range(nf):
            k = freqs[q]
            if two_nu == 1:
                # n = 3 closed form
                for p in range(npnt):
                    r = rr[p]
                    z = k * r
                    e = (math.cos(z) + 1j * math.sin(z)) * (0.25 / (math.pi * r))
                    phi[a, q, p] = e
                    dphi[a, q, p] = e * (1j * k - 1.0 / r) * cs[p]
                continue
            for p in range(npnt):
                r = rr[p]
                z = k * r
                scale = 0.25j * (k / (2.0 * math.pi * r)) ** nu
                if two_nu == 0:
                    hn, h1 = _h_int_pair(0, z)
                    hm = -h1
                elif two_nu % 2 == 0:
                    hm, hn = _h_int_pair(two_nu // 2 - 1, z)
                else:
                    hn = _h_half(two_nu, z)
                    hm = _h_half(two_nu - 2, z)
                phi[a, q, p] = scale * hn
                dphi[a, q, p] = scale * k * (hm - (2.0 * nu / z) * hn) * cs[p]
    return phi, dphi, rmin
