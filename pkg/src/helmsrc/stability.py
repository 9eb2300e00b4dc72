"""Stability calculus for the multi-frequency source problem.

The estimate being exercised reads

    ||f||^2 <= C (eps^2 + M^2 / (K^(2/3) |ln eps|^(1/4))^(4d-n)),

where ``eps`` measures boundary data on ``(0, K)`` and ``M`` bounds the
``H^{2d}`` norm.  Its proof splits ``||f||^2`` into a low-frequency part
``I1(s0)``, controlled through analytic continuation beyond ``K`` with an
exponent ``mu``, and a tail ``I2(s0)`` controlled by smoothness.  Every
constant the argument leaves unspecified is an explicit, reported input here.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field as dc_field

import numpy as np

from .field import GridSpec, SourceField, h2d_norm, l2_norm
from .forward import BoundaryDataset, sweep
from .spectral import (DirectionSet, assemble_spectra, direct_spectra, i1,
                       make_direction_set, reconstruct)

logger = logging.getLogger(__name__)

CASE_SMALL = "i"
CASE_MODERATE = "ii"
CASE_LARGE = "eps-large"
MU_KNEE = 2.0 ** 0.25


@dataclass(frozen=True)
class StabilityParams:
    n: int
    d: int
    R: float
    M: float
    K: float
    C: float = 1.0

    def __post_init__(self):
        if 4 * self.d <= self.n:
            raise ValueError(f"need 4d > n, got d={self.d}, n={self.n}")
        if not self.K > 1:
            raise ValueError(f"band limit must satisfy K > 1, got {self.K}")
        if not self.M > 0:
            raise ValueError("norm bound M must be positive")
        if not self.R > 0:
            raise ValueError("radius must be positive")
        if not self.C > 0:
            raise ValueError("constant C must be positive")

    @property
    def tail_power(self) -> int:
        return 4 * self.d - self.n


@dataclass
class StabilityReport:
    eps: float
    case: str
    s0: float
    mu_s0: float
    bound: float
    measured_error: float
    relative_error: float | None
    s_cut: float
    noiseless: bool = False
    warnings: list = dc_field(default_factory=list)
    meta: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


# -- data size ---------------------------------------------------------------

def epsilon_of_data(data: BoundaryDataset) -> float:
    """``(int_0^K k^(n-1) int_{|x|=R} (|d_nu u|^2 + k^2 |u|^2) ds dk)^(1/2)``.

    The dataset's wave numbers must be the nodes of a radial rule on
    ``(0, K)`` (``data.kweights``).
    """
    if data.kweights is None:
        raise ValueError("dataset has no radial weights; sweep over a radial rule")
    k = data.freqs
    surf = (np.abs(data.du) ** 2 + (k**2)[:, None] * np.abs(data.u) ** 2) @ data.rule.weights
    return math.sqrt(max(0.0, float((data.kweights * k ** (data.n - 1)) @ surf)))


# -- continuation exponent and cutoff -----------------------------------------

def mu(s: float, K: float) -> float:
    """Lower bound for the continuation exponent at ``s > K``:
    ``1/2`` below ``2^(1/4) K``, ``((s/K)^4 - 1)^(-1/2) / pi`` from there on."""
    if not s > K:
        raise ValueError(f"mu is defined for s > K (s={s}, K={K})")
    if s < MU_KNEE * K:
        return 0.5
    # q >= 1 on this branch; the max only absorbs rounding at the knee
    q = max((s / K) ** 4 - 1.0, 1.0)
    return 1.0 / (math.pi * math.sqrt(q))


def _log_size(eps: float | None, ln_eps: float | None) -> float:
    """``ln eps`` from either argument, validating positivity."""
    if ln_eps is not None:
        if eps is not None:
            raise ValueError("pass eps or ln_eps, not both")
        return float(ln_eps)
    if eps is None or not eps > 0:
        raise ValueError("eps must be positive (log undefined)")
    return math.log(eps)


def case_threshold(params: StabilityParams) -> float:
    """``2^(1/4) ((2R+3) pi)^(1/3) K^(1/3)``, compared against ``|ln eps|^(1/4)``."""
    return MU_KNEE * ((2 * params.R + 3) * math.pi) ** (1 / 3) * params.K ** (1 / 3)


def select_s0(params: StabilityParams, eps: float | None = None, *,
              ln_eps: float | None = None, nyquist: float | None = None) -> tuple[float, str]:
    """Cutoff ``s0`` and case tag.

    ``eps >= 1/e`` gives ``(K, "eps-large")``.  Otherwise case i fires when
    ``|ln eps|^(1/4)`` exceeds :func:`case_threshold`, with
    ``s0 = K^(2/3) |ln eps|^(1/4) / ((2R+3) pi)^(1/3)``; else ``(K, "ii")``.
    ``eps == 0`` is the noiseless limit: case i with ``s0 = nyquist``.
    Very small ``eps`` can be given through ``ln_eps``.
    """
    if ln_eps is None and eps == 0:
        if nyquist is None:
            raise ValueError("eps = 0 needs the grid's Nyquist radius to cap s0")
        return float(nyquist), CASE_SMALL
    le = _log_size(eps, ln_eps)
    if le >= -1.0:
        return float(params.K), CASE_LARGE
    root = abs(le) ** 0.25
    if case_threshold(params) < root:
        s0 = params.K ** (2 / 3) * root / ((2 * params.R + 3) * math.pi) ** (1 / 3)
        return s0, CASE_SMALL
    return float(params.K), CASE_MODERATE


def s0_warnings(params: StabilityParams, eps: float | None = None, *,
                ln_eps: float | None = None) -> list[str]:
    """Side conditions the case-i algebra takes for granted, when they fail."""
    out = []
    if ln_eps is None and eps == 0:
        return out
    le = abs(_log_size(eps, ln_eps))
    if not 1 - 0.5 * le ** -0.25 > 0.5:
        out.append("1 - |ln eps|^(-1/4) / 2 > 1/2 fails (|ln eps| <= 1)")
    if not ((2 * params.R + 3) ** 2 / math.pi) ** (1 / 3) > 1:
        out.append("((2R+3)^2 / pi)^(1/3) > 1 fails")
    return out


def bound_rhs(params: StabilityParams, eps: float | None = None, *,
              ln_eps: float | None = None) -> float:
    """``C (eps^2 + M^2 / (K^(2/3) L^(1/4))^(4d-n))`` with ``L = |ln eps|``,
    clamped to 1 when ``eps >= 1/e``."""
    le = _log_size(eps, ln_eps)
    L = max(abs(le), 1.0) if le < -1.0 else 1.0
    e2 = math.exp(2 * le) if le > -745 else 0.0
    tail = params.M**2 / (params.K ** (2 / 3) * L**0.25) ** params.tail_power
    return params.C * (e2 + tail)


# -- proof-chain checks ------------------------------------------------------

@dataclass(frozen=True)
class ContinuationRow:
    s: float
    lhs: float
    rhs: float
    holds: bool


@dataclass(frozen=True)
class ContinuationTable:
    rows: list
    C: float
    exponent_const: float
    eps: float
    M: float

    @property
    def all_hold(self) -> bool:
        return all(r.holds for r in self.rows)


def continuation_check(f: SourceField, data: BoundaryDataset, s_list,
                       exponent_const: float | None = None, dirs: DirectionSet | None = None,
                       radial_count: int = 64, rtol: float = 1e-12) -> ContinuationTable:
    """Tabulate ``I1(s)`` against ``C M^2 exp(c s) eps^(2 mu(s))`` for ``s > K``.

    ``I1`` is taken from the source directly (the data stop at ``K``),
    ``eps`` is the data size of ``f``, ``M`` its discrete ``H^{2d}`` norm and
    ``c`` defaults to ``2R + 1``.  ``C`` is fixed so the smallest ``s`` is
    tight; ``holds`` allows ``rtol`` of rounding.
    """
    s_arr = np.sort(np.asarray(s_list, dtype=float))
    K, R = data.K, data.R
    if np.any(s_arr <= K):
        raise ValueError("continuation radii must exceed K")
    if np.any(s_arr > f.spec.nyquist):
        raise ValueError("continuation radii beyond the Nyquist radius")
    c = 2 * R + 1 if exponent_const is None else float(exponent_const)
    eps = epsilon_of_data(data)
    M = h2d_norm(f)
    if dirs is None:
        dirs = make_direction_set(f.spec.n, direction_resolution(f.spec.n, s_arr[-1], R))
    samples = direct_spectra(f, dirs, float(s_arr[-1]), radial_count)
    lhs = [i1(samples, float(s)) for s in s_arr]

    def shape(s: float) -> float:
        return M * M * math.exp(c * s) * eps ** (2 * mu(s, K))

    base = shape(s_arr[0])
    C = lhs[0] / base if base > 0 else 0.0
    C = C if C > 0 else 1.0
    rows = []
    for s, a in zip(s_arr, lhs):
        b = C * shape(float(s))
        rows.append(ContinuationRow(float(s), float(a), float(b), bool(a <= b * (1 + rtol))))
    return ContinuationTable(rows, C, c, eps, M)


def factorial_inequality_check(d: int, n: int, t_list) -> bool:
    """``exp(-t) t^(3(4d-n)) <= (12d-3n)!`` at every ``t``, in log space with an
    exact integer factorial."""
    if 4 * d <= n:
        raise ValueError(f"need 4d > n, got d={d}, n={n}")
    t = np.asarray(t_list, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    p = 3 * (4 * d - n)
    log_fact = _log_int(math.factorial(12 * d - 3 * n))
    lhs = -t + p * np.log(t)
    return bool(np.all(lhs <= log_fact))


def _log_int(v: int) -> float:
    # exact integers may exceed float range
    bits = v.bit_length()
    if bits < 1000:
        return math.log(v)
    shift = bits - 60
    return math.log(v >> shift) + shift * math.log(2.0)


# -- end-to-end run ----------------------------------------------------------

def direction_resolution(n: int, band: float, R: float) -> int:
    """Angular nodes enough to integrate ``exp(i k w.x)`` for ``|k x| <= band R``."""
    base = int(math.ceil(band * R)) + 16
    return 2 * base if n == 2 else max(8, base)


def array_digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def run_report(f: SourceField, data: BoundaryDataset, params: StabilityParams, out_spec: GridSpec,
               clean: BoundaryDataset | None = None, dirs: DirectionSet | None = None) -> StabilityReport:
    """Reconstruct from ``data`` and compare the error with the estimate.

    ``eps`` is the size of the data error ``data - clean``; ``clean`` is
    re-synthesized from ``f`` when omitted and ``data`` carries noise.  The
    error is measured in squared L2 norm (absolute, and relative to
    ``||f||^2``), the quantity bounded by the estimate.
    """
    if not (f.spec.n == data.n == params.n == out_spec.n):
        raise ValueError("dimension mismatch between source, data, parameters and grid")
    if abs(f.spec.R - data.R) > 1e-12 or abs(params.R - data.R) > 1e-12:
        raise ValueError("radius mismatch between source, data and parameters")
    noisy = data.noise_meta.get("kind", "none") != "none"
    if clean is None and noisy:
        clean = sweep(f, data.freqs, data.rule, data.K, data.kweights)
    eps = epsilon_of_data(data - clean) if clean is not None else 0.0

    nyq = out_spec.nyquist
    s0, case = select_s0(params, eps, nyquist=nyq)
    warnings = s0_warnings(params, eps)
    noiseless = eps == 0
    if noiseless:
        warnings.append("noiseless data: s0 capped at the Nyquist radius")
    mu_s0 = mu(s0, params.K) if s0 > params.K else 1.0
    bound = 0.0 if noiseless else bound_rhs(params, eps)

    s_cut = min(s0, params.K, nyq, data.K)
    if dirs is None:
        dirs = make_direction_set(params.n, direction_resolution(params.n, s_cut, params.R))
    samples = assemble_spectra(data, dirs)
    rec = reconstruct(samples, s_cut, out_spec, f.d)
    if out_spec != f.spec:
        raise ValueError("error measurement needs the output grid to match the source grid")
    diff = rec.with_values(rec.values - f.values)
    err2 = l2_norm(diff) ** 2
    ref2 = l2_norm(f) ** 2
    rel = err2 / ref2 if ref2 > 0 else None

    meta = {
        "params": asdict(params),
        "sphere_resolution": data.rule.resolution,
        "sphere_nodes": data.rule.size,
        "radial_nodes": len(data.freqs),
        "direction_nodes": dirs.size,
        "grid": {"n": out_spec.n, "R": out_spec.R, "m": out_spec.m},
        "noise": dict(data.noise_meta),
        "source_sha256": array_digest(f.values),
        "data_sha256": array_digest(data.u, data.du),
        "calibration_C": params.C,
    }
    logger.info("run K=%g eps=%.3e case=%s s_cut=%g err=%.3e", params.K, eps, case, s_cut, err2)
    return StabilityReport(eps, case, s0, mu_s0, bound, err2, rel, s_cut, noiseless, warnings, meta)
