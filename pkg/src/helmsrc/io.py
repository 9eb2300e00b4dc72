"""Binary containers for fields, boundary datasets and spectral samples.

Every file starts with the 8-byte magic ``b"HELMSRC\\0"``, a 4-byte kind tag
(``FLD1``, ``BND1`` or ``SPC1``) and a fixed little-endian header; the
payload follows as little-endian float64, complex arrays interleaved
``re, im`` in row-major order.  Metadata goes to a JSON sidecar at
``<path>.json``.  The README documents the exact layouts.  All writes go
through a temporary file in the target directory and an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .field import GridSpec, SourceField
from .forward import BoundaryDataset, SphereRule
from .spectral import DirectionSet, SpectralSamples, spectra_csv

MAGIC = b"HELMSRC\0"
KIND_FIELD = b"FLD1"
KIND_BOUNDARY = b"BND1"
KIND_SPECTRA = b"SPC1"

_FIELD_HEADER = struct.Struct("<idii")        # n, R, m, d
_BOUNDARY_HEADER = struct.Struct("<idqqdii")  # n, R, nodes, freqs, K, has_kweights, resolution
_SPECTRA_HEADER = struct.Struct("<idqqi")     # n, band, directions, freqs, has_kweights


class FormatError(ValueError):
    """File does not hold the expected container."""


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dumps_json(obj) -> str:
    """Deterministic JSON (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _c128(a) -> bytes:
    a = np.ascontiguousarray(a, dtype=np.complex128)
    return _f64(np.stack([a.real, a.imag], axis=-1))


class _Reader:
    def __init__(self, blob: bytes, kind: bytes, path):
        if blob[:8] != MAGIC:
            raise FormatError(f"{path}: not a helmsrc container")
        if blob[8:12] != kind:
            raise FormatError(f"{path}: holds {blob[8:12]!r}, expected {kind!r}")
        self.blob = blob
        self.pos = 12
        self.path = path

    def header(self, fmt: struct.Struct):
        if self.pos + fmt.size > len(self.blob):
            raise FormatError(f"{self.path}: truncated header")
        out = fmt.unpack_from(self.blob, self.pos)
        self.pos += fmt.size
        return out

    def f64(self, count: int) -> np.ndarray:
        end = self.pos + 8 * count
        if end > len(self.blob):
            raise FormatError(f"{self.path}: truncated payload")
        out = np.frombuffer(self.blob, dtype="<f8", count=count, offset=self.pos).astype(float)
        self.pos = end
        return out

    def c128(self, count: int) -> np.ndarray:
        pairs = self.f64(2 * count).reshape(count, 2)
        return pairs[:, 0] + 1j * pairs[:, 1]

    def done(self):
        if self.pos != len(self.blob):
            raise FormatError(f"{self.path}: {len(self.blob) - self.pos} trailing bytes")


def _read(path, kind: bytes) -> _Reader:
    with open(path, "rb") as fh:
        return _Reader(fh.read(), kind, path)


def _read_sidecar(path) -> dict:
    p = sidecar_path(path)
    if not p.exists():
        return {}
    with open(p) as fh:
        return json.load(fh)


# -- fields ------------------------------------------------------------------

def save_field(f: SourceField, path) -> None:
    s = f.spec
    blob = MAGIC + KIND_FIELD + _FIELD_HEADER.pack(s.n, s.R, s.m, f.d) + _c128(f.values)
    atomic_write_bytes(path, blob)
    atomic_write_text(sidecar_path(path), dumps_json({"kind": "field", "meta": f.meta}))


def load_field(path) -> SourceField:
    r = _read(path, KIND_FIELD)
    n, R, m, d = r.header(_FIELD_HEADER)
    spec = GridSpec(n, R, m)
    vals = r.c128(m**n).reshape(spec.shape)
    r.done()
    return SourceField(spec, vals, d, _read_sidecar(path).get("meta", {}))


# -- boundary datasets -------------------------------------------------------

def save_dataset(data: BoundaryDataset, path, provenance: dict | None = None) -> None:
    rule = data.rule
    has_w = data.kweights is not None
    head = _BOUNDARY_HEADER.pack(rule.n, rule.R, rule.size, len(data.freqs), float(data.K),
                                 int(has_w), rule.resolution)
    parts = [MAGIC, KIND_BOUNDARY, head, _f64(rule.nodes), _f64(rule.weights), _f64(data.freqs)]
    if has_w:
        parts.append(_f64(data.kweights))
    parts += [_c128(data.u), _c128(data.du)]
    atomic_write_bytes(path, b"".join(parts))
    side = {"kind": "boundary", "noise_meta": data.noise_meta, "provenance": provenance or {}}
    atomic_write_text(sidecar_path(path), dumps_json(side))


def load_dataset(path) -> BoundaryDataset:
    r = _read(path, KIND_BOUNDARY)
    n, R, nb, nf, K, has_w, res = r.header(_BOUNDARY_HEADER)
    nodes = r.f64(nb * n).reshape(nb, n)
    weights = r.f64(nb)
    freqs = r.f64(nf)
    kweights = r.f64(nf) if has_w else None
    u = r.c128(nf * nb).reshape(nf, nb)
    du = r.c128(nf * nb).reshape(nf, nb)
    r.done()
    side = _read_sidecar(path)
    rule = SphereRule(n, R, nodes, weights, res)
    return BoundaryDataset(rule, freqs, u, du, K, kweights, side.get("noise_meta", {"kind": "none"}))


# -- spectral samples --------------------------------------------------------

def save_spectra(samples: SpectralSamples, path) -> None:
    has_w = samples.kweights is not None
    head = _SPECTRA_HEADER.pack(samples.n, samples.band, samples.dirs.size, len(samples.freqs), int(has_w))
    parts = [MAGIC, KIND_SPECTRA, head, _f64(samples.dirs.nodes), _f64(samples.dirs.weights),
             _f64(samples.freqs)]
    if has_w:
        parts.append(_f64(samples.kweights))
    parts.append(_c128(samples.vals))
    atomic_write_bytes(path, b"".join(parts))
    atomic_write_text(sidecar_path(path), dumps_json({"kind": "spectra", "source_meta": samples.source_meta}))


def load_spectra(path) -> SpectralSamples:
    r = _read(path, KIND_SPECTRA)
    n, band, nd, nf, has_w = r.header(_SPECTRA_HEADER)
    nodes = r.f64(nd * n).reshape(nd, n)
    weights = r.f64(nd)
    freqs = r.f64(nf)
    kweights = r.f64(nf) if has_w else None
    vals = r.c128(nf * nd).reshape(nf, nd)
    r.done()
    meta = _read_sidecar(path).get("source_meta", {})
    return SpectralSamples(DirectionSet(n, nodes, weights), freqs, vals, band, kweights, meta)


def save_spectra_csv(samples: SpectralSamples, path) -> None:
    atomic_write_text(path, spectra_csv(samples))
