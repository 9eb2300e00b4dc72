"""Command-line front end.

Subcommands: ``synth``, ``reconstruct``, ``stability-sweep``, ``bounds`` and
``selftest``.  Experiments are described by one YAML document (see
``configs/`` and the README).  Exit codes: 0 success, 1 usage or malformed
configuration, 2 numerical precondition violated, 3 I/O.
"""

from __future__ import annotations

import argparse
import io as _stdio
import csv
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np
import yaml

from . import io as hio
from .field import (GridSpec, SourceField, h2d_norm, l2_norm, make_bump,
                    make_truncated_power)
from .forward import MIN_SPHERE_RESOLUTION, add_noise, make_sphere_rule, radial_rule, sweep
from .spectral import assemble_spectra, make_direction_set, reconstruct
from .stability import (StabilityParams, array_digest, bound_rhs, case_threshold, epsilon_of_data,
                        mu, run_report, select_s0, direction_resolution)

logger = logging.getLogger("helmsrc")

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION, EXIT_IO = 0, 1, 2, 3
SWEEP_CSV_HEADER = "# helmsrc stability-sweep v1"
SWEEP_COLUMNS = ["K", "noise", "seed", "eps", "case", "s0", "mu_s0", "bound",
                 "measured_error", "relative_error", "status"]
MIN_RADIAL_NODES = 4


class UsageError(Exception):
    """Bad flags or a malformed configuration document."""


# -- configuration -----------------------------------------------------------

@dataclass
class ExperimentConfig:
    n: int
    R: float
    m: int
    source: dict
    d: int = 1
    K: float = 8.0
    radial_nodes: int = 64
    sphere_resolution: int = 256
    direction_resolution: int | None = None
    noise_levels: list = dc_field(default_factory=lambda: [0.0])
    seeds: list = dc_field(default_factory=lambda: [0])
    K_sweep: list = dc_field(default_factory=list)
    M: float | None = None
    C: float = 1.0
    out: str = "out"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise UsageError("configuration must be a mapping")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
        missing = [k for k in ("n", "R", "m", "source") if k not in raw]
        if missing:
            raise UsageError(f"missing configuration keys: {', '.join(missing)}")
        cfg = cls(**raw)
        cfg._coerce()
        cfg.validate()
        return cfg

    def _coerce(self):
        # YAML 1.1 reads "1e-3" as a string, so numbers are cast explicitly
        try:
            self.n, self.m, self.d = int(self.n), int(self.m), int(self.d)
            self.R, self.K, self.C = float(self.R), float(self.K), float(self.C)
            self.radial_nodes = int(self.radial_nodes)
            self.sphere_resolution = int(self.sphere_resolution)
            if self.direction_resolution is not None:
                self.direction_resolution = int(self.direction_resolution)
            if self.M is not None:
                self.M = float(self.M)
            self.noise_levels = [float(v) for v in self.noise_levels]
            self.seeds = [int(v) for v in self.seeds]
            self.K_sweep = [float(v) for v in self.K_sweep]
        except (TypeError, ValueError) as exc:
            raise UsageError(f"non-numeric configuration value ({exc})") from exc

    def validate(self):
        if not isinstance(self.source, dict) or "kind" not in self.source:
            raise UsageError("source must be a mapping with a 'kind'")
        if self.source["kind"] not in ("bump", "truncated_power", "file"):
            raise UsageError(f"unknown source kind {self.source['kind']!r}")
        if self.sphere_resolution < MIN_SPHERE_RESOLUTION:
            raise UsageError(f"sphere_resolution must be >= {MIN_SPHERE_RESOLUTION}")
        if self.radial_nodes < MIN_RADIAL_NODES:
            raise UsageError(f"radial_nodes must be >= {MIN_RADIAL_NODES}")
        if self.direction_resolution is not None and self.direction_resolution < 2:
            raise UsageError("direction_resolution must be >= 2")
        if 4 * self.d <= self.n:
            raise UsageError(f"smoothness condition 4d > n fails (d={self.d}, n={self.n})")
        if any(b <= a for a, b in zip(self.K_sweep, self.K_sweep[1:])):
            raise UsageError("K_sweep must be strictly ascending")
        if any(level < 0 for level in self.noise_levels):
            raise UsageError("noise levels must be nonnegative")
        if not self.seeds:
            raise UsageError("seeds list is empty")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n, float(self.R), self.m)

    def runs(self):
        """``(noise, seed)`` pairs; a zero level is run once, with no seed."""
        out = []
        for level in self.noise_levels:
            if level == 0:
                out.append((0.0, None))
            else:
                out.extend((float(level), int(s)) for s in self.seeds)
        return out


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise UsageError(f"{path}: not valid YAML ({exc})") from exc
    try:
        return ExperimentConfig.from_dict(raw)
    except TypeError as exc:
        raise UsageError(f"{path}: {exc}") from exc


def build_source(cfg: ExperimentConfig) -> SourceField:
    spec = cfg.grid
    src = dict(cfg.source)
    kind = src.pop("kind")
    if kind == "bump":
        return make_bump(spec, src.get("center"), float(src.get("width", 0.15)),
                         complex(src.get("amplitude", 1.0)), cfg.d)
    if kind == "truncated_power":
        return make_truncated_power(spec, float(src["radius"]), int(src.get("power", 2 * cfg.d - 1)),
                                    complex(src.get("amplitude", 1.0)), cfg.d)
    f = hio.load_field(src["path"])
    if f.spec != spec:
        raise ValueError(f"field file grid {f.spec} does not match configured grid {spec}")
    return f


def _norm_bound(cfg: ExperimentConfig, f: SourceField) -> float:
    return float(cfg.M) if cfg.M is not None else h2d_norm(f, cfg.d)


def _out_dir(cfg: ExperimentConfig, args) -> Path:
    out = Path(args.out if getattr(args, "out", None) else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _num(x) -> str:
    """Shortest round-trip text for a float, empty for missing values."""
    if x is None:
        return ""
    return repr(float(x))


def _dataset_name(K: float, level: float, seed) -> str:
    tag = "clean" if seed is None else f"noise{level:g}_seed{seed}"
    return f"data_K{K:g}_{tag}.bnd"


def _clean_dataset(f: SourceField, cfg: ExperimentConfig, K: float, threads: int):
    rule = make_sphere_rule(cfg.n, cfg.R, cfg.sphere_resolution)
    k, w = radial_rule(K, cfg.radial_nodes)
    return sweep(f, k, rule, K, w, threads=threads)


# -- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    out = _out_dir(cfg, args)
    f = build_source(cfg)
    hio.save_field(f, out / "source.fld")
    clean = _clean_dataset(f, cfg, float(cfg.K), args.threads)
    prov = {"config": asdict(cfg), "source_sha256": array_digest(f.values)}
    rows = []
    for level, seed in cfg.runs():
        data = clean if seed is None else add_noise(clean, level, seed)
        name = _dataset_name(cfg.K, level, seed)
        hio.save_dataset(data, out / name, prov)
        noise_eps = 0.0 if seed is None else epsilon_of_data(data - clean)
        rows.append((name, level, "" if seed is None else seed, epsilon_of_data(data), noise_eps))
    print(f"{'file':<36} {'noise':>8} {'seed':>6} {'eps_data':>14} {'eps_noise':>14}")
    for name, level, seed, e, en in rows:
        print(f"{name:<36} {level:>8.3g} {seed!s:>6} {e:>14.6e} {en:>14.6e}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(cfg, args)
    data = hio.load_dataset(args.data)
    if data.n != cfg.n:
        raise ValueError(f"dataset dimension n={data.n} does not match configuration n={cfg.n}")
    spec = cfg.grid
    s_cut = float(args.s_cut) if args.s_cut is not None else min(data.K, spec.nyquist)
    res = cfg.direction_resolution or direction_resolution(cfg.n, s_cut, cfg.R)
    samples = assemble_spectra(data, make_direction_set(cfg.n, res))
    rec = reconstruct(samples, s_cut, spec, cfg.d)
    stem = Path(args.data).stem
    hio.save_field(rec, out / f"{stem}_rec.fld")
    metrics = {"dataset": Path(args.data).name, "data_sha256": array_digest(data.u, data.du),
               "s_cut": s_cut, "direction_nodes": samples.dirs.size,
               "relative_l2_error": None, "warning": None}
    if args.reference:
        ref = hio.load_field(args.reference)
        if ref.spec != spec:
            raise ValueError(f"reference grid {ref.spec} does not match configured grid {spec}")
        ref_norm = l2_norm(ref)
        err = l2_norm(rec.with_values(rec.values - ref.values))
        # zero reference: the relative error is undefined, report the absolute one
        metrics["relative_l2_error"] = err / ref_norm if ref_norm > 0 else None
        metrics["absolute_l2_error"] = err
        if ref_norm == 0:
            metrics["warning"] = "reference is zero; relative error undefined"
    else:
        metrics["warning"] = "no reference source; error not computed"
    hio.atomic_write_text(out / f"{stem}_metrics.json", hio.dumps_json(metrics))
    rel = metrics["relative_l2_error"]
    print(f"s_cut {s_cut:g}  relative L2 error {'n/a' if rel is None else f'{rel:.6e}'}")
    return EXIT_OK


def _sweep_rows(cfg: ExperimentConfig, threads: int):
    f = build_source(cfg)
    spec = cfg.grid
    M = _norm_bound(cfg, f)
    Ks = cfg.K_sweep or [cfg.K]
    jobs = [(float(K), level, seed) for K in Ks for level, seed in cfg.runs()]

    cleans = {}
    for K in Ks:
        try:
            cleans[float(K)] = _clean_dataset(f, cfg, float(K), threads)
        except ValueError as exc:
            cleans[float(K)] = exc

    def run(job):
        K, level, seed = job
        base = {"K": K, "noise": level, "seed": seed}
        try:
            clean = cleans[K]
            if isinstance(clean, Exception):
                raise clean
            data = clean if seed is None else add_noise(clean, level, seed)
            params = StabilityParams(cfg.n, cfg.d, float(cfg.R), M, K, float(cfg.C))
            dirs = None
            if cfg.direction_resolution:
                dirs = make_direction_set(cfg.n, cfg.direction_resolution)
            rep = run_report(f, data, params, spec, clean=clean, dirs=dirs)
            return {**base, "status": "ok", "report": rep.to_dict()}
        except (ValueError, ArithmeticError) as exc:
            logger.warning("run K=%g noise=%g seed=%s failed: %s", K, level, seed, exc)
            return {**base, "status": f"error: {exc}", "report": None}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    return results, M


def _seed(row) -> str:
    return "" if row["seed"] is None else str(row["seed"])


def sweep_csv(results) -> str:
    buf = _stdio.StringIO()
    buf.write(SWEEP_CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in results:
        rep = r["report"] or {}
        w.writerow([_num(r["K"]), _num(r["noise"]), _seed(r),
                    _num(rep.get("eps")), rep.get("case", ""), _num(rep.get("s0")),
                    _num(rep.get("mu_s0")), _num(rep.get("bound")), _num(rep.get("measured_error")),
                    _num(rep.get("relative_error")), r["status"]])
    return buf.getvalue()


def cmd_stability_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    out = _out_dir(cfg, args)
    results, M = _sweep_rows(cfg, args.threads)
    hio.atomic_write_text(out / "stability_sweep.csv", sweep_csv(results))
    bundle = {"format": "helmsrc stability-sweep v1", "config": asdict(cfg), "M": M, "runs": results}
    hio.atomic_write_text(out / "stability_sweep.json", hio.dumps_json(bundle))
    print(f"{'K':>6} {'noise':>8} {'seed':>5} {'eps':>11} {'case':>9} {'s0':>9} "
          f"{'bound':>11} {'rel_err':>11}  status")
    for r in results:
        rep = r["report"]
        if rep is None:
            print(f"{r['K']:>6g} {r['noise']:>8.3g} {_seed(r):>5}  {r['status']}")
            continue
        rel = rep["relative_error"]
        print(f"{r['K']:>6g} {r['noise']:>8.3g} {_seed(r):>5} {rep['eps']:>11.4e} {rep['case']:>9} "
              f"{rep['s0']:>9.4g} {rep['bound']:>11.4e} {'n/a' if rel is None else f'{rel:.4e}':>11}  ok")
    return EXIT_OK


def cmd_bounds(args) -> int:
    if 4 * args.d <= args.n:
        raise UsageError(f"smoothness condition 4d > n fails (d={args.d}, n={args.n})")
    rows = []
    for s in args.mu_at or []:
        rows.append((f"mu(s={s:g}, K={args.K:g})", mu(s, args.K)))
    if args.eps is not None or args.ln_eps is not None:
        p = StabilityParams(args.n, args.d, args.R, args.M, args.K, args.C)
        eps = args.eps if args.ln_eps is None else None
        s0, case = select_s0(p, eps, ln_eps=args.ln_eps)
        rows.append(("threshold", case_threshold(p)))
        rows.append(("s0", s0))
        rows.append(("case", case))
        if s0 > p.K:
            rows.append(("mu_s0", mu(s0, p.K)))
        rows.append(("bound", bound_rhs(p, eps, ln_eps=args.ln_eps)))
    if not rows:
        raise UsageError("nothing to compute: give --mu-at and/or --eps/--ln-eps")
    if args.csv:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for name, v in rows:
            w.writerow([name, v if isinstance(v, str) else repr(float(v))])
    else:
        for name, v in rows:
            print(f"{name:<24} {v if isinstance(v, str) else format(v, '.10g')}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    """Fast sanity checks of each layer on a coarse problem."""
    from scipy.special import hankel1 as sp_hankel1
    from .specfun import hankel1
    from .spectral import fhat_boundary_matrix, fhat_direct_many, random_directions
    from .stability import factorial_inequality_check

    checks = []
    z = np.array([0.3, 2.0, 15.0, 80.0])
    for nu in (0.0, 0.5, 1.0, 2.5):
        err = np.max(np.abs(hankel1(nu, z) / sp_hankel1(nu, z) - 1))
        checks.append((f"hankel1 order {nu:g}", err < 1e-10, err))
    checks.append(("mu first branch", mu(1.1, 1.0) == 0.5, mu(1.1, 1.0)))
    checks.append(("mu at knee", abs(mu(2 ** 0.25, 1.0) - 1 / math.pi) < 1e-12, mu(2 ** 0.25, 1.0)))
    ok = factorial_inequality_check(1, 2, np.logspace(-3, 3, 50))
    checks.append(("factorial inequality d=1 n=2", ok, float(ok)))
    spec = GridSpec(2, 1.0, 65)
    f = make_bump(spec, None, 0.15)
    data = sweep(f, [1.0, 4.0], make_sphere_rule(2, 1.0, 64))
    dirs = random_directions(2, 8, 0).nodes
    B = fhat_boundary_matrix(data, range(2), dirs)
    A = np.array([fhat_direct_many(f, k * dirs) for k in data.freqs])
    err = float(np.max(np.abs(A - B)) / np.max(np.abs(A)))
    checks.append(("boundary identity n=2 (coarse)", err < 1e-6, err))
    for name, passed, val in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name:<34} {val:.3e}")
    return EXIT_OK if all(c[1] for c in checks) else EXIT_PRECONDITION


# -- parser ------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="helmsrc", description="Multi-frequency Helmholtz inverse source experiments.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=False):
        sp.add_argument("--config", required=True, help="YAML experiment description")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--threads", type=int, default=1)
        if seed:
            sp.add_argument("--seed", type=int, help="use this single noise seed")

    sp = sub.add_parser("synth", help="synthesize boundary datasets")
    common(sp, seed=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("reconstruct", help="reconstruct a source from a dataset")
    common(sp)
    sp.add_argument("--data", required=True, help="boundary dataset file")
    sp.add_argument("--reference", help="reference source field file")
    sp.add_argument("--s-cut", type=float, help="spectral cutoff (default: dataset band)")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("stability-sweep", help="K and noise sweep with stability reports")
    common(sp, seed=True)
    sp.set_defaults(func=cmd_stability_sweep)

    sp = sub.add_parser("bounds", help="mu, s0 and bound calculator")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--M", type=float, default=1.0)
    sp.add_argument("--K", type=float, default=10.0)
    sp.add_argument("--C", type=float, default=1.0)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--eps", type=float)
    g.add_argument("--ln-eps", type=float, help="natural log of eps, for very small values")
    sp.add_argument("--mu-at", type=float, action="append", help="evaluate mu at this s (repeatable)")
    sp.add_argument("--csv", action="store_true", help="emit CSV instead of a table")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("selftest", help="quick numerical sanity checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"helmsrc: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except hio.FormatError as exc:
        print(f"helmsrc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"helmsrc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError) as exc:
        print(f"helmsrc: precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
