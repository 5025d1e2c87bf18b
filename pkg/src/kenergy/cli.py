"""Command-line entry point: ``kenergy verify | compute | descend``.

Configuration is a flat ``key = value`` file (an optional ``[run]`` header is
accepted) with command-line flags taking precedence.  Every command writes a
JSON report; ``compute`` also writes a convergence CSV and ``descend`` a
trajectory CSV.  The exit status is 0 iff every record passes, 1 if some
record fails and 2 on configuration or input errors.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import checks, donaldson, functionals, futaki
from .chern import linear_path, reparametrized_path, smoothstep_path
from .checks import Record
from .geometry import MIN_RESOLUTION, Manifold, NotAdmissibleError, build_grid, default_grid
from .oracles import cohomology_reference
from .potentials import (
    Combination,
    Potential,
    RadialPotential,
    fourier_basis,
    harmonic_basis,
    random_potential,
    zero_potential,
    zonal_basis,
)

SECTION = "run"
QUANTITIES = ("M", "F", "L", "mu", "lambda")
FAMILIES = ("random", "fs", "radial", "zonal", "harmonic", "fourier")
PATHS = {"linear": linear_path, "reparam": reparametrized_path, "smoothstep": smoothstep_path}
METHODS = ("path", "lemma51", "cor52", "nopath")
REFINEMENTS = (0.5, 0.75, 1.0)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line, self.key = line, key


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    manifold: str = "CP1"
    resolution: tuple = ()
    symmetry: str = "none"
    k: tuple = ()
    suites: tuple = ()
    quantity: str = "M"
    method: str = "path"
    family: str = "random"
    coefficients: tuple = ()
    degrees: tuple = (2, 3, 4)
    path: str = "linear"
    n_t: int = 16
    field: str = "euler"
    samples: int = 3
    seed: int = 0
    scale: float = 0.1
    tol: float | None = None
    epsilon: float = 0.2
    steps: int = 200
    step_size: float = 1.0
    descent_tol: float = 1e-4
    out: str = "report.json"
    trajectory: str = ""
    convergence: str = ""
    threads: int = 1

    # -- validation -------------------------------------------------------
    def validate(self, lines: dict | None = None) -> "RunConfig":
        lines = lines or {}

        def fail(key, msg):
            raise ConfigError(msg, lines.get(key), key)

        if self.manifold not in ("CP1", "CP2", "T2"):
            fail("manifold", f"unsupported manifold {self.manifold!r}")
        if self.symmetry not in ("none", "torus", "radial"):
            fail("symmetry", f"unknown symmetry {self.symmetry!r}")
        if self.manifold == "T2" and self.symmetry != "none":
            fail("symmetry", "T2 grids have no symmetry reduction")
        n = 2 if self.manifold == "CP2" else 1
        if any(not 1 <= k <= n for k in self.k):
            fail("k", f"k must lie in 1..{n} on {self.manifold}")
        if self.quantity not in QUANTITIES:
            fail("quantity", f"expected one of {QUANTITIES}")
        if self.method not in METHODS:
            fail("method", f"expected one of {METHODS}")
        if self.family not in FAMILIES:
            fail("family", f"expected one of {FAMILIES}")
        if self.path not in PATHS:
            fail("path", f"expected one of {tuple(PATHS)}")
        for key in ("n_t", "samples", "threads"):
            if getattr(self, key) < 1:
                fail(key, "must be a positive integer")
        if self.steps < 0:
            fail("steps", "must be non-negative")
        if self.tol is not None and not self.tol > 0:
            fail("tol", "must be positive")
        if any(d < 1 for d in self.degrees):
            fail("degrees", "zonal degrees must be >= 1")
        unknown = [s for s in self.suites if s not in checks.SUITES and s != "all"]
        if unknown:
            fail("suites", f"unknown suite(s) {unknown}; available: {sorted(checks.SUITES)}")
        return self

    # -- serialisation -----------------------------------------------------
    def to_text(self) -> str:
        out = []
        for f in fields(self):
            out.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                           comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
        offset = 0
        if not text.lstrip().startswith("["):
            text = f"[{SECTION}]\n" + text
            offset = 1
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            if line is None and getattr(exc, "errors", None):
                line = exc.errors[0][0]
            raise ConfigError(str(exc).splitlines()[0], None if line is None else line - offset) from exc
        if parser.sections() != [SECTION]:
            raise ConfigError(f"expected a single [{SECTION}] section, found {parser.sections()}")
        lines = _key_lines(text, offset)
        return cls().updated(dict(parser[SECTION]), lines)

    def updated(self, raw: dict, lines: dict | None = None) -> "RunConfig":
        """Copy with string values from ``raw`` parsed into the typed fields."""
        lines = lines or {}
        kinds = {f.name: f for f in fields(self)}
        values = {}
        for key, text in raw.items():
            key = key.strip().replace("-", "_")
            if key not in kinds:
                raise ConfigError(f"unknown key {key!r}", lines.get(key), key)
            try:
                values[key] = _parse(key, text)
            except ValueError as exc:
                raise ConfigError(str(exc), lines.get(key), key) from exc
        return dataclasses.replace(self, **values).validate(lines)

    def as_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f in fields(self) for v in [getattr(self, f.name)]}

    # -- derived -----------------------------------------------------------
    @property
    def n(self) -> int:
        return 2 if self.manifold == "CP2" else 1

    @property
    def k_first(self) -> int:
        return self.k[0] if self.k else 1

    def suite_options(self) -> checks.SuiteOptions:
        return checks.SuiteOptions(self.manifold, self.resolution, self.symmetry, self.k, self.samples,
                                   self.seed, self.scale, self.n_t, self.tol)

    def grid(self, factor: float = 1.0):
        manifold = Manifold(self.manifold)
        if not self.resolution:
            base = default_grid(manifold, 1, self.symmetry)
            res = base.resolution
            if factor == 1.0:
                return base
        else:
            res = self.resolution
        return build_grid(manifold, _scaled(res, factor, self.manifold), self.symmetry)

    def side_path(self, suffix: str, explicit: str) -> Path:
        if explicit:
            return Path(explicit)
        out = Path(self.out)
        return out.with_name(out.stem + suffix)


_INT_TUPLES = {"resolution", "k", "degrees"}
_FLOAT_TUPLES = {"coefficients"}
_STR_TUPLES = {"suites"}
_INTS = {"n_t", "samples", "seed", "steps", "threads"}
_FLOATS = {"scale", "epsilon", "step_size", "descent_tol"}


def _parse(key: str, text: str):
    text = text.strip()
    if key in _INT_TUPLES | _FLOAT_TUPLES | _STR_TUPLES:
        items = [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]
        if key in _INT_TUPLES:
            return tuple(int(t) for t in items)
        if key in _FLOAT_TUPLES:
            return tuple(float(t) for t in items)
        return tuple(items)
    if key in _INTS:
        return int(text)
    if key in _FLOATS:
        return float(text)
    if key == "tol":
        return None if text.lower() in ("", "none", "default") else float(text)
    return text


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _key_lines(text: str, offset: int) -> dict:
    out = {}
    for i, line in enumerate(text.splitlines(), start=1):
        if "=" in line and not line.lstrip().startswith(("#", ";", "[")):
            out.setdefault(line.split("=", 1)[0].strip().replace("-", "_"), i - offset)
    return out


def _scaled(res, factor: float, kind: str) -> tuple:
    if factor == 1.0:
        return tuple(res)
    mins = {"CP1": ("rho", "theta"), "CP2": ("rho", "chi", "theta"), "T2": ("torus",)}[kind]
    out = []
    for i, r in enumerate(res):
        floor = MIN_RESOLUTION[mins[min(i, len(mins) - 1)]]
        out.append(max(floor, int(round(r * factor))))
    return tuple(out)


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    command: str
    config: RunConfig
    records: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.records) and all(r.passed for r in self.records)

    def as_dict(self) -> dict:
        ref = cohomology_reference(self.config.manifold).as_dict()
        return {
            "tool": "kenergy",
            "version": __version__,
            "command": self.command,
            "config": self.config.as_dict(),
            "reference": ref,
            "records": [r.as_dict() for r in self.records],
            "summary": {
                "total": len(self.records),
                "passed": sum(r.passed for r in self.records),
                "failed": sum(not r.passed for r in self.records),
                "pass": self.passed,
            },
            **self.extra,
        }

    def write(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.as_dict(), indent=2, default=_json_default) + "\n")

    def table(self) -> str:
        rows = [f"{'status':6} {'check':48} {'abs_err':>10} {'rel_err':>10} {'tol':>9} {'time[s]':>8}"]
        for r in self.records:
            rows.append(f"{'PASS' if r.passed else 'FAIL':6} {r.check[:48]:48} {r.abs_err:10.2e} "
                        f"{r.rel_err:10.2e} {r.tolerance:9.1e} {r.wall_time:8.2f}")
        rows.append(f"{sum(r.passed for r in self.records)}/{len(self.records)} checks passed")
        return "\n".join(rows)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj)}")


# ---------------------------------------------------------------------------
# commands


def build_potential(cfg: RunConfig) -> Potential:
    n = cfg.n
    c = cfg.coefficients
    if cfg.family == "fs":
        return zero_potential(n)
    if cfg.family == "random":
        family = "radial" if cfg.symmetry == "radial" else None
        return random_potential(cfg.manifold, np.random.default_rng(cfg.seed), cfg.scale, family)
    if cfg.family == "radial":
        return RadialPotential(n, tuple(c) or (0.0,))
    if cfg.family == "zonal":
        basis = zonal_basis(n, cfg.degrees)
    elif cfg.family == "harmonic":
        basis = harmonic_basis(n, 2)
    else:
        basis = fourier_basis(2)
    if len(c) > len(basis):
        raise ConfigError(f"{len(c)} coefficients for a basis of size {len(basis)}", key="coefficients")
    out = Combination(n)
    for b, v in zip(basis, c):
        out = out + v * b
    return out


def _reference_value(cfg: RunConfig, k: int):
    ref = cohomology_reference(cfg.manifold)
    if cfg.quantity == "mu":
        return ref.mu[k]
    if cfg.quantity == "lambda":
        return ref.lam
    if cfg.family == "fs" and cfg.quantity in ("M", "F", "L"):
        return 0.0
    return None


def compute_value(cfg: RunConfig, grid) -> complex | float:
    k = cfg.k_first
    if cfg.quantity == "mu":
        return functionals.mu_k(k, grid)
    if cfg.quantity == "lambda":
        return donaldson.lambda_const(grid)
    phi = build_potential(cfg)
    if cfg.quantity == "M":
        if cfg.method == "path":
            return functionals.k_energy_path(k, PATHS[cfg.path](phi, n_t=cfg.n_t), grid).value
        return functionals.k_energy(k, phi, grid, cfg.method, n_t=cfg.n_t).value
    if cfg.quantity == "L":
        return donaldson.donaldson_lagrangian(phi, PATHS[cfg.path](phi, n_t=cfg.n_t), grid).L
    lib = futaki.field_library(cfg.manifold)
    if cfg.field not in lib:
        raise ConfigError(f"unknown field {cfg.field!r}; available: {sorted(lib)}", key="field")
    return futaki.futaki(k, lib[cfg.field], phi, grid)


def cmd_compute(cfg: RunConfig) -> Report:
    rows = []
    for level, factor in enumerate(REFINEMENTS):
        grid = cfg.grid(factor)
        t0 = time.perf_counter()
        value = compute_value(cfg, grid)
        rows.append({"level": level, "resolution": "x".join(map(str, grid.resolution)),
                     "nodes": grid.size, "value": value, "wall_time": time.perf_counter() - t0,
                     "grid": grid.describe()})
    for prev, row in zip(rows, rows[1:]):
        row["change"] = abs(row["value"] - prev["value"])
    rows[0]["change"] = math.nan
    final = rows[-1]
    ref = _reference_value(cfg, cfg.k_first)
    name = f"compute/{cfg.quantity}{cfg.k_first if cfg.quantity in ('M', 'F', 'mu') else ''}"
    if ref is not None:
        rec = Record(name, "reference value", _scalar(final["value"]), ref, cfg.tol or 1e-8, "abs",
                     final["grid"], final["wall_time"])
    else:
        # relative for O(1) values, absolute for values that vanish (e.g. F on CP^n)
        fine, coarse = _scalar(final["value"]), _scalar(rows[-2]["value"])
        mode = "rel" if max(abs(fine), abs(coarse)) >= 1.0 else "abs"
        rec = Record(name + "/convergence", "plumbing", fine, coarse, cfg.tol or 1e-6, mode,
                     final["grid"], final["wall_time"], {"note": "finest against next-coarser grid"})
    path = cfg.side_path(".convergence.csv", cfg.convergence)
    write_convergence(path, rows)
    extra = {"value": final["value"], "convergence": [
        # the first level has no predecessor: null in JSON, "nan" in the CSV
        {k: (None if k == "change" and r["level"] == 0 else v) for k, v in r.items() if k != "grid"}
        for r in rows], "convergence_csv": str(path)}
    return Report("compute", cfg, [rec], extra)


def _scalar(v):
    v = complex(v)
    return v.real if v.imag == 0 else abs(v)


CONVERGENCE_COLUMNS = ("level", "resolution", "nodes", "value", "change", "wall_time")
TRAJECTORY_COLUMNS = ("step", "M_k", "residual", "step_size")


def write_convergence(path: Path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CONVERGENCE_COLUMNS)
        for r in rows:
            v = complex(r["value"])
            value = repr(v.real) if v.imag == 0 else repr(v)
            w.writerow([r["level"], r["resolution"], r["nodes"], value, repr(r["change"]),
                        f"{r['wall_time']:.3f}"])


def write_trajectory(path: Path, traj: functionals.Trajectory):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for s in traj.steps:
            w.writerow([s.step, repr(float(s.energy)), repr(float(s.residual)), repr(float(s.step_size))])


def cmd_descend(cfg: RunConfig) -> Report:
    if cfg.manifold == "T2":
        raise ConfigError("descent is implemented on CP1 and CP2", key="manifold")
    grid = cfg.grid()
    k = cfg.k_first
    basis, initial = checks.descent_setup(grid, cfg.epsilon, cfg.degrees)
    if cfg.coefficients:
        if len(cfg.coefficients) != len(basis):
            raise ConfigError(f"need {len(basis)} coefficients for degrees {cfg.degrees}",
                              key="coefficients")
        initial = np.array(cfg.coefficients, dtype=float)
    t0 = time.perf_counter()
    traj = functionals.descend(k, basis, initial, grid, steps=cfg.steps, step_size=cfg.step_size,
                               tol=cfg.descent_tol, n_t=cfg.n_t)
    wall = time.perf_counter() - t0
    path = cfg.side_path(".trajectory.csv", cfg.trajectory)
    write_trajectory(path, traj)
    E = traj.energies
    rise = float(np.max(np.diff(E))) if len(E) > 1 else 0.0
    g = grid.describe()
    diag = {"message": traj.message, "steps": len(E) - 1, "initial_energy": float(E[0]),
            "final_energy": float(E[-1]), "converged": traj.converged}
    recs = [
        Record(f"descend/k{k}/monotone", "descent", max(rise, 0.0), 0.0, 1e-12, "abs", g, wall, diag),
        Record(f"descend/k{k}/residual", "descent", float(traj.residuals[-1]), 0.0,
               cfg.descent_tol, "abs", g, 0.0, diag),
    ]
    extra = {"trajectory_csv": str(path), "descent": {**diag, "final_coefficients": traj.steps[-1].coeffs,
                                                       "degrees": list(cfg.degrees), "epsilon": cfg.epsilon}}
    return Report("descend", cfg, recs, extra)


def cmd_verify(cfg: RunConfig) -> Report:
    if not cfg.suites:
        raise ConfigError("no checks selected", key="suites")
    records = checks.run_suites(cfg.suites, cfg.suite_options())
    return Report("verify", cfg, records)


COMMANDS = {"verify": cmd_verify, "compute": cmd_compute, "descend": cmd_descend}


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kenergy", description="K-energy functionals on CP1, CP2 and T2")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("verify", "run verification suites"), ("compute", "compute one scalar"),
                      ("descend", "gradient descent of M_k")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--suite", help="comma-separated suite names (verify), or 'all'")
        p.add_argument("--manifold", choices=("CP1", "CP2", "T2"))
        p.add_argument("--k", help="k, or a comma-separated list of k")
        p.add_argument("--resolution", help="grid resolution, e.g. 32,32")
        p.add_argument("--tol", help="override every tolerance")
        p.add_argument("--out", help="report path (JSON)")
        p.add_argument("--threads", type=int, help="BLAS thread limit")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any configuration key")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        cfg = RunConfig.from_text(text)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    flags = {"suites": args.suite, "manifold": args.manifold, "k": args.k, "resolution": args.resolution,
             "tol": args.tol, "out": args.out,
             "threads": None if args.threads is None else str(args.threads)}
    overrides.update({k: v for k, v in flags.items() if v is not None})
    return cfg.updated(overrides) if overrides else cfg.validate()


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        with threadpool_limits(limits=cfg.threads):
            report = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"kenergy: configuration error: {exc}", file=sys.stderr)
        return 2
    except NotAdmissibleError as exc:
        print(f"kenergy: infeasible potential: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"kenergy: error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out)
    report.write(out)
    print(report.table())
    print(f"report written to {out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
