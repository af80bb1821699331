"""Command-line front end: steady states, scans, optimization and self-checks.

Every output starts with the code version and an echo of the run
configuration (worker count excluded, so scans are byte-identical for any
``--workers``).  CSV output carries these as ``#`` comment lines above the
header row; JSON output carries them as top-level keys and validates
against ``data/output_schema.json``.

Exit codes: 0 ok, 2 solver failure, 3 partial scan (< 99% of points
converged), 4 table or oracle mismatch, 5 integrator failure, 64 usage.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .dicke_core import ModelParams, dicke_basis_state, trace
from .liouville import (DEFAULT_ATOL, DEFAULT_RTOL, DEFAULT_TOL_RESIDUAL, IntegrationError,
                        SteadyStateError, evolve, steady_state)
from .optimize import BoundaryNotFoundError, fit_trend, minimize_xi2, scan
from .reduction import pauli_expectations
from .squeezing import ConsistencyError, report, xi2_general

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_PARTIAL_SCAN = 3
EXIT_MISMATCH = 4
EXIT_INTEGRATOR = 5
EXIT_USAGE = 64

SCAN_COLUMNS = ("n", "omega_ratio", "xi2_S", "xi2_E", "negativity")
MIN_SCAN_SUCCESS = 0.99


def package_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def load_output_schema() -> dict:
    from importlib import resources

    return json.loads((resources.files("dicke_squeeze") / "data" / "output_schema.json").read_text(encoding="utf-8"))


class UsageError(ValueError):
    pass


def parse_int_list(text: str) -> list[int]:
    """``"2,4,8"``, ``"2:9"`` (inclusive) or ``"8:256:8"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            if len(bits) not in (2, 3):
                raise UsageError(f"bad integer range {part!r}")
            step = bits[2] if len(bits) == 3 else 1
            if step <= 0 or bits[1] < bits[0]:
                raise UsageError(f"bad integer range {part!r}")
            out.extend(range(bits[0], bits[1] + 1, step))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty integer list {text!r}")
    return out


def parse_grid(text: str) -> list[float]:
    """``"0.5,1,2"`` or ``"min:max:count"`` with optional ``":log"``."""
    if ":" not in text:
        vals = [float(v) for v in text.split(",") if v.strip()]
    else:
        bits = text.split(":")
        spacing = "linear"
        if bits[-1] in ("lin", "linear", "log"):
            spacing = bits.pop()
        if len(bits) != 3:
            raise UsageError(f"grid spec must be min:max:count[:log], got {text!r}")
        lo, hi, count = float(bits[0]), float(bits[1]), int(bits[2])
        if count < 1 or hi < lo:
            raise UsageError(f"bad grid spec {text!r}")
        if spacing == "log":
            if lo <= 0:
                raise UsageError("log grid needs min > 0")
            vals = list(np.geomspace(lo, hi, count))
        else:
            vals = list(np.linspace(lo, hi, count))
    if not vals:
        raise UsageError(f"empty grid {text!r}")
    return [float(v) for v in vals]


@dataclass
class RunConfig:
    command: str
    n: list[int] = field(default_factory=list)
    omega: list[float] = field(default_factory=list)
    per_n: bool = False
    fmt: str = "csv"
    out: str | None = None
    tol_residual: float = DEFAULT_TOL_RESIDUAL
    tol_ode: float = DEFAULT_RTOL
    workers: int = 1
    seed: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def validate(self):
        if self.tol_residual <= 0 or self.tol_ode <= 0:
            raise UsageError("tolerances must be positive")
        if self.workers < 1:
            raise UsageError("--workers must be >= 1")
        if self.fmt not in ("csv", "json"):
            raise UsageError("--format must be csv or json")

    def echo(self) -> dict[str, Any]:
        """Configuration as written into output headers (no worker count)."""
        d = {
            "command": self.command,
            "n": self.n,
            "omega": self.omega,
            "omega_axis": "omega_over_n" if self.per_n else "omega_ratio",
            "format": self.fmt,
            "tol_residual": self.tol_residual,
            "tol_ode": self.tol_ode,
            "seed": self.seed,
        }
        d.update(self.extra)
        return d


def _clean(value):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_csv(cfg: RunConfig, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    buf.write(f"# dicke_squeeze {package_version()}\n")
    buf.write("# config: " + json.dumps(_clean(cfg.echo()), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt_cell(v) for v in row])
    return buf.getvalue()


def render_json(cfg: RunConfig, payload: dict[str, Any]) -> str:
    doc = {"version": package_version(), "command": cfg.command, "config": cfg.echo()}
    doc.update(payload)
    return json.dumps(_clean(doc), sort_keys=True, indent=1, allow_nan=False) + "\n"


def emit(cfg: RunConfig, text: str):
    if cfg.out:
        Path(cfg.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def cmd_steady(cfg: RunConfig) -> int:
    if len(cfg.n) != 1 or len(cfg.omega) != 1:
        raise UsageError("steady takes a single --n and a single Omega")
    n = cfg.n[0]
    om = cfg.omega[0] * n if cfg.per_n else cfg.omega[0]
    try:
        sol = steady_state(ModelParams.from_ratio(n, om), tol_residual=cfg.tol_residual)
    except SteadyStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    rep = report(sol.state) if n >= 2 else None
    stats = {k: v for k, v in sol.solver_stats.items() if not k.endswith("_seconds")}
    if cfg.fmt == "json":
        payload = {
            "omega_ratio": om,
            "residual": sol.residual_norm,
            "solver": stats,
            "report": rep.to_json_dict() if rep else None,
        }
        if not cfg.extra.get("omit_state"):
            payload["state"] = sol.state.to_json_dict()
        emit(cfg, render_json(cfg, payload))
    else:
        rows = [("omega_ratio", om), ("residual", sol.residual_norm), ("trace", stats["trace"])]
        if rep:
            rows += [(k, v) for k, v in rep.to_json_dict().items()
                     if isinstance(v, (int, float)) and not isinstance(v, bool) and k != "n"]
            rows += list(rep.expectations.as_dict().items())
        emit(cfg, render_csv(cfg, ("quantity", "value"), rows))
    return EXIT_OK


def cmd_scan(cfg: RunConfig) -> int:
    result = scan(cfg.n, cfg.omega, per_n=cfg.per_n, workers=cfg.workers, tol_residual=cfg.tol_residual)
    if cfg.fmt == "json":
        rows = [{"n": r.n, "omega_ratio": r.omega_ratio, "xi2_S": r.xi2_S, "xi2_E": r.xi2_E,
                 "negativity": r.negativity, "converged": r.converged, "error": r.error} for r in result.rows]
        emit(cfg, render_json(cfg, {"grid": result.grid, "rows": rows}))
    else:
        emit(cfg, render_csv(cfg, SCAN_COLUMNS, [(r.n, r.omega_ratio, r.xi2_S, r.xi2_E, r.negativity)
                                                 for r in result.rows]))
    for r in result.failures():
        print(f"warning: N={r.n} Omega={r.omega_ratio!r}: {r.error}", file=sys.stderr)
    return EXIT_OK if result.success_fraction() >= MIN_SCAN_SUCCESS else EXIT_PARTIAL_SCAN


def cmd_optimize(cfg: RunConfig) -> int:
    with_boundary = not cfg.extra.get("no_boundary", False)
    records, failed = [], []
    for n in sorted(set(cfg.n)):
        try:
            records.append(minimize_xi2(n, with_boundary=with_boundary, tol_residual=cfg.tol_residual))
        except (SteadyStateError, ConsistencyError, BoundaryNotFoundError) as exc:
            print(f"warning: N={n}: {exc}", file=sys.stderr)
            failed.append(n)
    trend = None
    if cfg.extra.get("trend") and len(records) >= 4:
        trend = fit_trend(records).as_dict()
    columns = ("n", "omega_opt", "xi2_min", "omega_boundary", "omega_opt_over_n_sq", "unimodal")
    rows = [(r.n, r.omega_opt, r.xi2_min, r.omega_boundary, r.omega_opt_over_n_sq, r.unimodal) for r in records]
    if cfg.fmt == "json":
        emit(cfg, render_json(cfg, {"rows": [dict(zip(columns, row)) for row in rows],
                                    "failed": failed, "trend": trend}))
    else:
        emit(cfg, render_csv(cfg, columns, rows))
        if trend:
            print("trend: (omega_opt/n)^2 = {a!r} ln n + {b!r}  (jackknife {jackknife_a:.2g}, {jackknife_b:.2g})"
                  .format(**trend), file=sys.stderr)
    return EXIT_SOLVER if failed else EXIT_OK


def initial_state(spec: str, n: int):
    if spec == "ground":
        return dicke_basis_state(n, 0)
    if spec == "excited":
        return dicke_basis_state(n, n)
    if spec.startswith("dicke:"):
        k = int(spec.split(":", 1)[1])
        if not 0 <= k <= n:
            raise UsageError(f"dicke:k needs 0 <= k <= {n}")
        return dicke_basis_state(n, k)
    raise UsageError(f"initial state must be ground, excited or dicke:k, got {spec!r}")


def cmd_evolve(cfg: RunConfig) -> int:
    if len(cfg.n) != 1 or len(cfg.omega) != 1:
        raise UsageError("evolve takes a single --n and a single Omega")
    n = cfg.n[0]
    if n < 2:
        raise UsageError("evolve needs N >= 2")
    om = cfg.omega[0] * n if cfg.per_n else cfg.omega[0]
    params = ModelParams.from_ratio(n, om)
    rho0 = initial_state(cfg.extra["initial"], n)
    try:
        traj = evolve(rho0, params, cfg.extra["t_final"], n_samples=cfg.extra["samples"],
                      rtol=cfg.tol_ode, atol=cfg.tol_ode * DEFAULT_ATOL / DEFAULT_RTOL)
    except IntegrationError as exc:
        print(f"error: integrator failed at t={exc.t_fail!r}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    rows = [(float(t), xi2_general(pauli_expectations(s), n), trace(s) - 1.0) for t, s in traj]
    try:
        steady = report(steady_state(params, tol_residual=cfg.tol_residual).state).xi2_S
    except SteadyStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    columns = ("t", "xi2_S", "trace_error")
    if cfg.fmt == "json":
        emit(cfg, render_json(cfg, {"rows": [dict(zip(columns, r)) for r in rows], "steady_xi2_S": steady}))
    else:
        emit(cfg, render_csv(cfg, columns, rows))
    print(f"final xi2_S {rows[-1][1]!r}, steady-state xi2_S {steady!r}", file=sys.stderr)
    return EXIT_OK


def cmd_verify_table(cfg: RunConfig) -> int:
    from .table import DEFAULT_SEED, TableChecksumError, load_table, verify_table

    try:
        table = load_table(cfg.extra.get("table"))
    except TableChecksumError as exc:
        print(f"table mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    seed = DEFAULT_SEED if cfg.seed is None else cfg.seed
    check = verify_table(table, samples=cfg.extra["samples"], seed=seed, extra_omegas=(0.0,))
    print(f"max relative error {check.max_rel_error:.3e} over {check.n_points} points "
          f"(N={min(table)}..{max(table)}, tolerance {check.rel_tol:g})")
    for m in check.mismatches:
        print(f"table mismatch: N={m.n} Omega={m.omega!r} table={m.table_value!r} "
              f"numeric={m.numeric_value!r} rel={m.rel_error:.3e}", file=sys.stderr)
    return EXIT_OK if check.ok else EXIT_MISMATCH


def cmd_verify_oracle(cfg: RunConfig) -> int:
    from .oracle import MAX_STEADY_N, embed, oracle_steady_state

    tol = cfg.extra["tol"]
    worst = 0.0
    bad = []
    for n in cfg.n:
        if not 1 <= n <= MAX_STEADY_N:
            raise UsageError(f"oracle supports 1 <= N <= {MAX_STEADY_N}")
        for om in cfg.omega:
            params = ModelParams.from_ratio(n, om * n if cfg.per_n else om)
            ref = oracle_steady_state(params)
            got = embed(steady_state(params, tol_residual=cfg.tol_residual).state)
            err = float(np.max(np.abs(ref - got)))
            worst = max(worst, err)
            if not err <= tol:
                bad.append((n, params.omega_ratio, err))
    print(f"max entrywise difference {worst:.3e} (tolerance {tol:g})")
    for n, om, err in bad:
        print(f"oracle mismatch: N={n} Omega={om!r} diff={err:.3e}", file=sys.stderr)
    return EXIT_MISMATCH if bad else EXIT_OK


COMMANDS = {
    "steady": cmd_steady,
    "scan": cmd_scan,
    "optimize": cmd_optimize,
    "evolve": cmd_evolve,
    "verify-table": cmd_verify_table,
    "verify-oracle": cmd_verify_oracle,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--tol-residual", type=float, default=DEFAULT_TOL_RESIDUAL)
    common.add_argument("--tol-ode", type=float, default=DEFAULT_RTOL, help="relative ODE tolerance")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    def omega_args(p, required=True, default=None):
        g = p.add_mutually_exclusive_group(required=required and default is None)
        g.add_argument("--omega-ratio", help="Omega = omega/Gamma: list or min:max:count[:log]")
        g.add_argument("--omega-over-n", help="Omega/N: list or min:max:count[:log]")
        p.set_defaults(omega_default=default)

    parser = _Parser(prog="dicke-squeeze", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {package_version()}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("steady", parents=[common], help="steady state and squeezing report at one point")
    p.add_argument("--n", required=True)
    omega_args(p)
    p.add_argument("--omit-state", action="store_true", help="leave the coefficient dump out of JSON")

    p = sub.add_parser("scan", parents=[common], help="squeezing over a grid of N and Omega")
    p.add_argument("--n", required=True)
    omega_args(p)

    p = sub.add_parser("optimize", parents=[common], help="optimal Omega, minimal xi2 and boundary per N")
    p.add_argument("--n", required=True)
    p.add_argument("--no-boundary", action="store_true")
    p.add_argument("--trend", action="store_true", help="fit (omega_opt/n)^2 against ln n")

    p = sub.add_parser("evolve", parents=[common], help="time evolution from a Dicke basis state")
    p.add_argument("--n", required=True)
    omega_args(p)
    p.add_argument("--initial", default="ground", help="ground, excited or dicke:k")
    p.add_argument("--t-final", type=float, default=50.0)
    p.add_argument("--samples", type=int, default=101)

    p = sub.add_parser("verify-table", parents=[common], help="closed-form table against the solver")
    p.add_argument("--table", help="coefficient file (default: the shipped one)")
    p.add_argument("--samples", type=int, default=25)

    p = sub.add_parser("verify-oracle", parents=[common], help="steady states against the dense reference")
    p.add_argument("--n", default="1:5")
    omega_args(p, default="0,0.5,1,2,5")
    p.add_argument("--tol", type=float, default=1e-9)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command, fmt=args.fmt, out=args.out, tol_residual=args.tol_residual,
                    tol_ode=args.tol_ode, workers=args.workers, seed=args.seed)
    if getattr(args, "n", None) is not None:
        cfg.n = parse_int_list(args.n)
        if min(cfg.n) < 1:
            raise UsageError("N must be positive")
    grid = getattr(args, "omega_ratio", None)
    if getattr(args, "omega_over_n", None) is not None:
        grid, cfg.per_n = args.omega_over_n, True
    if grid is None:
        grid = getattr(args, "omega_default", None)
    if grid is not None:
        cfg.omega = parse_grid(grid)
    for key in ("omit_state", "no_boundary", "trend", "initial", "t_final", "samples", "table", "tol"):
        if hasattr(args, key):
            cfg.extra[key] = getattr(args, key)
    if cfg.command == "evolve" and not cfg.extra["t_final"] > 0:
        raise UsageError("--t-final must be positive")
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.verbose:
        import logging
        logging.basicConfig(level=logging.DEBUG, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        t0 = time.perf_counter()
        code = COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.verbose:
        print(f"{cfg.command} finished in {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
