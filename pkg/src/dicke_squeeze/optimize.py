"""Scans of the steady-state squeezing over the drive ratio Omega and over N.

Every grid point is an independent steady-state solve, so scans fan out
over a process pool and are merged by sorting on ``(n, omega_ratio)``;
output does not depend on the worker count.
"""
from __future__ import annotations

import concurrent.futures as cf
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Iterable, Sequence

import numpy as np

from .dicke_core import ModelParams
from .liouville import DEFAULT_TOL_RESIDUAL, SteadyStateError, steady_state
from .squeezing import ConsistencyError, report

log = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class BoundaryNotFoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScanRow:
    n: int
    omega_ratio: float
    xi2_S: float | None
    xi2_E: float | None
    negativity: float | None
    converged: bool
    residual: float | None = None
    error: str | None = None


@dataclass
class ScanResult:
    rows: list[ScanRow]
    grid: dict = field(default_factory=dict)

    def failures(self) -> list[ScanRow]:
        return [r for r in self.rows if not r.converged]

    def success_fraction(self) -> float:
        return 1.0 if not self.rows else 1.0 - len(self.failures()) / len(self.rows)

    def for_n(self, n: int) -> list[ScanRow]:
        return [r for r in self.rows if r.n == n]


def evaluate_point(n: int, omega_ratio: float, tol_residual: float = DEFAULT_TOL_RESIDUAL) -> ScanRow:
    """Steady state and squeezing report at one ``(N, Omega)``; errors are kept in-row."""
    try:
        sol = steady_state(ModelParams.from_ratio(n, omega_ratio), tol_residual=tol_residual)
        rep = report(sol.state)
    except (SteadyStateError, ConsistencyError, ValueError) as exc:
        return ScanRow(n, float(omega_ratio), None, None, None, False, error=f"{type(exc).__name__}: {exc}")
    return ScanRow(n, float(omega_ratio), rep.xi2_S, rep.xi2_E, rep.negativity, True, sol.residual_norm)


def _evaluate_packed(args):
    return evaluate_point(*args)


def scan(
    n_list: Sequence[int],
    omega_grid: Sequence[float],
    *,
    per_n: bool = False,
    workers: int = 1,
    tol_residual: float = DEFAULT_TOL_RESIDUAL,
) -> ScanResult:
    """Steady-state squeezing on the grid ``n_list x omega_grid``.

    With ``per_n`` the grid is read as Omega/N and scaled for each N.
    Negative Omega is accepted (the squeezing is even in Omega).
    """
    n_list = sorted({int(n) for n in n_list})
    grid = [float(g) for g in omega_grid]
    if not n_list or not grid:
        raise ValueError("scan needs at least one N and one grid value")
    if min(n_list) < 2:
        raise ValueError("squeezing needs N >= 2")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    points = sorted({(n, g * n if per_n else g) for n in n_list for g in grid})
    tasks = [(n, om, tol_residual) for n, om in points]
    if workers == 1:
        rows = [evaluate_point(*t) for t in tasks]
    else:
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_packed, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    rows.sort(key=lambda r: (r.n, r.omega_ratio))
    meta = {
        "axis": "omega_over_n" if per_n else "omega_ratio",
        "values": grid,
        "min": min(grid),
        "max": max(grid),
        "count": len(grid),
        "n": n_list,
    }
    if len(grid) > 1:
        meta["spacing"] = (max(grid) - min(grid)) / (len(grid) - 1)
    return ScanResult(rows, meta)


def xi2_at(n: int, omega_ratio: float, tol_residual: float = DEFAULT_TOL_RESIDUAL) -> float:
    return report(steady_state(ModelParams.from_ratio(n, omega_ratio), tol_residual=tol_residual).state).xi2_S


@dataclass(frozen=True)
class OptimumRecord:
    n: int
    omega_opt: float
    xi2_min: float
    omega_boundary: float | None
    bracket: tuple[float, float]
    tolerance: float
    evaluations: int
    unimodal: bool = True

    @property
    def omega_opt_over_n_sq(self) -> float:
        return (self.omega_opt / self.n) ** 2

    def as_dict(self) -> dict:
        d = asdict(self)
        d["bracket"] = list(self.bracket)
        d["omega_opt_over_n_sq"] = self.omega_opt_over_n_sq
        return d


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float,
                   max_iter: int = 200) -> tuple[float, float, int]:
    """Minimize a unimodal ``f`` on ``[lo, hi]`` down to bracket width ``tol``.

    Returns ``(x_best, f_best, evaluations)`` where ``x_best`` is the best
    point actually evaluated.
    """
    a, b = float(lo), float(hi)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    best = min((fc, c), (fd, d))
    while b - a > tol and evals < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
            best = min(best, (fc, c))
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
            best = min(best, (fd, d))
        evals += 1
    return best[1], best[0], evals


def default_coarse_grid(n: int, count: int = 25) -> np.ndarray:
    """Coarse Omega grid for seeding brackets: Omega/N over (0, 0.6]."""
    return n * np.linspace(0.6 / count, 0.6, count)


def minimize_xi2(
    n: int,
    bracket: tuple[float, float] | None = None,
    *,
    tol: float | None = None,
    with_boundary: bool = True,
    coarse: Sequence[float] | None = None,
    tol_residual: float = DEFAULT_TOL_RESIDUAL,
) -> OptimumRecord:
    """Optimal drive ratio and the minimal steady-state squeezing at fixed N.

    Without an explicit ``bracket`` a coarse grid seeds one around its
    argmin.  The three-point test (middle value below both ends) guards the
    golden-section refinement; if it fails the best grid point is returned
    and the record is flagged ``unimodal=False``.
    """
    if n < 2:
        raise ValueError("squeezing needs N >= 2")
    tol = 1e-6 * n if tol is None else tol
    cache: dict[float, float] = {}

    def f(om: float) -> float:
        if om not in cache:
            cache[om] = xi2_at(n, om, tol_residual)
        return cache[om]

    if bracket is None:
        grid = np.asarray(default_coarse_grid(n) if coarse is None else coarse, dtype=float)
        vals = np.array([f(float(g)) for g in grid])
        i = int(np.argmin(vals))
        lo = float(grid[i - 1]) if i > 0 else 0.0
        hi = float(grid[i + 1]) if i + 1 < len(grid) else float(grid[i]) * 1.5
        mid = float(grid[i])
    else:
        lo, hi = map(float, bracket)
        if not 0 <= lo < hi:
            raise ValueError(f"invalid bracket {bracket}")
        mid = 0.5 * (lo + hi)
    f_lo = f(lo) if lo > 0 else 1.0  # xi2 -> 1 as Omega -> 0
    unimodal = f(mid) <= min(f_lo, f(hi))
    if unimodal:
        x_opt, f_opt, _ = golden_section(f, lo, hi, tol)
        if f(mid) < f_opt:
            x_opt, f_opt = mid, f(mid)
    else:
        log.warning("N=%d: bracket (%g, %g) failed the three-point test; using grid argmin", n, lo, hi)
        x_opt, f_opt = min(((v, k) for k, v in cache.items()))[::-1]
    boundary = find_boundary(n, tol_residual=tol_residual) if with_boundary else None
    return OptimumRecord(n, x_opt, f_opt, boundary, (lo, hi), tol, len(cache), unimodal)


def find_boundary(
    n: int,
    *,
    tol: float | None = None,
    max_ratio: float = 10.0,
    tol_residual: float = DEFAULT_TOL_RESIDUAL,
) -> float:
    """Largest Omega at which the steady state is still squeezed (xi2 = 1 crossing).

    A grid in Omega/N (fine up to 1.2, coarse up to ``max_ratio``) locates
    the last sign change of ``xi2 - 1``; bisection then refines it to
    ``tol`` (default ``1e-8 * N``).
    """
    if n < 2:
        raise ValueError("squeezing needs N >= 2")
    tol = 1e-8 * n if tol is None else tol
    fine = np.arange(0.05, min(1.2, max_ratio) + 1e-12, 0.05)
    ratios = np.concatenate([fine, np.arange(1.5, max_ratio + 1e-12, 0.5)])
    grid = n * ratios
    below = [xi2_at(n, float(om), tol_residual) < 1.0 for om in grid]
    if not any(below):
        raise BoundaryNotFoundError(f"N={n}: no squeezed steady state on the Omega grid")
    last = max(i for i, b in enumerate(below) if b)
    if last == len(grid) - 1:
        raise BoundaryNotFoundError(f"N={n}: still squeezed at Omega={grid[-1]:g}; no crossing below {max_ratio}N")
    lo, hi = float(grid[last]), float(grid[last + 1])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if xi2_at(n, mid, tol_residual) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def optimize_range(n_values: Iterable[int], *, with_boundary: bool = True, workers: int = 1,
                   tol_residual: float = DEFAULT_TOL_RESIDUAL) -> list[OptimumRecord]:
    n_values = sorted({int(n) for n in n_values})
    if workers == 1:
        return [minimize_xi2(n, with_boundary=with_boundary, tol_residual=tol_residual) for n in n_values]
    with cf.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(minimize_xi2, n, with_boundary=with_boundary, tol_residual=tol_residual)
                   for n in n_values]
        return sorted((fut.result() for fut in futures), key=lambda r: r.n)


@dataclass(frozen=True)
class TrendFit:
    """Least-squares fit ``(omega_opt/N)**2 = a ln N + b``."""

    a: float
    b: float
    residuals: np.ndarray
    jackknife_a: float
    jackknife_b: float
    n_values: tuple[int, ...]

    def as_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "residuals": [float(r) for r in self.residuals],
            "rms_residual": float(np.sqrt(np.mean(self.residuals ** 2))),
            "jackknife_a": self.jackknife_a,
            "jackknife_b": self.jackknife_b,
            "n_values": list(self.n_values),
        }


def _lstsq_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    design = np.column_stack([x, np.ones_like(x)])
    if np.linalg.matrix_rank(design) < 2:
        raise ValueError("degenerate design matrix: need at least two distinct N")
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(a), float(b)


def fit_trend(records: Sequence[OptimumRecord]) -> TrendFit:
    if len(records) < 4:
        raise ValueError("fit_trend needs at least 4 records")
    n = np.array([r.n for r in records], dtype=float)
    x = np.log(n)
    y = np.array([r.omega_opt_over_n_sq for r in records])
    a, b = _lstsq_line(x, y)
    resid = y - (a * x + b)
    # jackknife standard errors
    m = len(records)
    loo = np.array([_lstsq_line(np.delete(x, i), np.delete(y, i)) for i in range(m)])
    spread = np.sqrt((m - 1) / m * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return TrendFit(a, b, resid, float(spread[0]), float(spread[1]), tuple(int(v) for v in n))
