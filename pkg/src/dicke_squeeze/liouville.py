"""Rate equation for the driven Dicke master equation in the symmetric sector.

Writing the collective decay as ``Gamma * D[J-]`` and the drive as
``(omega/2) (J+ + J-)``, the coefficient matrix ``X`` evolves as (raw
scaling, ``k = m + N/2``)::

    dX(a,b)/dt = Gamma (N-a)(N-b) X(a+1,b+1)
               - Gamma/2 [a(N-a+1) + b(N-b+1)] X(a,b)
               + omega/2 [(N-a) X(a+1,b) + (N-b) X(a,b+1)
                          - a X(a-1,b) - b X(a,b-1)]

with every term that references an index outside ``0..N`` dropped.  In
normalized scaling the same equation holds with the coefficients conjugated
by ``sqrt(C(N,k))`` factors, which turns them into the familiar
``sqrt((N-a)(a+1))`` ladder elements.

The steady state is found from a sparse linear system in the packed
unknowns, with one diagonal equation swapped for the trace condition.
"""
from __future__ import annotations

import functools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.integrate import solve_ivp

from .dicke_core import (
    ModelParams,
    Scaling,
    SymmetricState,
    binom_ln_row,
    diagonal_offset,
    n_unknowns,
    pack,
    packed_index,
    trace,
)

log = logging.getLogger(__name__)

DEFAULT_TOL_RESIDUAL = 1e-10
DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10


class SteadyStateError(RuntimeError):
    """The constrained steady-state system could not be solved accurately."""


class SingularSystemError(SteadyStateError):
    pass


class IntegrationError(RuntimeError):
    def __init__(self, message: str, t_fail: float):
        super().__init__(f"{message} (at t={t_fail:.6g})")
        self.t_fail = t_fail


def _ladder(n: int, scaling: Scaling) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients multiplying X(k+1) and X(k-1) in the drive term, per k.

    ``up[k]`` is zero at ``k = n`` and ``down[k]`` is zero at ``k = 0``.
    """
    k = np.arange(n + 1, dtype=float)
    if scaling is Scaling.RAW:
        up = n - k
        down = k.copy()
    else:
        up = np.sqrt((n - k) * (k + 1))
        down = np.sqrt(k * (n - k + 1))
    return up, down


def _decay_rate(n: int) -> np.ndarray:
    k = np.arange(n + 1, dtype=float)
    return k * (n - k + 1)


def rhs(state: SymmetricState, params: ModelParams) -> SymmetricState:
    """Time derivative of the coefficient matrix, in the state's own scaling.

    Evaluated with dense array shifts; the sparse assembly in
    :class:`RateSystem` is an independent implementation of the same map.
    """
    n = state.n
    if params.n_particles != n:
        raise ValueError(f"state has N={n} but params have N={params.n_particles}")
    g, w = params.gamma, params.omega
    x = state.matrix()
    up, down = _ladder(n, state.scaling)
    decay = _decay_rate(n)

    out = -0.5 * g * (decay[:, None] + decay[None, :]) * x
    # feed from (a+1, b+1); in both scalings the factor is up[a] * up[b]
    out[:-1, :-1] += g * np.outer(up[:-1], up[:-1]) * x[1:, 1:]
    drive = np.zeros_like(x)
    drive[:-1, :] += up[:-1, None] * x[1:, :]
    drive[1:, :] -= down[1:, None] * x[:-1, :]
    out += 0.5 * w * (drive + drive.T)
    return SymmetricState(n, pack(out, atol=None), state.scaling)


@functools.lru_cache(maxsize=16)
def _coupling_pattern(n: int):
    """Row/column indices of every coupling, grouped by term kind."""
    pieces = {key: ([], [], [], []) for key in ("feed", "decay", "up_a", "up_b", "down_a", "down_b")}
    for d in range(n + 1):
        a = np.arange(n + 1 - d)
        b = a + d
        row = diagonal_offset(n, d) + a
        for key, (aa, bb, mask) in {
            "feed": (a + 1, b + 1, b + 1 <= n),
            "decay": (a, b, np.ones_like(a, dtype=bool)),
            "up_a": (a + 1, b, a + 1 <= n),
            "up_b": (a, b + 1, b + 1 <= n),
            "down_a": (a - 1, b, a >= 1),
            "down_b": (a, b - 1, b >= 1),
        }.items():
            rs, cs, as_, bs = pieces[key]
            rs.append(row[mask])
            cs.append(packed_index(n, aa[mask], bb[mask]))
            as_.append(a[mask])
            bs.append(b[mask])
    return {key: tuple(np.concatenate(p) for p in parts) for key, parts in pieces.items()}


@dataclass(frozen=True, eq=False)
class RateSystem:
    """Sparse matrix of the rate equation acting on packed coefficients.

    Rows and columns follow the packed (diagonal-major) order, so couplings
    stay within one diagonal of their own.  Coefficients of entries that
    fold onto the same stored unknown (e.g. ``X(a+1, a)`` on the main
    diagonal) are summed.
    """

    params: ModelParams
    scaling: Scaling
    matrix: sp.csr_matrix

    @classmethod
    def assemble(cls, params: ModelParams, scaling: Scaling = Scaling.NORMALIZED) -> "RateSystem":
        scaling = Scaling(scaling)
        n = params.n_particles
        g, w = params.gamma, params.omega
        up, down = _ladder(n, scaling)
        decay = _decay_rate(n)
        pattern = _coupling_pattern(n)
        rows, cols, vals = [], [], []
        for key, (r, c, a, b) in pattern.items():
            if key == "feed":
                v = g * up[a] * up[b]
            elif key == "decay":
                v = -0.5 * g * (decay[a] + decay[b])
            elif key == "up_a":
                v = 0.5 * w * up[a]
            elif key == "up_b":
                v = 0.5 * w * up[b]
            elif key == "down_a":
                v = -0.5 * w * down[a]
            else:
                v = -0.5 * w * down[b]
            rows.append(r)
            cols.append(c)
            vals.append(v)
        size = n_unknowns(n)
        m = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
        )
        m.eliminate_zeros()
        return cls(params, scaling, m)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def apply(self, state: SymmetricState) -> SymmetricState:
        state = state.to_scaling(self.scaling)
        return SymmetricState(state.n, self.matrix @ state.packed, self.scaling)

    def trace_weights(self) -> np.ndarray:
        """Weights of the diagonal unknowns in the trace."""
        n = self.params.n_particles
        if self.scaling is Scaling.NORMALIZED:
            return np.ones(n + 1)
        return np.exp(binom_ln_row(n))

    def constrained(self, constraint_row: int = 0) -> tuple[sp.csr_matrix, np.ndarray]:
        """System matrix with the equation for ``X(k, k)`` replaced by the trace row.

        Only main-diagonal equations may be replaced: the weighted sum of
        those rows vanishes identically (trace preservation), so one of them
        is redundant, while every off-diagonal row is needed.
        """
        n = self.params.n_particles
        if not 0 <= constraint_row <= n:
            raise ValueError(f"constraint_row must be a diagonal index in 0..{n}")
        coo = self.matrix.tocoo()
        keep = coo.row != constraint_row
        size = self.dimension
        a = sp.csr_matrix(
            (
                np.concatenate([coo.data[keep], self.trace_weights()]),
                (
                    np.concatenate([coo.row[keep], np.full(n + 1, constraint_row)]),
                    np.concatenate([coo.col[keep], np.arange(n + 1)]),
                ),
            ),
            shape=(size, size),
        )
        b = np.zeros(size)
        b[constraint_row] = 1.0
        return a, b


@functools.lru_cache(maxsize=8)
def nested_dissection_order(n: int, leaf_size: int = 16, last: int = 0) -> np.ndarray:
    """Fill-reducing elimination order for the packed unknowns.

    The couplings only connect ``(a, b)`` to neighbours that differ by at
    most one in each index, so the stored triangle behaves like a 2-D grid
    and a straight line of constant ``a`` or ``b`` separates it.  Boxes are
    bisected recursively along their longer side; separators are eliminated
    after both halves.  Unknown ``last`` (the trace-constraint row, which
    couples to the whole diagonal) is moved to the very end.
    """
    blocks: list[np.ndarray] = []

    def box(a0, a1, b0, b1):
        aa, bb = np.meshgrid(np.arange(a0, a1 + 1), np.arange(b0, b1 + 1), indexing="ij")
        keep = aa <= bb
        return packed_index(n, aa[keep], bb[keep])

    # explicit stack instead of recursion; entries are (a0, a1, b0, b1, emit)
    stack: list[tuple] = [(0, n, 0, n, False)]
    while stack:
        a0, a1, b0, b1, emit = stack.pop()
        if emit:
            blocks.append(box(a0, a1, b0, b1))
            continue
        a1 = min(a1, b1)
        b0 = max(b0, a0)
        if a0 > a1 or b0 > b1:
            continue
        na, nb = a1 - a0 + 1, b1 - b0 + 1
        if na * nb <= leaf_size:
            blocks.append(box(a0, a1, b0, b1))
            continue
        # pushed in reverse: first half, second half, then the separator
        if na >= nb:
            mid = (a0 + a1) // 2
            stack.append((mid, mid, b0, b1, True))
            stack.append((mid + 1, a1, b0, b1, False))
            stack.append((a0, mid - 1, b0, b1, False))
        else:
            mid = (b0 + b1) // 2
            stack.append((a0, a1, mid, mid, True))
            stack.append((a0, a1, mid + 1, b1, False))
            stack.append((a0, a1, b0, mid - 1, False))
    order = np.concatenate(blocks)
    order = np.concatenate([order[order != last], [last]])
    order.setflags(write=False)
    return order


@dataclass(frozen=True)
class SteadyStateSolution:
    state: SymmetricState
    residual_norm: float
    solver_stats: dict[str, Any] = field(default_factory=dict)


_PIVOT_SCHEDULE = (0.0, 0.1)


def _factor_and_solve(a, a_perm, b, order, pivot_thresh, max_refine):
    """Sparse LU of the permuted system plus iterative refinement.

    Returns ``(x, constraint_residual, refinements, factor_nnz)``, with
    ``x = None`` when the factorization breaks down.
    """
    try:
        lu = sla.splu(a_perm, permc_spec="NATURAL", diag_pivot_thresh=pivot_thresh,
                      options=dict(SymmetricMode=True))
    except RuntimeError:
        return None, math.inf, 0, 0

    def solve(rhs_vec):
        out = np.empty_like(rhs_vec)
        out[order] = lu.solve(rhs_vec[order])
        return out

    x = solve(b)
    if not np.all(np.isfinite(x)):
        return None, math.inf, 0, int(lu.nnz)
    best = np.max(np.abs(a @ x - b))
    refinements = 0
    for _ in range(max_refine):
        candidate = x + solve(b - a @ x)
        res = np.max(np.abs(a @ candidate - b))
        if not res < best:
            break
        x, best = candidate, res
        refinements += 1
    return x, float(best), refinements, int(lu.nnz)


def steady_state(
    params: ModelParams,
    *,
    scaling: Scaling = Scaling.NORMALIZED,
    solve_scaling: Scaling = Scaling.NORMALIZED,
    constraint_row: int = 0,
    tol_residual: float = DEFAULT_TOL_RESIDUAL,
    max_refine: int = 4,
) -> SteadyStateSolution:
    """Unique steady state of the rate equation.

    The homogeneous system is made nonsingular by replacing the equation of
    diagonal entry ``constraint_row`` with the unit-trace condition.  The
    sparse LU uses a nested-dissection ordering without pivoting, followed
    by a few steps of iterative refinement; if that misses the tolerance the
    factorization is redone with threshold partial pivoting.

    ``residual_norm`` is the max-norm of the rate equation evaluated at the
    solution, in ``solve_scaling``.  :class:`SteadyStateError` is raised when
    it exceeds ``tol_residual * max(1, max|X|)``.
    """
    n = params.n_particles
    t0 = time.perf_counter()
    system = RateSystem.assemble(params, solve_scaling)
    a, b = system.constrained(constraint_row)
    order = nested_dissection_order(n, last=constraint_row)
    a_perm = a[order][:, order].tocsc()
    t1 = time.perf_counter()
    # Pivot-free LU keeps the fill-reducing order and is much faster; a bad
    # pivot shows up as a large refined residual, and then the system is
    # refactored with threshold partial pivoting.
    attempts = []
    result = None
    for pivot_thresh in _PIVOT_SCHEDULE:
        attempt = _factor_and_solve(a, a_perm, b, order, pivot_thresh, max_refine)
        attempts.append(pivot_thresh)
        x = attempt[0]
        if x is None:
            continue
        result = attempt
        if np.max(np.abs(system.matrix @ x)) <= tol_residual * max(1.0, np.max(np.abs(x))):
            break
    del a_perm
    if result is None:
        raise SingularSystemError(f"steady-state system for N={n}, Omega={params.omega_ratio:g} is singular")
    x, best, refinements, factor_nnz = result
    t2 = time.perf_counter()

    residual = float(np.max(np.abs(system.matrix @ x)))
    scale = max(1.0, float(np.max(np.abs(x))))
    state = SymmetricState(n, x, solve_scaling)
    stats = {
        "method": "splu",
        "ordering": "nested-dissection",
        "unknowns": system.dimension,
        "nnz": int(a.nnz),
        "factor_nnz": factor_nnz,
        "refinements": refinements,
        "pivot_thresholds": attempts,
        "constraint_residual": float(best),
        "assembly_seconds": t1 - t0,
        "solve_seconds": t2 - t1,
        "trace": trace(state),
    }
    if not residual <= tol_residual * scale:
        raise SteadyStateError(
            f"steady-state residual {residual:.3e} exceeds {tol_residual:.1e} "
            f"for N={n}, Omega={params.omega_ratio:g}"
        )
    log.debug("steady state N=%d Omega=%g residual=%.2e stats=%s", n, params.omega_ratio, residual, stats)
    return SteadyStateSolution(state.to_scaling(scaling), residual, stats)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: list[SymmetricState]

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def __len__(self):
        return len(self.states)

    @property
    def final(self) -> SymmetricState:
        return self.states[-1]


def evolve(
    initial: SymmetricState,
    params: ModelParams,
    t_final: float,
    *,
    t_eval: Sequence[float] | None = None,
    n_samples: int = 101,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = "RK45",
) -> Trajectory:
    """Integrate the rate equation from ``initial`` up to ``t_final``.

    Uses an adaptive embedded explicit Runge-Kutta pair (Dormand-Prince by
    default) on the normalized coefficients.  There is no stiffness handling:
    the generator's spectrum grows like ``Gamma * N**2``, so the stable step
    shrinks accordingly and large N become expensive.  Snapshots are
    returned in the scaling of ``initial``.
    """
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    if initial.n != params.n_particles:
        raise ValueError(f"state has N={initial.n} but params have N={params.n_particles}")
    if method not in ("RK45", "RK23", "DOP853"):
        raise ValueError(f"method must be an explicit embedded pair, got {method!r}")
    system = RateSystem.assemble(params, Scaling.NORMALIZED)
    mat = system.matrix
    y0 = initial.to_normalized().packed.copy()
    if t_eval is None:
        t_eval = np.linspace(0.0, t_final, n_samples)
    t_eval = np.asarray(t_eval, dtype=float)

    sol = solve_ivp(lambda _t, y: mat @ y, (0.0, t_final), y0, method=method,
                    t_eval=t_eval, rtol=rtol, atol=atol)
    if sol.status != 0:
        t_fail = float(sol.t[-1]) if sol.t.size else 0.0
        raise IntegrationError(sol.message, t_fail)
    states = [SymmetricState(initial.n, y, Scaling.NORMALIZED).to_scaling(initial.scaling) for y in sol.y.T]
    return Trajectory(np.asarray(sol.t), states)


def spectral_gap_estimate(params: ModelParams) -> float:
    """Smallest nonzero decay rate of the generator (dense, small N only)."""
    n = params.n_particles
    if n > 40:
        raise ValueError("dense spectrum is only computed for N <= 40")
    mat = RateSystem.assemble(params, Scaling.NORMALIZED).matrix.toarray()
    ev = np.linalg.eigvals(mat)
    rates = np.sort(-ev.real)
    return float(rates[1]) if rates.size > 1 else math.inf
