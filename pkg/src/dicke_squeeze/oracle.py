"""Brute-force reference in the full 2**N-dimensional Hilbert space.

Builds the Lindblad generator from single-site operators in the
computational basis, with nothing borrowed from the symmetric-sector
machinery, and uses it to certify the rate equation and the steady-state
solver for small N.

Qubit 1 is the most significant bit; ``|0>`` is unexcited and the collective
raising operator is ``sum_n |1><0|_n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce as _fold

import numpy as np

from .dicke_core import ModelParams, SymmetricState

MAX_BUILD_N = 6
MAX_STEADY_N = 5

SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]])  # |1><0|


def site_operator(op: np.ndarray, site: int, n: int) -> np.ndarray:
    factors = [np.eye(2)] * n
    factors[site] = op
    return _fold(np.kron, factors)


def collective_raising(n: int) -> np.ndarray:
    return sum(site_operator(SIGMA_PLUS, i, n) for i in range(n))


def _superop_left(a: np.ndarray) -> np.ndarray:
    # vec(A rho) for row-major flattening of rho
    return np.kron(a, np.eye(a.shape[0]))


def _superop_right(b: np.ndarray) -> np.ndarray:
    # vec(rho B) for row-major flattening of rho
    return np.kron(np.eye(b.shape[0]), b.T)


@dataclass(frozen=True, eq=False)
class DenseLiouvillian:
    params: ModelParams
    generator: np.ndarray  # acts on rho.reshape(-1) (row-major)

    @property
    def n(self) -> int:
        return self.params.n_particles

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = 2 ** self.n
        return (self.generator @ rho.reshape(-1)).reshape(d, d)


def build(params: ModelParams) -> DenseLiouvillian:
    """``Gamma (D- rho D+ - {D+ D-, rho}/2) - i [V, rho]``, ``V = (omega/2)(D+ + D-)``."""
    n = params.n_particles
    if n > MAX_BUILD_N:
        raise ValueError(f"dense generator limited to N <= {MAX_BUILD_N}, got {n}")
    dp = collective_raising(n).astype(complex)
    dm = dp.conj().T
    v = 0.5 * params.omega * (dp + dm)
    dpdm = dp @ dm
    g = params.gamma
    gen = (
        g * (_superop_left(dm) @ _superop_right(dp))
        - 0.5 * g * (_superop_left(dpdm) + _superop_right(dpdm))
        - 1j * (_superop_left(v) - _superop_right(v))
    )
    return DenseLiouvillian(params, gen)


def excitation_counts(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    return np.array([bin(i).count("1") for i in idx])


def unnormalized_dicke_kets(n: int) -> np.ndarray:
    """Row ``k``: sum of all computational basis strings with ``k`` ones."""
    counts = excitation_counts(n)
    kets = np.zeros((n + 1, 2 ** n))
    kets[counts, np.arange(2 ** n)] = 1.0
    return kets


def embed(state: SymmetricState) -> np.ndarray:
    """Full 2**N density matrix of a symmetric-sector state."""
    n = state.n
    x = state.to_raw().matrix()
    kets = unnormalized_dicke_kets(n)
    k = np.arange(n + 1)
    coeff = x * (1j) ** ((k[:, None] - k[None, :]) % 4)
    return kets.T @ coeff @ kets


def symmetric_support_basis(n: int) -> np.ndarray:
    """Columns are vectorized ``|Dk><Dk'|`` over normalized Dicke states."""
    kets = unnormalized_dicke_kets(n)
    kets = kets / np.linalg.norm(kets, axis=1, keepdims=True)
    cols = [np.outer(kets[a], kets[b]).reshape(-1) for a in range(n + 1) for b in range(n + 1)]
    return np.array(cols, dtype=complex).T


class NullspaceError(RuntimeError):
    pass


def oracle_steady_state(params: ModelParams, *, rel_tol: float = 1e-9) -> np.ndarray:
    """Steady state among operators supported on the symmetric subspace.

    Collective dynamics conserve total spin, so the full-space generator has
    one stationary state per spin sector and permutation multiplicity; only
    its restriction to operators living on the fully symmetric subspace has a
    one-dimensional kernel.  That restriction is ``G @ W`` with ``W`` the
    vectorized outer products of Dicke states; its null vector is found by SVD.
    """
    n = params.n_particles
    if n > MAX_STEADY_N:
        raise ValueError(f"oracle steady state limited to N <= {MAX_STEADY_N}, got {n}")
    gen = build(params).generator
    w = symmetric_support_basis(n)
    restricted = gen @ w
    _, sv, vh = np.linalg.svd(restricted)
    scale = max(sv[0], 1.0)
    null = np.sum(sv <= rel_tol * scale)
    if null != 1:
        raise NullspaceError(f"expected a one-dimensional kernel, found {null} (singular values {sv[-3:]})")
    coeffs = vh[-1].conj()
    rho = (w @ coeffs).reshape(2 ** n, 2 ** n)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def full_kernel_dimension(params: ModelParams, rel_tol: float = 1e-9) -> int:
    """Dimension of the generator's kernel on *all* operators (diagnostic)."""
    gen = build(params).generator
    sv = np.linalg.svd(gen, compute_uv=False)
    return int(np.sum(sv <= rel_tol * max(sv[0], 1.0)))


def partial_trace_keep(rho: np.ndarray, n: int, keep: int) -> np.ndarray:
    """Reduced density matrix of the first ``keep`` qubits."""
    d_keep = 2 ** keep
    d_rest = 2 ** (n - keep)
    return np.einsum("iaja->ij", rho.reshape(d_keep, d_rest, d_keep, d_rest))


def swap_operator(n: int, i: int, j: int) -> np.ndarray:
    """Permutation matrix exchanging qubits ``i`` and ``j``."""
    dim = 2 ** n
    perm = np.empty(dim, dtype=int)
    for s in range(dim):
        bi = (s >> (n - 1 - i)) & 1
        bj = (s >> (n - 1 - j)) & 1
        t = s
        if bi != bj:
            t ^= (1 << (n - 1 - i)) | (1 << (n - 1 - j))
        perm[s] = t
    p = np.zeros((dim, dim))
    p[perm, np.arange(dim)] = 1.0
    return p


def is_unit_trace(rho: np.ndarray, tol: float = 1e-12) -> bool:
    return math.isclose(np.trace(rho).real, 1.0, abs_tol=tol)
