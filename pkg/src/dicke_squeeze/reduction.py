"""Reduced states of symmetric N-particle states and their Pauli moments.

Tracing out ``N - d`` particles from a state of the symmetric form gives a
``d``-particle state of the same form, with coefficients

    X_d(a, b) = sum_{q=0}^{N-d} C(N-d, q) X(a+q, b+q)

This works only because the basis kets are unnormalized: the partial inner
product of an unnormalized Dicke ket with a computational string is either
0 or 1, so no Clebsch-Gordan factors appear.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dicke_core import Scaling, SymmetricState, binom_ln_row, pack

SIGMA = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# Computational ordering |0>, |1> with |0> unexcited: the ground state has <sigma_z> = +1.


@dataclass(frozen=True)
class ReducedState:
    state: SymmetricState
    n_source: int

    @property
    def d(self) -> int:
        return self.state.n

    @property
    def lam(self) -> float:
        """Half the number of particles traced out."""
        return (self.n_source - self.d) / 2


def reduce(state: SymmetricState, d: int) -> ReducedState:
    """Reduced state of ``d`` particles, returned in raw scaling."""
    n = state.n
    if not 1 <= d <= n:
        raise ValueError(f"d must satisfy 1 <= d <= N={n}, got {d}")
    kappa = n - d
    q = np.arange(kappa + 1)
    ln_kappa = binom_ln_row(kappa)
    full = state.matrix()
    out = np.zeros((d + 1, d + 1))
    if state.scaling is Scaling.RAW:
        w = np.exp(ln_kappa)
        for a in range(d + 1):
            for b in range(a, d + 1):
                out[a, b] = np.dot(w, full[a + q, b + q])
    else:
        # raw X = Y / sqrt(C(N,a) C(N,b)); fold the binomials into log weights
        lnc = binom_ln_row(n)
        for a in range(d + 1):
            for b in range(a, d + 1):
                lw = ln_kappa - 0.5 * (lnc[a + q] + lnc[b + q])
                out[a, b] = np.dot(np.exp(lw), full[a + q, b + q])
    out = np.triu(out) + np.triu(out, 1).T
    return ReducedState(SymmetricState(d, pack(out, atol=None), Scaling.RAW), n)


def two_qubit_matrix(reduced: ReducedState | SymmetricState) -> np.ndarray:
    """4x4 density matrix of a d=2 symmetric state in the computational basis.

    Basis order is ``|00>, |01>, |10>, |11>``.
    """
    state = reduced.state if isinstance(reduced, ReducedState) else reduced
    if state.n != 2:
        raise ValueError(f"expected a two-particle state, got d={state.n}")
    x = state.to_raw().matrix()
    kets = np.zeros((3, 4))
    kets[0, 0] = 1.0
    kets[1, 1] = kets[1, 2] = 1.0
    kets[2, 3] = 1.0
    rho = np.zeros((4, 4), dtype=complex)
    for a in range(3):
        for b in range(3):
            rho += x[a, b] * (1j) ** ((a - b) % 4) * np.outer(kets[a], kets[b])
    return rho


def one_qubit_matrix(reduced: ReducedState | SymmetricState) -> np.ndarray:
    state = reduced.state if isinstance(reduced, ReducedState) else reduced
    if state.n != 1:
        raise ValueError(f"expected a one-particle state, got d={state.n}")
    x = state.to_raw().matrix()
    return np.array([[x[0, 0], -1j * x[0, 1]], [1j * x[1, 0], x[1, 1]]])


@dataclass(frozen=True)
class PauliExpectations:
    """Single-particle means and two-particle correlators of a symmetric state.

    ``sab`` is ``<sigma_a (x) sigma_b>`` on any pair of particles; symmetric
    states make it symmetric in ``a, b``.
    """

    sx: float
    sy: float
    sz: float
    sxx: float
    syy: float
    szz: float
    syz: float
    sxy: float = 0.0
    sxz: float = 0.0

    def mean_spin(self) -> np.ndarray:
        return np.array([self.sx, self.sy, self.sz])

    def correlation_matrix(self) -> np.ndarray:
        return np.array([
            [self.sxx, self.sxy, self.sxz],
            [self.sxy, self.syy, self.syz],
            [self.sxz, self.syz, self.szz],
        ])

    def as_dict(self) -> dict[str, float]:
        return {k: float(getattr(self, k)) for k in ("sx", "sy", "sz", "sxx", "syy", "szz", "syz", "sxy", "sxz")}


def sxx_from_coefficients(reduced2: ReducedState | SymmetricState) -> float:
    """``<sigma_x (x) sigma_x>`` read off the two-particle coefficients directly."""
    state = reduced2.state if isinstance(reduced2, ReducedState) else reduced2
    x = state.to_raw()
    return 2.0 * (x.entry(1, 1) - x.entry(0, 2))


def dense_correlators(reduced2: ReducedState | SymmetricState) -> np.ndarray:
    """3x3 matrix of ``tr(sigma_a (x) sigma_b rho_2)``, by brute-force trace."""
    rho = two_qubit_matrix(reduced2)
    out = np.empty((3, 3))
    for i, a in enumerate("xyz"):
        for j, b in enumerate("xyz"):
            out[i, j] = np.trace(np.kron(SIGMA[a], SIGMA[b]) @ rho).real
    return out


def pauli_expectations(state: SymmetricState) -> PauliExpectations:
    if state.n < 2:
        raise ValueError("pair correlators need N >= 2")
    rho1 = one_qubit_matrix(reduce(state, 1))
    red2 = reduce(state, 2)
    corr = dense_correlators(red2)
    mean = [np.trace(SIGMA[a] @ rho1).real for a in "xyz"]
    return PauliExpectations(
        sx=float(mean[0]),
        sy=float(mean[1]),
        sz=float(mean[2]),
        sxx=sxx_from_coefficients(red2),
        syy=float(corr[1, 1]),
        szz=float(corr[2, 2]),
        syz=float(0.5 * (corr[1, 2] + corr[2, 1])),
        sxy=float(0.5 * (corr[0, 1] + corr[1, 0])),
        sxz=float(0.5 * (corr[0, 2] + corr[2, 0])),
    )
