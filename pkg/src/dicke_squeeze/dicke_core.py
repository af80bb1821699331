"""Symmetric-sector bookkeeping for the driven Dicke model.

States live in the j = N/2 sector and are written in the *unnormalized*
symmetric basis: ``|k>`` is the plain sum of every computational basis
string carrying ``k`` excitations (``k = m + j``).  A density matrix of the
form

    rho = sum_{ka, kb} X(ka, kb) * i**(ka - kb) * |ka><kb|

is fully described by the real symmetric matrix ``X``.  Because the basis
kets are unnormalized, ``X`` spans many orders of magnitude once N grows,
so states can alternatively carry ``Y(ka, kb) = sqrt(C(N,ka) C(N,kb)) X``,
which are the matrix elements in the normalized Dicke basis.

Only the upper triangle ``ka <= kb`` is stored, in diagonal-major order:
first the main diagonal (``kb - ka == 0``), then the first superdiagonal,
and so on.  The same ordering is used for the unknowns of the steady-state
linear system.
"""
from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

# math.comb is exact but becomes slow for very large n
_EXACT_BINOM_LIMIT = 10_000


class Scaling(str, enum.Enum):
    RAW = "raw"
    NORMALIZED = "normalized"


def _log_ratio_terms(n: int, m: int) -> np.ndarray:
    # ln((n - m + i) / i) for i = 1..m, all positive
    i = np.arange(1, m + 1, dtype=float)
    return np.log1p((n - m) / i)


def binom_ln(n: int, k: int) -> float:
    """Natural log of the binomial coefficient C(n, k).

    Exact integer arithmetic up to ``n = 10000``; beyond that a compensated
    sum of positive log terms, which avoids the cancellation of an lgamma
    difference.
    """
    if n < 0 or k < 0 or k > n:
        raise ValueError(f"binom_ln requires 0 <= k <= n, got n={n}, k={k}")
    if n <= _EXACT_BINOM_LIMIT:
        # math.log accepts arbitrarily large ints without overflow
        return math.log(math.comb(n, k))
    return math.fsum(_log_ratio_terms(n, min(k, n - k)))


@functools.lru_cache(maxsize=64)
def binom_ln_row(n: int) -> np.ndarray:
    """Array of ``ln C(n, k)`` for ``k = 0..n`` (read-only, cached)."""
    if n <= _EXACT_BINOM_LIMIT:
        row = np.array([binom_ln(n, k) for k in range(n + 1)])
    else:
        # running sum in extended precision, mirrored about n/2
        half = n // 2
        i = np.arange(1, half + 1, dtype=np.longdouble)
        left = np.concatenate([[0.0], np.cumsum(np.log((n - i + 1) / i))]).astype(float)
        row = np.concatenate([left, left[: n - half][::-1]])
    row.setflags(write=False)
    return row


def n_unknowns(n: int) -> int:
    return (n + 1) * (n + 2) // 2


def diagonal_offset(n: int, d):
    """Position of the first stored entry of superdiagonal ``d``."""
    return d * (n + 1) - d * (d - 1) // 2


def packed_index(n: int, ka, kb):
    """Packed position of ``(ka, kb)``; either ordering of the pair is accepted."""
    lo = np.minimum(ka, kb)
    hi = np.maximum(ka, kb)
    return diagonal_offset(n, hi - lo) + lo


@functools.lru_cache(maxsize=64)
def triangle_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column index arrays of the stored triangle, in packed order."""
    rows = np.concatenate([np.arange(n + 1 - d) for d in range(n + 1)])
    cols = np.concatenate([np.arange(d, n + 1) for d in range(n + 1)])
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


def pack(matrix: np.ndarray, *, atol: float | None = 0.0) -> np.ndarray:
    """Extract the upper triangle of a symmetric matrix in packed order.

    With ``atol`` not None, the matrix must be symmetric to within ``atol``
    (relative to its max-norm) or ``ValueError`` is raised.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    if atol is not None:
        scale = max(1.0, float(np.max(np.abs(matrix), initial=0.0)))
        if np.max(np.abs(matrix - matrix.T), initial=0.0) > atol * scale:
            raise ValueError("coefficient matrix is not symmetric")
    n = matrix.shape[0] - 1
    rows, cols = triangle_indices(n)
    return matrix[rows, cols].copy()


def unpack(n: int, packed: np.ndarray) -> np.ndarray:
    rows, cols = triangle_indices(n)
    out = np.empty((n + 1, n + 1), dtype=packed.dtype)
    out[rows, cols] = packed
    out[cols, rows] = packed
    return out


def _log_scale(n: int) -> np.ndarray:
    # ln of sqrt(C(n,ka) C(n,kb)) per packed entry; Y = X * exp(_log_scale)
    rows, cols = triangle_indices(n)
    lnc = binom_ln_row(n)
    return 0.5 * (lnc[rows] + lnc[cols])


def _log_rescale(values: np.ndarray, log_factor: np.ndarray) -> np.ndarray:
    """``values * exp(log_factor)`` without intermediate overflow."""
    out = np.zeros_like(values, dtype=float)
    nz = values != 0
    with np.errstate(over="ignore", under="ignore"):
        out[nz] = np.sign(values[nz]) * np.exp(np.log(np.abs(values[nz])) + log_factor[nz])
    return out


@dataclass(frozen=True)
class ModelParams:
    """Particle number and rates.  Only ``omega_ratio = omega / gamma`` matters
    for the steady state; ``gamma`` sets the time unit."""

    n_particles: int
    gamma: float = 1.0
    omega: float = 0.0

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ValueError(f"n_particles must be a positive integer, got {self.n_particles}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not math.isfinite(self.omega):
            raise ValueError("omega must be finite")
        object.__setattr__(self, "n_particles", int(self.n_particles))

    @classmethod
    def from_ratio(cls, n_particles: int, omega_ratio: float, gamma: float = 1.0) -> "ModelParams":
        return cls(n_particles, gamma, omega_ratio * gamma)

    @property
    def omega_ratio(self) -> float:
        return self.omega / self.gamma

    @property
    def j(self) -> float:
        return self.n_particles / 2


@dataclass(frozen=True, eq=False)
class SymmetricState:
    """Immutable coefficient matrix of a permutation-symmetric state.

    ``packed`` holds the upper triangle in diagonal-major order (see the
    module docstring).  Arithmetic (``+``, ``-``, scalar ``*``) is provided so
    that linearity of maps on states can be exercised directly.
    """

    n: int
    packed: np.ndarray
    scaling: Scaling = Scaling.RAW
    _matrix_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "scaling", Scaling(self.scaling))
        packed = np.array(self.packed, dtype=float)
        if packed.shape != (n_unknowns(self.n),):
            raise ValueError(
                f"packed coefficients for n={self.n} need length {n_unknowns(self.n)}, got {packed.shape}"
            )
        if not np.all(np.isfinite(packed)):
            raise ValueError("coefficients must be finite")
        packed.setflags(write=False)
        object.__setattr__(self, "packed", packed)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, scaling: Scaling = Scaling.RAW, *, atol: float = 1e-12) -> "SymmetricState":
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix.shape[0] - 1, pack(matrix, atol=atol), scaling)

    @property
    def dim(self) -> int:
        return self.n + 1

    def matrix(self) -> np.ndarray:
        """Full symmetric coefficient matrix (a fresh, writable copy)."""
        if "m" not in self._matrix_cache:
            m = unpack(self.n, self.packed)
            m.setflags(write=False)
            self._matrix_cache["m"] = m
        return self._matrix_cache["m"].copy()

    def entry(self, ka: int, kb: int) -> float:
        if not (0 <= ka <= self.n and 0 <= kb <= self.n):
            raise IndexError(f"index ({ka}, {kb}) outside 0..{self.n}")
        return float(self.packed[packed_index(self.n, ka, kb)])

    def diagonal(self) -> np.ndarray:
        return self.packed[: self.n + 1].copy()

    def to_raw(self) -> "SymmetricState":
        if self.scaling is Scaling.RAW:
            return self
        return SymmetricState(self.n, _log_rescale(self.packed, -_log_scale(self.n)), Scaling.RAW)

    def to_normalized(self) -> "SymmetricState":
        if self.scaling is Scaling.NORMALIZED:
            return self
        values = _log_rescale(self.packed, _log_scale(self.n))
        if not np.all(np.isfinite(values)):
            raise OverflowError(f"raw coefficients for n={self.n} overflow on normalization")
        return SymmetricState(self.n, values, Scaling.NORMALIZED)

    def to_scaling(self, scaling: Scaling) -> "SymmetricState":
        return self.to_raw() if Scaling(scaling) is Scaling.RAW else self.to_normalized()

    def _check_compatible(self, other: "SymmetricState"):
        if self.n != other.n:
            raise ValueError(f"particle numbers differ: {self.n} vs {other.n}")
        if self.scaling is not other.scaling:
            raise ValueError("states use different scalings; convert one first")

    def __add__(self, other: "SymmetricState") -> "SymmetricState":
        if not isinstance(other, SymmetricState):
            return NotImplemented
        self._check_compatible(other)
        return SymmetricState(self.n, self.packed + other.packed, self.scaling)

    def __sub__(self, other: "SymmetricState") -> "SymmetricState":
        if not isinstance(other, SymmetricState):
            return NotImplemented
        self._check_compatible(other)
        return SymmetricState(self.n, self.packed - other.packed, self.scaling)

    def __mul__(self, factor: float) -> "SymmetricState":
        if not isinstance(factor, (int, float, np.floating, np.integer)):
            return NotImplemented
        return SymmetricState(self.n, self.packed * float(factor), self.scaling)

    __rmul__ = __mul__

    def to_json_dict(self) -> dict[str, Any]:
        rows, cols = triangle_indices(self.n)
        return {
            "n": self.n,
            "scaling": self.scaling.value,
            "entries": [[int(a), int(b), float(v)] for a, b, v in zip(rows, cols, self.packed)],
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "SymmetricState":
        n = int(data["n"])
        packed = np.zeros(n_unknowns(n))
        seen = np.zeros(n_unknowns(n), dtype=bool)
        for a, b, v in data["entries"]:
            a, b = int(a), int(b)
            if not (0 <= a <= b <= n):
                raise ValueError(f"entry ({a}, {b}) is not in the upper triangle for n={n}")
            idx = packed_index(n, a, b)
            if seen[idx]:
                raise ValueError(f"duplicate entry ({a}, {b})")
            seen[idx] = True
            packed[idx] = float(v)
        return cls(n, packed, Scaling(data["scaling"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def loads(cls, text: str) -> "SymmetricState":
        return cls.from_json_dict(json.loads(text))


def ground_state(n: int, scaling: Scaling = Scaling.RAW) -> SymmetricState:
    """All particles unexcited: X(0, 0) = 1."""
    return dicke_basis_state(n, 0, scaling)


def dicke_basis_state(n: int, k: int, scaling: Scaling = Scaling.RAW) -> SymmetricState:
    """Pure Dicke state with ``k`` excitations."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"excitation number k={k} outside 0..{n}")
    packed = np.zeros(n_unknowns(n))
    if Scaling(scaling) is Scaling.RAW:
        packed[k] = 1.0 / math.comb(n, k)
    else:
        packed[k] = 1.0
    return SymmetricState(n, packed, scaling)


def trace(state: SymmetricState) -> float:
    """Trace of the density matrix (binomially weighted diagonal in raw scaling)."""
    diag = state.packed[: state.n + 1]
    if state.scaling is Scaling.NORMALIZED:
        return float(math.fsum(diag))
    return float(math.fsum(_log_rescale(diag, binom_ln_row(state.n))))


def phase_matrix(n: int) -> np.ndarray:
    """``i**(ka - kb)`` for ``ka, kb = 0..n``."""
    k = np.arange(n + 1)
    return (1j) ** ((k[:, None] - k[None, :]) % 4)


def to_dense(state: SymmetricState) -> np.ndarray:
    """Density matrix in the normalized Dicke basis ``|k>``, ``k = 0..N``."""
    y = state.to_normalized().matrix()
    return phase_matrix(state.n) * y


def random_state(n: int, rng: np.random.Generator, *, rank: int | None = None,
                 scaling: Scaling = Scaling.NORMALIZED) -> SymmetricState:
    """A random physical state of the allowed form (real PSD ``Y``, unit trace)."""
    rank = n + 1 if rank is None else rank
    g = rng.standard_normal((n + 1, rank))
    y = g @ g.T
    y /= np.trace(y)
    return SymmetricState.from_matrix(y, Scaling.NORMALIZED).to_scaling(scaling)


def random_coefficients(n: int, rng: np.random.Generator, scaling: Scaling = Scaling.RAW) -> SymmetricState:
    """Arbitrary real symmetric coefficients (not necessarily a physical state)."""
    return SymmetricState(n, rng.standard_normal(n_unknowns(n)), scaling)
