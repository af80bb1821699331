"""Closed-form steady-state squeezing for small N, checked against the solver.

The coefficients live in ``data/xi2_table.json`` as

    xi2(Omega) = 1 - Omega**2 * P(Omega**2) / Q(Omega**2)

with integer coefficient lists in descending powers of ``Omega**2``.  Each
row carries the sha256 of its canonical JSON so an edited row is reported
by ``n`` rather than as a generic file failure.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .dicke_core import ModelParams
from .liouville import steady_state
from .squeezing import report

DEFAULT_SEED = 20240229
DEFAULT_SAMPLES = 25
DEFAULT_REL_TOL = 1e-9


class TableChecksumError(ValueError):
    def __init__(self, n: int, expected: str, actual: str):
        super().__init__(f"row N={n}: checksum {actual} does not match recorded {expected}")
        self.n = n


@dataclass(frozen=True)
class TableRow:
    n: int
    numerator: tuple[int, ...]
    denominator: tuple[int, ...]

    def canonical(self) -> dict:
        return {"n": self.n, "numerator": list(self.numerator), "denominator": list(self.denominator)}

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def __call__(self, omega: float) -> float:
        u = omega * omega
        return 1.0 - u * np.polyval(self.numerator, u) / np.polyval(self.denominator, u)

    def exact(self, omega_sq: Fraction | int) -> Fraction:
        """Exact value for rational ``Omega**2``."""
        u = Fraction(omega_sq)
        num = sum(Fraction(c) * u ** k for k, c in enumerate(reversed(self.numerator)))
        den = sum(Fraction(c) * u ** k for k, c in enumerate(reversed(self.denominator)))
        return 1 - u * num / den


def default_table_path() -> Path:
    return Path(str(resources.files("dicke_squeeze") / "data" / "xi2_table.json"))


def load_table(path: str | Path | None = None, *, verify_checksum: bool = True) -> dict[int, TableRow]:
    path = default_table_path() if path is None else Path(path)
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    table = {}
    for entry in doc["rows"]:
        row = TableRow(int(entry["n"]), tuple(int(c) for c in entry["numerator"]),
                       tuple(int(c) for c in entry["denominator"]))
        if verify_checksum and row.digest() != entry["sha256"]:
            raise TableChecksumError(row.n, entry["sha256"], row.digest())
        table[row.n] = row
    return table


@dataclass(frozen=True)
class TableMismatch:
    n: int
    omega: float
    table_value: float
    numeric_value: float
    rel_error: float


@dataclass(frozen=True)
class TableCheck:
    max_rel_error: float
    worst: TableMismatch | None
    mismatches: list[TableMismatch]
    n_points: int
    rel_tol: float

    @property
    def ok(self) -> bool:
        return not self.mismatches


def sample_omegas(n: int, samples: int, seed: int) -> np.ndarray:
    """Seeded uniform sample of ``Omega`` on ``(0, 2N)``, one stream per N."""
    rng = np.random.default_rng([seed, n])
    return np.sort(rng.uniform(0.0, 2.0 * n, size=samples))


def verify_table(
    table: dict[int, TableRow] | None = None,
    *,
    samples: int = DEFAULT_SAMPLES,
    seed: int = DEFAULT_SEED,
    rel_tol: float = DEFAULT_REL_TOL,
    extra_omegas: tuple[float, ...] = (),
) -> TableCheck:
    """Compare every tabulated row with the steady-state solver."""
    table = load_table() if table is None else table
    worst = None
    mismatches = []
    count = 0
    for n in sorted(table):
        row = table[n]
        for om in np.concatenate([sample_omegas(n, samples, seed), np.asarray(extra_omegas, float)]):
            om = float(om)
            numeric = report(steady_state(ModelParams.from_ratio(n, om)).state).xi2_S
            expect = row(om)
            rel = abs(numeric - expect) / max(abs(expect), np.finfo(float).tiny)
            rec = TableMismatch(n, om, float(expect), numeric, float(rel))
            if worst is None or rel > worst.rel_error:
                worst = rec
            if not rel < rel_tol:
                mismatches.append(rec)
            count += 1
    return TableCheck(worst.rel_error if worst else 0.0, worst, mismatches, count, rel_tol)
