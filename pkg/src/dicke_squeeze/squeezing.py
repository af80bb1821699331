"""Spin-squeezing parameters and two-qubit negativity of symmetric states.

Three squeezing parameters are computed:

* ``xi2_S``: N times the minimal variance of the normalized collective spin
  ``Jbar = (1/N) sum sigma`` over directions orthogonal to the mean spin.
  It is evaluated from the frame-based closed form (``xi2_general``), from
  the two-branch minimum (``xi2_minimum_form``) and directly from the
  coefficient matrix (``xi2_special``); all three agree for the states of
  this model.
* ``xi2_Rprime``: variance along x divided by the squared mean spin.
* ``xi2_E``: the entanglement-optimal variant, which for these states
  depends on ``<sigma_x sigma_x>`` alone.

States of this model have ``<sigma_x> = 0`` and vanishing x-y, x-z pair
correlators, so the optimal squeezing direction is x whenever
``<sigma_x sigma_x>`` is the smaller branch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Any

import numpy as np

from .dicke_core import Scaling, SymmetricState, binom_ln_row
from .reduction import PauliExpectations, ReducedState, pauli_expectations, reduce, two_qubit_matrix

# |x - 1| below this counts as "equal to one" when comparing separability verdicts
UNIT_TOL = 1e-12


class ConsistencyError(RuntimeError):
    """A structural identity that must hold for states of this model failed."""


class UndefinedSqueezingError(ValueError):
    """The requested parameter is undefined (zero mean spin, or <sxx> = 1)."""


@dataclass(frozen=True)
class SqueezingFrame:
    """Mean-spin frame and the optimal squeezing direction.

    ``a_param`` and ``b_param`` are ``<J1^2 - J2^2>`` and
    ``<J1 J2 + J2 J1>/2``; ``varphi`` rotates inside the plane orthogonal
    to the mean spin and ``n_perp`` is the resulting unit vector.
    """

    theta: float
    phi: float
    varphi: float
    a_param: float
    b_param: float
    n_perp: tuple[float, float, float]
    j1_sq: float
    j2_sq: float
    degenerate: bool = False


def _moments(exp: PauliExpectations, n: int, u: np.ndarray, v: np.ndarray) -> float:
    """Symmetrized ``<(u.Jbar)(v.Jbar) + (v.Jbar)(u.Jbar)>/2`` for unit vectors."""
    corr = exp.correlation_matrix()
    return float(np.dot(u, v) / n + (n - 1) / n * (u @ corr @ v))


def squeezing_frame(exp: PauliExpectations, n: int) -> SqueezingFrame:
    if n < 2:
        raise ValueError("squeezing needs N >= 2")
    mean = exp.mean_spin()
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        # mean-spin direction undefined; report the x axis by convention
        x_hat = np.array([1.0, 0.0, 0.0])
        jx = _moments(exp, n, x_hat, x_hat)
        return SqueezingFrame(0.0, 0.0, 0.0, 0.0, 0.0, (1.0, 0.0, 0.0), jx, math.inf, degenerate=True)
    theta = math.acos(max(-1.0, min(1.0, exp.sz / norm)))
    phi = math.atan2(exp.sy, exp.sx)
    u1 = np.array([-math.sin(phi), math.cos(phi), 0.0])
    u2 = np.array([math.cos(theta) * math.cos(phi), math.cos(theta) * math.sin(phi), -math.sin(theta)])
    j11 = _moments(exp, n, u1, u1)
    j22 = _moments(exp, n, u2, u2)
    a_param = j11 - j22
    b_param = _moments(exp, n, u1, u2)
    r = math.hypot(a_param, b_param)
    if r == 0.0:
        varphi = 0.0
    else:
        half = 0.5 * math.acos(max(-1.0, min(1.0, -a_param / r)))
        varphi = half if b_param <= 0 else math.pi - half
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp_ = math.cos(phi), math.sin(phi)
    cv, sv = math.cos(varphi), math.sin(varphi)
    n_perp = (ct * sv * cp - cv * sp_, ct * sv * sp_ + cv * cp, -st * sv)
    return SqueezingFrame(theta, phi, varphi, a_param, b_param, n_perp, j11, j22)


def xi2_general(exp: PauliExpectations, n: int) -> float:
    """Squeezing from the variances in the plane orthogonal to the mean spin.

    For a degenerate (zero) mean spin the orthogonal plane is undefined; the
    x-axis branch ``1 + (N-1) <sxx>`` is returned instead and the frame from
    :func:`squeezing_frame` is flagged ``degenerate``.
    """
    frame = squeezing_frame(exp, n)
    if frame.degenerate:
        return 1.0 + (n - 1) * exp.sxx
    j11, j22 = frame.j1_sq, frame.j2_sq
    cross = 2.0 * frame.b_param
    return 0.5 * n * (j11 + j22 - math.sqrt((j11 - j22) ** 2 + cross ** 2))


def xi2_minimum_form(exp: PauliExpectations, n: int) -> float:
    """``1 + (N-1) * min(<sxx>, yz-branch)`` with the yz branch dropped if undefined."""
    m2 = exp.sy ** 2 + exp.sz ** 2
    if m2 == 0.0:
        return 1.0 + (n - 1) * exp.sxx
    # the cross correlator enters twice: <s_y s_z> and <s_z s_y> are equal here
    yz_branch = (exp.sy ** 2 * exp.szz + exp.sz ** 2 * exp.syy - 2.0 * exp.sy * exp.sz * exp.syz) / m2
    return 1.0 + (n - 1) * min(exp.sxx, yz_branch)


def xi2_special(state: SymmetricState) -> float:
    """``1 + (N-1) <sxx>`` evaluated straight from the N-particle coefficients.

    Only the main diagonal and second superdiagonal enter:

        1 + 2(N-1) sum_q C(N-2, q) [X(q+1, q+1) - X(q, q+2)]

    Valid for any state of the symmetric form, steady or not.
    """
    n = state.n
    if n < 2:
        raise ValueError("squeezing needs N >= 2")
    q = np.arange(n - 1)
    diag = state.packed[1:n]               # X(q+1, q+1)
    off2 = state.packed[2 * n + 1:3 * n]   # X(q, q+2), second superdiagonal
    ln_w = binom_ln_row(n - 2)
    if state.scaling is Scaling.RAW:
        w = np.exp(ln_w)
        total = np.dot(w, diag) - np.dot(w, off2)
    else:
        lnc = binom_ln_row(n)
        w_diag = np.exp(ln_w - lnc[q + 1])
        w_off = np.exp(ln_w - 0.5 * (lnc[q] + lnc[q + 2]))
        total = np.dot(w_diag, diag) - np.dot(w_off, off2)
    return float(1.0 + 2.0 * (n - 1) * total)


def xi2_Rprime(exp: PauliExpectations, n: int) -> float:
    """Variance along x over the squared mean spin, with ``<sx>`` set to zero."""
    m2 = exp.sy ** 2 + exp.sz ** 2
    if m2 == 0.0:
        raise UndefinedSqueezingError("xi2_R' is undefined for zero mean spin")
    return (1.0 + (n - 1) * exp.sxx) / m2


def xi2_E(exp: PauliExpectations, n: int) -> float:
    if exp.sxx >= 1.0:
        raise UndefinedSqueezingError("xi2_E is undefined for <sxx> = 1")
    return (1.0 + (n - 1) * exp.sxx) / (1.0 - exp.sxx)


def partial_transpose(rho: np.ndarray) -> np.ndarray:
    """Transpose the second qubit of a 4x4 two-qubit matrix."""
    return rho.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def pt_eigenvalues(reduced: ReducedState) -> np.ndarray:
    pt = partial_transpose(two_qubit_matrix(reduced))
    return np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))


def negativity_2q(reduced: ReducedState, *, check_tol: float = 1e-12) -> float:
    """Negativity of a two-particle reduced state, from the full PT spectrum.

    Also checks that ``<sxx>/2`` appears in that spectrum, which holds for
    every state of the symmetric form.
    """
    if reduced.d != 2:
        raise ValueError(f"negativity_2q needs a two-particle state, got d={reduced.d}")
    ev = pt_eigenvalues(reduced)
    x = reduced.state.to_raw()
    half_sxx = x.entry(1, 1) - x.entry(0, 2)
    if np.min(np.abs(ev - half_sxx)) > check_tol * max(1.0, float(np.max(np.abs(ev)))):
        raise ConsistencyError(f"<sxx>/2 = {half_sxx} is not a PT eigenvalue: {ev}")
    return max(0.0, 0.5 * (float(np.sum(np.abs(ev))) - 1.0))


@dataclass(frozen=True)
class SqueezingReport:
    n: int
    xi2_S: float
    xi2_Rprime: float | None
    xi2_E: float | None
    negativity: float
    expectations: PauliExpectations
    frame: SqueezingFrame

    def to_json_dict(self) -> dict[str, Any]:
        frame = asdict(self.frame)
        frame["n_perp"] = list(frame["n_perp"])
        if math.isinf(frame["j2_sq"]):
            frame["j2_sq"] = None
        return {
            "n": self.n,
            "xi2_S": self.xi2_S,
            "xi2_Rprime": self.xi2_Rprime,
            "xi2_E": self.xi2_E,
            "negativity": self.negativity,
            "frame_degenerate": self.frame.degenerate,
            "expectations": self.expectations.as_dict(),
            "frame": frame,
        }


def side_of_one(value: float, tol: float = UNIT_TOL) -> int:
    """-1, 0 or +1 for below, at (within ``tol``) or above one."""
    if abs(value - 1.0) <= tol:
        return 0
    return 1 if value > 1.0 else -1


def same_side_of_one(a: float, b: float, tol: float = UNIT_TOL) -> bool:
    """False only when ``a`` and ``b`` lie clearly on opposite sides of one."""
    return side_of_one(a, tol) * side_of_one(b, tol) >= 0


def report(state: SymmetricState, *, relation_tol: float = 1e-10) -> SqueezingReport:
    """All squeezing figures for one state, with the cross-relations checked.

    Raises :class:`ConsistencyError` if R' falls below S, if S and E disagree
    about which side of 1 they are on, or if a squeezed state violates
    ``xi2_S = 1 - 2 (N-1) * negativity``.
    """
    n = state.n
    exp = pauli_expectations(state)
    frame = squeezing_frame(exp, n)
    s = xi2_general(exp, n)
    try:
        rp = xi2_Rprime(exp, n)
    except UndefinedSqueezingError:
        rp = None
    try:
        e = xi2_E(exp, n)
    except UndefinedSqueezingError:
        e = None
    neg = negativity_2q(reduce(state, 2))

    if rp is not None and rp < s - 1e-12 * max(1.0, abs(s)):
        raise ConsistencyError(f"xi2_R'={rp} below xi2_S={s}")
    if e is not None and not same_side_of_one(e, s):
        raise ConsistencyError(f"xi2_E={e} and xi2_S={s} disagree about separability")
    if s < 1.0 and abs(s - (1.0 - 2.0 * (n - 1) * neg)) > relation_tol:
        raise ConsistencyError(f"xi2_S={s} does not match negativity {neg}")
    return SqueezingReport(n, s, rp, e, neg, exp, frame)
