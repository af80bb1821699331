import numpy as np
import pytest

from dicke_squeeze.dicke_core import (
    ModelParams, Scaling, dicke_basis_state, ground_state, random_coefficients, random_state, trace,
)
from dicke_squeeze.liouville import steady_state
from dicke_squeeze.oracle import embed, partial_trace_keep
from dicke_squeeze.reduction import (
    SIGMA, dense_correlators, one_qubit_matrix, pauli_expectations, reduce, sxx_from_coefficients,
    two_qubit_matrix,
)


def test_reduce_full_is_identity(rng):
    s = random_state(5, rng, scaling=Scaling.RAW)
    r = reduce(s, 5)
    assert r.lam == 0
    assert np.allclose(r.state.packed, s.packed, rtol=1e-15)


def test_reduce_ground_state():
    assert np.array_equal(reduce(ground_state(6), 2).state.packed, ground_state(2).packed)


def test_reduce_dicke_state_hand_values():
    r = reduce(dicke_basis_state(4, 2), 2).state
    assert r.entry(0, 0) == pytest.approx(1 / 6, rel=1e-15)
    assert r.entry(1, 1) == pytest.approx(2 / 6, rel=1e-15)
    assert r.entry(2, 2) == pytest.approx(1 / 6, rel=1e-15)
    assert r.entry(0, 1) == r.entry(0, 2) == r.entry(1, 2) == 0.0
    # and by brute-force partial trace of the 16-dimensional state
    dense = partial_trace_keep(embed(dicke_basis_state(4, 2)), 4, 2)
    assert np.allclose(two_qubit_matrix(r), dense, atol=1e-15)


def test_reduce_range_checks(rng):
    s = random_state(3, rng)
    for d in (0, 4):
        with pytest.raises(ValueError):
            reduce(s, d)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_reduce_matches_partial_trace(n, rng):
    for scaling in Scaling:
        s = random_state(n, rng, scaling=scaling)
        rho = embed(s)
        assert np.allclose(two_qubit_matrix(reduce(s, 2)), partial_trace_keep(rho, n, 2), atol=1e-13)
        assert np.allclose(one_qubit_matrix(reduce(s, 1)), partial_trace_keep(rho, n, 1), atol=1e-13)


def test_reduce_composes(rng):
    for n in range(2, 11):
        s = random_coefficients(n, rng)
        for d1 in range(1, n + 1):
            for d2 in range(1, d1 + 1):
                a = reduce(reduce(s, d1).state, d2).state.packed
                b = reduce(s, d2).state.packed
                assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.max(np.abs(b)))


def test_reduce_trace_preserving_and_linear(rng):
    for n in (3, 8, 30):
        s = random_state(n, rng)
        for d in (1, 2, n // 2):
            assert abs(trace(reduce(s, d).state) - 1) < 1e-12
    zero = random_coefficients(4, rng) * 0.0
    assert np.all(reduce(zero, 2).state.packed == 0)


def test_reduce_normalized_large_n():
    s = steady_state(ModelParams.from_ratio(1200, 400.0)).state
    r = reduce(s, 2).state
    assert abs(trace(r) - 1) < 1e-12


def test_ground_state_expectations():
    for n in (2, 5):
        e = pauli_expectations(ground_state(n))
        assert (e.sx, e.sy, e.sz) == (0.0, 0.0, 1.0)
        assert (e.sxx, e.syy, e.szz) == (0.0, 0.0, 1.0)


def test_pair_correlator_at_known_point():
    e = pauli_expectations(steady_state(ModelParams.from_ratio(2, 1.0)).state)
    assert e.sxx == pytest.approx(-1 / 11, abs=1e-14)


def test_sxx_coefficient_path_matches_dense_trace(rng):
    for _ in range(100):
        n = int(rng.integers(2, 9))
        red = reduce(random_state(n, rng), 2)
        dense = np.trace(np.kron(SIGMA["x"], SIGMA["x"]) @ two_qubit_matrix(red)).real
        assert sxx_from_coefficients(red) == pytest.approx(dense, abs=1e-12)


def test_structural_zeros_and_trace_identity(rng):
    for _ in range(50):
        n = int(rng.integers(2, 12))
        e = pauli_expectations(random_state(n, rng))
        assert abs(e.sx) < 1e-14 and abs(e.sxy) < 1e-14 and abs(e.sxz) < 1e-14
        assert e.sxx + e.syy + e.szz == pytest.approx(1.0, abs=1e-12)
        for v in e.as_dict().values():
            assert -1 - 1e-12 <= v <= 1 + 1e-12
        c = dense_correlators(reduce(random_state(n, rng), 2))
        assert np.allclose(c, c.T, atol=1e-14)


def test_expectations_need_two_particles():
    with pytest.raises(ValueError):
        pauli_expectations(ground_state(1))
