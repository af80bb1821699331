import math

import numpy as np
import pytest

from dicke_squeeze.dicke_core import ModelParams, dicke_basis_state, ground_state, random_state
from dicke_squeeze.liouville import steady_state
from dicke_squeeze.reduction import PauliExpectations, pauli_expectations, reduce
from dicke_squeeze.squeezing import (
    ConsistencyError, UndefinedSqueezingError, negativity_2q, partial_transpose, pt_eigenvalues,
    report, same_side_of_one, side_of_one, squeezing_frame, xi2_E, xi2_general, xi2_minimum_form,
    xi2_Rprime, xi2_special,
)


def steady(n, om):
    return steady_state(ModelParams.from_ratio(n, om)).state


def test_ground_state_report():
    r = report(ground_state(8))
    assert r.xi2_S == r.xi2_E == r.xi2_Rprime == 1.0
    assert r.negativity == 0.0


def test_report_at_known_point():
    r = report(steady(2, 1.0))
    assert r.xi2_S == pytest.approx(10 / 11, abs=1e-12)
    assert r.negativity == pytest.approx(1 / 22, abs=1e-12)
    assert r.xi2_E == pytest.approx(5 / 6, abs=1e-12)
    # squeezed by xi2_S yet not by xi2_R'
    assert r.xi2_S < 1 < r.xi2_Rprime
    assert r.xi2_Rprime == pytest.approx(1.1, abs=1e-12)


def test_three_particle_value():
    assert xi2_general(pauli_expectations(steady(3, 1.0)), 3) == pytest.approx(31 / 37, abs=1e-12)


def test_special_form_at_boundary_and_dicke():
    assert xi2_special(steady(2, math.sqrt(2))) == pytest.approx(1.0, abs=1e-10)
    assert xi2_special(dicke_basis_state(6, 3)) >= 1.0


@pytest.mark.parametrize("n", range(2, 11))
def test_three_paths_agree_on_steady_states(n):
    for om in np.linspace(0.0, 1.5 * n, 12):
        s = steady(n, om)
        e = pauli_expectations(s)
        g = xi2_general(e, n)
        assert xi2_minimum_form(e, n) == pytest.approx(g, abs=1e-12)
        assert xi2_special(s) == pytest.approx(g, abs=1e-12)


def test_special_form_matches_reduction_path_up_to_40(rng):
    for n in (12, 25, 40):
        s = steady(n, 0.4 * n)
        e = pauli_expectations(s)
        assert xi2_special(s) == pytest.approx(1 + (n - 1) * e.sxx, abs=1e-12)


def test_frame_properties(rng):
    for _ in range(40):
        n = int(rng.integers(2, 11))
        e = pauli_expectations(steady(n, rng.uniform(0.1, 2 * n)))
        f = squeezing_frame(e, n)
        assert 0 <= f.theta <= math.pi
        assert np.linalg.norm(f.n_perp) == pytest.approx(1.0, abs=1e-14)
        assert abs(f.b_param) < 1e-14
        # n_perp is orthogonal to the mean spin
        assert abs(np.dot(f.n_perp, e.mean_spin())) < 1e-12


def test_frame_quadrants():
    base = dict(sxx=0.0, syy=0.0, szz=0.0, syz=0.0)
    for sx, sy, expect in [(0.5, 0.5, math.pi / 4), (-0.5, 0.5, 3 * math.pi / 4),
                           (-0.5, -0.5, -3 * math.pi / 4), (0.5, -0.5, -math.pi / 4)]:
        f = squeezing_frame(PauliExpectations(sx=sx, sy=sy, sz=0.1, **base), 4)
        assert f.phi == pytest.approx(expect, abs=1e-15)


def test_degenerate_frame():
    e = PauliExpectations(sx=0, sy=0, sz=0, sxx=-0.1, syy=0.5, szz=0.6, syz=0.0)
    assert squeezing_frame(e, 4).degenerate
    assert xi2_general(e, 4) == pytest.approx(1 + 3 * -0.1, abs=1e-15)
    assert xi2_minimum_form(e, 4) == xi2_general(e, 4)
    with pytest.raises(UndefinedSqueezingError):
        xi2_Rprime(e, 4)


def test_xi2_e_values():
    zero = PauliExpectations(sx=0, sy=0, sz=1, sxx=0, syy=0, szz=1, syz=0)
    assert xi2_E(zero, 5) == 1.0
    with pytest.raises(UndefinedSqueezingError):
        xi2_E(PauliExpectations(sx=0, sy=0, sz=0, sxx=1, syy=0, szz=0, syz=0), 3)


def test_monotone_link_in_sxx():
    xs = np.linspace(-0.99, 0.99, 200)
    for n in (2, 7):
        e = [xi2_E(PauliExpectations(0, 0, 1, x, 0, 0, 0), n) for x in xs]
        s = [1 + (n - 1) * x for x in xs]
        assert np.all(np.diff(e) > 0) and np.all(np.diff(s) > 0)


def test_negativity_examples():
    assert negativity_2q(reduce(ground_state(4), 2)) == 0.0
    assert negativity_2q(reduce(steady(2, 1.0), 2)) == pytest.approx(1 / 22, abs=1e-14)
    with pytest.raises(ValueError):
        negativity_2q(reduce(ground_state(4), 3))


def test_partial_transpose_involution(rng):
    m = rng.standard_normal((4, 4))
    assert np.array_equal(partial_transpose(partial_transpose(m)), m)


def test_at_most_one_negative_pt_eigenvalue(rng):
    for n in range(2, 11):
        for om in np.linspace(0, 2 * n, 15):
            ev = pt_eigenvalues(reduce(steady(n, om), 2))
            assert np.sum(ev < -1e-14) <= 1


def test_relations_on_scan_grid():
    for n in range(2, 11):
        for om in np.linspace(0, 2 * n, 31):
            r = report(steady(n, om))
            e = r.expectations
            if r.xi2_S < 1:
                assert abs(r.xi2_S - (1 - 2 * (n - 1) * r.negativity)) < 1e-10
            if e.sxx < 0:
                assert r.xi2_S < 1
            if r.xi2_Rprime is not None:
                assert r.xi2_Rprime >= r.xi2_S - 1e-12
            assert same_side_of_one(r.xi2_E, r.xi2_S)


def test_dicke_states_never_squeezed():
    for n in range(2, 11):
        for k in range(n + 1):
            assert report(dicke_basis_state(n, k)).xi2_S >= 1 - 1e-12


def test_report_flags_inconsistent_states(rng):
    # random physical states violate the steady-state-only negativity link
    hits = 0
    for _ in range(200):
        try:
            report(random_state(int(rng.integers(2, 7)), rng))
        except ConsistencyError:
            hits += 1
    assert hits > 0


def test_side_of_one():
    assert side_of_one(1 + 1e-13) == 0
    assert side_of_one(0.5) == -1 and side_of_one(2.0) == 1
    assert same_side_of_one(1.0, 0.3) and not same_side_of_one(0.9, 1.1)


def test_report_json_roundtrip():
    import json
    d = report(steady(3, 1.0)).to_json_dict()
    assert json.loads(json.dumps(d))["xi2_S"] == pytest.approx(31 / 37, abs=1e-12)
