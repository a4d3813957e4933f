import json
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from splitorder.errors import DomainError
from splitorder.hall import X0, X1, build_M, build_Q1, build_W, generate_hall, name_of
from splitorder.obstruction import (NOT_MET, OBSTRUCTED, degeneracy_witness, forbidden_flows,
                                    max_order_bound, w1_functional, w1_obstruction, w2_obstruction,
                                    wN_functional, wN_obstruction)
from splitorder.sampling import matching_control, random_control
from splitorder.scheme import DiracControl, Impulse, load, scheme_to_control, zeta_coordinates
from conftest import DATA

F = Fraction
W1, W2, W3 = build_W(1), build_W(2), build_W(3)
TWOKICK = DiracControl(1, [Impulse(0, X1, F(1, 3)), Impulse(F(3, 4), X1, F(2, 3))])
seeds = st.integers(0, 2 ** 32 - 1)


def test_twokick_w1_value():
    rep = w1_obstruction(TWOKICK)
    assert rep.verdict == OBSTRUCTED
    assert rep.functional_value == F(1, 48)
    assert rep.coordinate_sum == F(1, 48)
    assert rep.identity_holds is True
    assert rep.constraint_residuals == {"X1": 0, "M1": 0}


def test_strang_w1_value():
    strang = load((DATA / "strang.scheme").read_text())
    rep = w1_obstruction(scheme_to_control(strang))
    assert rep.functional_value == F(1, 24)
    assert rep.identity_holds


def test_w1_functional_reference_is_zero():
    # the drift itself (U(t) = t) is not a Dirac control; a dense comb approaches it
    n = 16
    comb = DiracControl(1, [Impulse(F(k, n), X1, F(1, n)) for k in range(1, n + 1)])
    assert 0 < w1_functional(comb) < F(1, 100)


@given(seeds, st.integers(2, 5))
def test_w1_identity_and_positivity(seed, n):
    c = matching_control(random.Random(seed), n, 2)
    rep = w1_obstruction(c)
    assert rep.verdict == OBSTRUCTED
    assert rep.identity_holds
    assert rep.functional_value > 0


@given(seeds, st.integers(4, 6), st.integers(0, 2))
def test_w2_identity_with_minus_sign(seed, n, n_extra):
    c = matching_control(random.Random(seed), n, 4, extra=(W1,), n_extra=n_extra)
    rep = w2_obstruction(c)
    assert rep.verdict == OBSTRUCTED
    assert rep.terms == ((W2, 1), (build_M(4), -1))
    assert rep.coordinate_sum == rep.functional_value > 0


def test_w2_plus_sign_counterexample():
    c = load((DATA / "w2-counterexample.control").read_text())
    rep = w2_obstruction(c)
    assert rep.identity_holds
    assert rep.functional_value == F(6959, 3317760)
    assert rep.stated_sum == F(-1577, 3317760)
    assert rep.stated_sum != rep.functional_value


def test_w2_from_integration_by_parts():
    # second-kind form of the same identity: xi_W2 - xi_M4 = value + 1/60
    from splitorder.scheme import xi_coordinates
    c = matching_control(random.Random(3), 5, 4, extra=(W1,), n_extra=1)
    xi = xi_coordinates(c, generate_hall(2, 5, "bstar"), 5).values
    assert xi[W2] - xi[build_M(4)] == wN_functional(c, 2) + F(1, 60)


@given(seeds, st.integers(1, 3))
def test_wN_identity(seed, N):
    extra = tuple(build_W(j) for j in range(1, N))
    c = matching_control(random.Random(seed), 2 * N + 2, 2 * N + 1, extra=extra, n_extra=1 if extra else 0)
    rep = wN_obstruction(c, N)
    assert rep.verdict == OBSTRUCTED
    assert rep.identity_holds
    assert rep.functional_value > 0


@given(seeds)
def test_wN_with_N_one_matches_w1_functional(seed):
    c = matching_control(random.Random(seed), 4, 3)
    assert wN_obstruction(c, 1).functional_value == w1_obstruction(c).functional_value


def test_unmatched_control_reports_hypotheses_not_met():
    c = DiracControl(1, [Impulse(1, X1, 1)])
    rep = w1_obstruction(c)
    assert rep.verdict == NOT_MET
    assert rep.constraint_residuals == {"X1": 0, "M1": F(-1, 2)}
    assert rep.identity_holds is None
    assert w2_obstruction(c).verdict == NOT_MET


@given(seeds)
def test_random_controls_rarely_meet_hypotheses(seed):
    c = random_control(random.Random(seed), 3)
    rep = w1_obstruction(c)
    z = zeta_coordinates(c, generate_hall(2, 3, "bstar"), 3).values
    met = z[X1] == 1 and z[build_M(1)] == 0
    assert (rep.verdict == OBSTRUCTED) == met


def test_report_json():
    data = json.loads(w1_obstruction(TWOKICK).dumps())
    assert data["bracket"] == "W1"
    assert data["functional_value"] == "1/48"
    assert data["coordinate_terms"] == ["+W1", "+M2"]
    assert data["identity_holds"] is True


@pytest.mark.parametrize("call", [
    lambda: w1_obstruction(DiracControl(2, [Impulse(1, X1, 2)])),
    lambda: w1_obstruction(DiracControl(1, [Impulse(1, W1, 2)])),
    lambda: w2_obstruction(DiracControl(1, [Impulse(1, W2, 2)])),
    lambda: wN_obstruction(TWOKICK, 0),
    lambda: wN_obstruction(TWOKICK, 1, flows=[X1, W1]),
    lambda: wN_obstruction(TWOKICK, 2, flows=[X1, build_M(3)]),
])
def test_domain_errors(call):
    with pytest.raises(DomainError):
        call()


def test_wN_error_names_the_flow():
    with pytest.raises(DomainError, match="M3"):
        wN_obstruction(TWOKICK, 2, flows=[X1, build_M(3)])


def test_forbidden_flows():
    assert forbidden_flows(1) == [build_M(1), build_M(2), W1]
    assert W2 in forbidden_flows(2) and W1 not in forbidden_flows(2)


@pytest.mark.parametrize("flows,bound", [
    ([X1], 2),
    ([X1, W1], 4),
    ([X1, W1, W2], 6),
    ([X1, build_M(1)], 4),
    ([X1, build_Q1()], 2),
])
def test_max_order_bound(flows, bound):
    assert max_order_bound(flows) == bound


def test_max_order_bound_unbounded_and_errors():
    flows = [X1] + [build_W(j) for j in range(1, 5)]
    assert max_order_bound(flows, search_limit=4) is None
    with pytest.raises(DomainError):
        max_order_bound([W1])
    with pytest.raises(DomainError):
        max_order_bound([X0, X1])


def test_degeneracy_witness_degree_3():
    z = zeta_coordinates(TWOKICK, generate_hall(2, 3, "bstar"), 3)
    w = degeneracy_witness(z, 3)
    assert [name_of(b) for b in w.brackets] == ["M2", "W1"]
    assert w.coefficients == (F(1, 48), 0)
    assert "linearly dependent" in str(w)


@given(seeds)
def test_degeneracy_witness_degree_5(seed):
    c = matching_control(random.Random(seed), 5, 4, extra=(W1,), n_extra=1)
    z = zeta_coordinates(c, generate_hall(2, 5, "bstar"), 5)
    w = degeneracy_witness(z, 5, w1_vanishes=True)
    assert w.brackets == (build_M(4), W2)
    assert w.coefficients[1] - w.coefficients[0] > 0


def test_degeneracy_witness_errors():
    z = zeta_coordinates(TWOKICK, generate_hall(2, 5, "bstar"), 5)
    with pytest.raises(DomainError):
        degeneracy_witness(z, 5)
    with pytest.raises(DomainError):
        degeneracy_witness(z, 4)
    unmatched = zeta_coordinates(DiracControl(1, [Impulse(1, X1, 1)]), generate_hall(2, 3, "bstar"), 3)
    with pytest.raises(DomainError, match="M1"):
        degeneracy_witness(unmatched, 3)
