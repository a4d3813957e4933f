from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from splitorder.errors import DomainError, NotLieError, ParseError
from splitorder.freealg import Polynomial, bracket, mul_truncated
from splitorder.hall import (X0, X1, HallBasis, Node, bstar_prefix, build_M, build_Q1,
                             build_Q1_flat, build_W, evaluate, generate_hall, lie_coordinates,
                             load_basis, mobius, name_of, parse_bracket, render,
                             structure_constants, validate_hall, witt_dimension)
from strategies import rationals

WITT_2 = [2, 1, 2, 3, 6, 9, 18, 30]


def test_mobius_small_values():
    assert [mobius(n) for n in range(1, 11)] == [1, -1, -1, 0, -1, 1, -1, 0, 0, 1]


def test_witt_dimensions_two_letters():
    assert [witt_dimension(2, n) for n in range(1, 9)] == WITT_2


def test_witt_dimensions_three_letters():
    # (1/n) sum_{d|n} mu(d) 3^(n/d)
    assert [witt_dimension(3, n) for n in range(1, 6)] == [3, 3, 8, 18, 48]


@pytest.mark.parametrize("policy", ["bstar", "lyndon"])
def test_generated_counts_match_witt(policy):
    basis = generate_hall(2, 8, policy)
    assert [len(basis.of_degree(n)) for n in range(1, 9)] == WITT_2
    assert len(basis.truncate(5)) == 14
    assert len(basis.truncate(6)) == 23
    assert len(basis) == 71


@pytest.mark.parametrize("policy", ["bstar", "lyndon"])
@pytest.mark.parametrize("N", [3, 5, 7])
def test_generated_bases_validate(policy, N):
    assert validate_hall(generate_hall(2, N, policy)) == []


def test_three_letter_basis_validates():
    basis = generate_hall(3, 4, "lyndon")
    assert [len(basis.of_degree(n)) for n in range(1, 5)] == [3, 3, 8, 18]
    assert validate_hall(basis) == []


def test_bstar_prefix_is_reproduced():
    prefix = bstar_prefix()
    assert len(prefix) == 14
    assert generate_hall(2, 5, "bstar").elements == tuple(prefix)
    assert prefix[-1] == X0
    names = [name_of(b) for b in prefix]
    for expected in ["X1", "M1", "W1", "M2", "M3", "M4", "W2", "Q1"]:
        assert expected in names


def test_bstar_contains_named_brackets_at_higher_degree():
    basis = generate_hall(2, 8, "bstar")
    for b in [build_M(7), build_W(2), build_W(3), build_Q1_flat()]:
        assert b in basis


def test_validator_reports_missing_element():
    basis = generate_hall(2, 4, "bstar")
    broken = HallBasis(2, 4, [b for b in basis.elements if b != build_M(2)], "broken")
    axioms = {v.axiom for v in validate_hall(broken)}
    assert axioms & {"completeness", "witt", "closure"}


def test_validator_reports_bad_order():
    basis = generate_hall(2, 3, "bstar")
    # moving X0 to the front breaks the ordering axiom for (X1, X0)
    shuffled = HallBasis(2, 3, (X0,) + tuple(b for b in basis.elements if b != X0), "shuffled")
    assert validate_hall(shuffled)


def test_named_brackets():
    assert build_M(0) == X1
    assert build_M(1) == Node(X1, X0)
    assert build_W(1) == Node(X1, Node(X1, X0))
    assert build_W(2) == Node(build_M(1), build_M(2))
    assert build_Q1() == Node(X1, Node(X1, build_W(1)))
    assert build_Q1_flat() == Node(build_W(1), Node(build_W(1), X0))
    with pytest.raises(DomainError):
        build_M(-1)
    with pytest.raises(DomainError):
        build_W(0)


def test_tree_counts_and_degree():
    w2 = build_W(2)
    assert w2.degree == 5
    assert (w2.count(0), w2.count(1)) == (3, 2)
    assert w2.foliage() == (1, 0, 1, 0, 0)


def test_render_and_parse_round_trip():
    for b in generate_hall(2, 6, "bstar"):
        assert parse_bracket(render(b)) == b
        assert parse_bracket(render(b, "()")) == b
        assert parse_bracket(name_of(b)) == b


def test_parse_error_reports_column():
    with pytest.raises(ParseError) as err:
        parse_bracket("[X1,,X0]")
    assert err.value.column == 5
    with pytest.raises(ParseError):
        parse_bracket("[X1,X0")
    with pytest.raises(ParseError):
        parse_bracket("X2", ngens=2)


def test_evaluate_commutator():
    N = 3
    x0, x1 = Polynomial.generator(0, N=N), Polynomial.generator(1, N=N)
    assert evaluate(build_M(1), N) == mul_truncated(x1, x0) - mul_truncated(x0, x1)
    assert evaluate(build_W(1), N) == bracket(x1, bracket(x1, x0))


def test_jacobi_reduction_of_w2():
    N = 5
    W1, M3 = evaluate(build_W(1), N), evaluate(build_M(3), N)
    x0, x1 = evaluate(X0, N), evaluate(X1, N)
    assert evaluate(build_W(2), N) == bracket(bracket(W1, x0), x0) - bracket(x1, M3)


@given(st.lists(rationals, min_size=23, max_size=23))
def test_coordinates_recover_random_lie_elements(coeffs):
    basis = generate_hall(2, 6, "bstar")
    p = Polynomial.zero(2, 6)
    for b, c in zip(basis.elements, coeffs):
        p = p + evaluate(b, 6).scale(c)
    coords = lie_coordinates(p, basis)
    assert all(coords[b] == c for b, c in zip(basis.elements, coeffs))
    assert coords.reconstruct() == p


def test_non_lie_polynomial_is_rejected():
    p = Polynomial({(0, 1): 1}, N=2)
    with pytest.raises(NotLieError) as err:
        lie_coordinates(p, generate_hall(2, 2))
    assert err.value.degree == 2


def test_coordinates_accept_names():
    basis = generate_hall(2, 3)
    coords = lie_coordinates(evaluate(build_W(1), 3).scale(Fraction(2, 3)), basis)
    assert coords["W1"] == Fraction(2, 3)
    assert coords["M2"] == 0


def test_structure_constants_are_antisymmetric_and_closed():
    basis = generate_hall(2, 5)
    table = structure_constants(basis)
    for (i, j), row in table.items():
        if (j, i) in table:
            assert table[(j, i)] == {k: -c for k, c in row.items()}
        lhs = bracket(evaluate(basis[i], 5), evaluate(basis[j], 5))
        rhs = Polynomial.zero(2, 5)
        for k, c in row.items():
            rhs = rhs + evaluate(basis[k], 5).scale(c)
        assert lhs == rhs


@pytest.mark.parametrize("policy", ["bstar", "lyndon"])
def test_basis_dump_round_trip(policy):
    basis = generate_hall(2, 6, policy)
    again = load_basis(basis.dump())
    assert again == basis
    assert validate_hall(again) == []


def test_load_basis_rejects_garbage():
    with pytest.raises(ParseError) as err:
        load_basis("# hall basis: letters=2 degree=2\n(X1,X0)\n(X1,\n")
    assert err.value.line == 3


def test_unknown_policy():
    with pytest.raises(Exception):
        generate_hall(2, 3, "nope")
