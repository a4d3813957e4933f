from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from splitorder.errors import ConfigurationError, ParseError
from splitorder.freealg import log_truncated
from splitorder.hall import X0, X1, build_W, generate_hall, lie_coordinates, name_of
from splitorder.scheme import Scheme, order_of_scheme, scheme_series
from splitorder.search import (Jet, Layout, ResidualModel, SearchFailure, SearchSpec, default_stages,
                               load_spec, residuals, scheme_residuals, snap, solve, verify_candidate)
from splitorder.search import SearchResult
from conftest import DATA

F = Fraction
W1 = build_W(1)
STRANG = Scheme([(F(1, 2), X1, 1), (F(1, 2), X1, 0)])


def test_default_stage_counts():
    assert [default_stages(n) for n in range(1, 7)] == [2, 3, 5, 8, 14, 23]


def test_residual_dimension():
    model = ResidualModel(SearchSpec(4, stages=4))
    assert model.n_residuals == 7
    assert X0 not in model.elements
    assert model.n_params == 8
    complex_model = ResidualModel(SearchSpec(3, stages=4, beta_domain="C"))
    assert complex_model.n_residuals == 8
    assert complex_model.n_params == 12
    assert complex_model.labels()[0].startswith("Re ")


def test_strang_residuals():
    r2 = scheme_residuals(STRANG, 2)
    assert max(abs(v) for v in r2.values()) < 1e-15
    r3 = {name_of(b): v for b, v in scheme_residuals(STRANG, 3).items()}
    assert abs(r3["M2"] + 1 / 24) < 1e-15
    assert abs(r3["W1"] - 1 / 12) < 1e-15


exact_schemes = st.lists(
    st.tuples(st.fractions(min_value=F(1, 8), max_value=2, max_denominator=8),
              st.sampled_from([X1, W1]),
              st.fractions(min_value=-2, max_value=2, max_denominator=8)),
    min_size=1, max_size=4)


@given(exact_schemes)
def test_float_residuals_match_exact_coordinates(stages):
    s = Scheme(stages)
    N = 4
    basis = generate_hall(2, N, "bstar")
    exact = lie_coordinates(log_truncated(scheme_series(s.normalized(), N)), basis).values
    for b, v in scheme_residuals(s, N).items():
        ref = 1 if b == X1 else 0
        assert abs(v - float(exact[b] - ref)) < 1e-12


@pytest.mark.parametrize("alpha,beta", [("R+", "R"), ("R", "R"), ("R*", "R+"), ("R+", "C"), ("R+", "C+")])
def test_jacobian_matches_finite_differences(alpha, beta):
    spec = SearchSpec(4, flows=[X1, W1], stages=5, alpha_domain=alpha, beta_domain=beta)
    model = ResidualModel(spec)
    p = np.random.default_rng(1).normal(size=model.n_params)
    r, J = model.evaluate(p)
    h = 1e-6
    fd = np.empty_like(J)
    for j in range(model.n_params):
        e = np.zeros(model.n_params)
        e[j] = h
        fd[:, j] = (model.residuals(p + e) - model.residuals(p - e)) / (2 * h)
    assert np.allclose(J, fd, atol=1e-7, rtol=1e-6)
    assert np.allclose(residuals(p, spec), r)


def test_jet_log_inverts_product_of_exponentials():
    L = Layout(3)
    assert L.size == 2 ** 4 - 1
    assert Layout(3) is L
    one = Jet.constant(L, 1)
    assert np.allclose(one.log().v, 0)


def test_coefficients_respect_domains():
    spec = SearchSpec(2, stages=3)
    alpha, beta, _, _ = ResidualModel(spec).coefficients(np.array([0.3, -2, 5, 1, 2, 3]))
    assert np.all(alpha > 0) and abs(alpha.sum() - 1) < 1e-15
    spec = SearchSpec(2, stages=3, alpha_domain="R", beta_domain="C+")
    alpha, beta, _, _ = ResidualModel(spec).coefficients(np.array([0.3, 2, 5, 1, 2, -1, 0, 1]))
    assert abs(alpha.sum() - 1) < 1e-15 and alpha[1] == 2
    assert np.all(beta.real > 0)


def test_snap_recovers_rationals():
    noisy = Scheme([(0.5 + 1e-13, X1, 1.0 - 1e-13), (0.5, X1, 0.0)])
    assert snap(noisy) == STRANG
    assert snap(Scheme([(0.5, X1, 0.123456789), (0.5, X1, 0.0)])) is None
    c = snap(Scheme([(0.5, X1, 0.5 + 0.25j), (0.5, X1, 0.5 - 0.25j)], beta_domain="C"))
    assert c is not None and c.kind == "gaussian"


def test_verify_candidate_rejects_low_order():
    spec = SearchSpec(3, stages=2)
    trial = SearchResult(Scheme([(0.5, X1, 1.0), (0.5, X1, 0.0)]), 0.0, {}, None, 0)
    v = verify_candidate(trial, spec)
    assert not v.verified
    assert v.method == "empirical"
    assert "need slope" in v.reason


def test_verify_candidate_accepts_exact_snap():
    spec = SearchSpec(2, stages=2)
    trial = SearchResult(Scheme([(0.5, X1, 1.0), (0.5, X1, 0.0)]), 0.0, {}, None, 0)
    v = verify_candidate(trial, spec)
    assert v.verified and v.method == "exact"
    assert trial.certificate == STRANG
    assert str(v) == "verified exactly: order 2"


def test_order_two_search_succeeds():
    spec = SearchSpec(2, stages=3, seed=7, restarts=10)
    res = solve(spec)
    assert res.residual_norm < 1e-12
    assert res.verification.verified
    assert abs(res.recompute_norm(spec) - res.residual_norm) < 1e-15
    assert all(st.alpha > 0 for st in res.scheme.stages)


def test_search_is_deterministic():
    spec = SearchSpec(2, stages=3, seed=11, restarts=5)
    a, b = solve(spec), solve(spec)
    assert np.array_equal(a.params, b.params)
    assert SearchSpec(2, stages=3).effective_seed() == SearchSpec(2, stages=3).effective_seed()


def test_real_drift_order_four():
    # negative drifts allowed: a triple-jump style composition exists with four stages
    spec = SearchSpec(4, stages=4, alpha_domain="R", seed=0, restarts=50)
    res = solve(spec)
    assert res.verification.verified
    assert any(st.alpha < 0 for st in res.scheme.stages)


def test_complex_order_three():
    spec = load_spec((DATA / "complex-order3.spec").read_text())
    res = solve(spec)
    assert res.verification.verified
    assert all(float(st.alpha) >= 0 for st in res.scheme.stages)
    assert any(complex(st.beta).imag != 0 for st in res.scheme.stages)


def test_failure_reports_history():
    spec = SearchSpec(3, stages=2, seed=0, restarts=4)
    with pytest.raises(SearchFailure) as info:
        solve(spec)
    exc = info.value
    assert len(exc.history) == 4
    assert min(exc.history) > 1e-3
    assert exc.best.residual_norm == min(exc.history)


def test_spec_yaml_round_trip():
    spec = SearchSpec(4, flows=[X1, W1], stages=6, beta_domain="C", seed=5, pattern=["X1", "W1"] * 3,
                      name="demo")
    again = load_spec(spec.dumps())
    assert again.to_dict() == spec.to_dict()
    assert again.pattern == [X1, W1] * 3


@pytest.mark.parametrize("name", ["complex-order3", "order4-w1", "order6-w1w2"])
def test_shipped_specs_load(name):
    spec = load_spec((DATA / f"{name}.spec").read_text())
    assert spec.name == name
    assert load_spec(spec.dumps()).to_dict() == spec.to_dict()


def test_spec_parse_errors():
    with pytest.raises(ParseError) as info:
        load_spec("target_order: 2\nflows: [X1\n")
    assert info.value.line is not None
    with pytest.raises(ParseError, match="colour"):
        load_spec("target_order: 2\ncolour: red\n")
    with pytest.raises(ParseError):
        load_spec("flows: [X1]\n")
    with pytest.raises(ParseError):
        load_spec("- 1\n- 2\n")
    with pytest.raises(ParseError):
        load_spec("target_order: 2\nflows: ['[X1,']\n")


@pytest.mark.parametrize("kw", [
    {"target_order": 0},
    {"target_order": 2, "alpha_domain": "Q"},
    {"target_order": 2, "beta_domain": "Z"},
    {"target_order": 2, "flows": []},
    {"target_order": 2, "flows": ["X0"]},
    {"target_order": 2, "stages": 3, "pattern": ["X1"]},
    {"target_order": 2, "stages": 0},
])
def test_spec_validation(kw):
    with pytest.raises(ConfigurationError):
        SearchSpec(**kw)


def test_flow_degree_above_target_is_rejected():
    with pytest.raises(ConfigurationError):
        ResidualModel(SearchSpec(2, flows=[X1, W1]))


def test_underdetermined_solution_is_verified_by_slope():
    # k = 2 leaves a one-parameter family of order-2 schemes, so no rational snap is expected
    res = solve(SearchSpec(2, stages=2, seed=1, restarts=5))
    v = res.verification
    assert v.verified
    if v.method == "empirical":
        assert all(x >= 2.7 for x in v.slopes.values())
    else:
        assert order_of_scheme(res.certificate).order >= 2
