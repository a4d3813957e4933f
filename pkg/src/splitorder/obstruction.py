"""Coercive obstruction functionals and order bounds.

For a Dirac control on [0, 1] meeting the matching hypotheses, a signed
combination of first-kind coordinates on the bad bracket W_N (and M_{2N} when
that coordinate is left free) equals a squared negative-Sobolev distance
between the control and the reference drift, which is strictly positive.
The functions here compute both sides exactly and report whether the
identity holds.

Integrating by parts N times gives the sign of the M_{2N} term as (-1)^(N+1):
zeta_W1 + zeta_M2 for N = 1 but zeta_W2 - zeta_M4 for N = 2.  The
combination with a plus sign for N = 2 is still reported (``stated_sum``)
because it is the one commonly quoted; it is not an identity and can be
negative.
"""

import json
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError
from .freealg import decimal_string, format_scalar
from .hall import X0, X1, build_M, build_W, generate_hall, name_of, render
from .piecewise import Poly1
from .scheme import reference_zeta, xi_trajectory, zeta_coordinates

OBSTRUCTED = "obstructed"
NOT_MET = "hypotheses-not-met"


@dataclass
class ObstructionReport:
    bracket: object
    functional_value: Fraction
    constraint_residuals: dict
    verdict: str
    coordinate_sum: object = None
    identity_holds: object = None
    terms: tuple = ()
    stated_sum: object = None

    def to_dict(self):
        return {
            "bracket": name_of(self.bracket),
            "bracket_expression": render(self.bracket),
            "functional_value": format_scalar(self.functional_value),
            "functional_decimal": decimal_string(self.functional_value),
            "constraint_residuals": {k: format_scalar(v) for k, v in self.constraint_residuals.items()},
            "verdict": self.verdict,
            "coordinate_terms": [("+" if sign > 0 else "-") + name_of(t) for t, sign in self.terms],
            "coordinate_sum": None if self.coordinate_sum is None else format_scalar(self.coordinate_sum),
            "identity_holds": self.identity_holds,
            "stated_sum": None if self.stated_sum is None else format_scalar(self.stated_sum),
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2)


def _check_unit_horizon(c):
    if c.horizon != 1:
        raise DomainError("the obstruction functionals assume a horizon normalized to 1")


def _check_channels(c, allowed):
    bad = [ch for ch in c.channels() if ch not in allowed]
    if bad:
        raise DomainError("unsupported channel(s) " + ", ".join(render(b) for b in bad)
                          + "; allowed: " + ", ".join(name_of(b) for b in allowed))


def _residuals(zeta, elements):
    ref = reference_zeta(zeta.basis, zeta.N)
    return {name_of(b): zeta.values[b] - ref.values[b] for b in elements}


def _square_integral(pieces):
    """Exact sum of the integrals of p(t)^2 over the given (start, end, p) pieces."""
    total = Fraction(0)
    for a, b, p in pieces:
        total += (p * p).integrate(a, b)
    return total


def _report(bracket, value, residuals, zeta, terms):
    """``terms`` is a tuple of (bracket, sign) pairs forming the coordinate side."""
    met = all(v == 0 for v in residuals.values())
    stated = sum((zeta.values[t] for t, _ in terms), Fraction(0))
    if not met:
        return ObstructionReport(bracket, value, residuals, NOT_MET, terms=terms, stated_sum=stated)
    lhs = sum((sign * zeta.values[t] for t, sign in terms), Fraction(0))
    return ObstructionReport(bracket, value, residuals, OBSTRUCTED, lhs, lhs == value, terms, stated)


def w1_functional(c):
    """1/2 int_0^1 (U(t) - t)^2 dt for the X_1 primitive U."""
    pieces = [(a, b, Poly1((U, -1))) for a, b, U in c.primitive(X1)]
    return _square_integral(pieces) / 2


def w1_obstruction(c):
    _check_unit_horizon(c)
    _check_channels(c, (X1,))
    M1, M2, W1 = build_M(1), build_M(2), build_W(1)
    value = w1_functional(c)
    zeta = zeta_coordinates(c, generate_hall(2, 3, "bstar"), 3)
    residuals = _residuals(zeta, (X1, M1))
    return _report(W1, value, residuals, zeta, ((W1, 1), (M2, 1)))


def wN_functional(c, N, trajectory=None):
    """1/2 int_0^1 (xi_{M_{N-1}}(s) - s^N / N!)^2 ds, exact."""
    if trajectory is None:
        d = max([N] + [ch.degree for ch in c.channels()])
        trajectory = xi_trajectory(c, generate_hall(2, d, "bstar"), d)
    ref = Poly1.monomial(N, Fraction(1, math.factorial(N)))
    pieces = [(a, b, p - ref) for a, b, p in trajectory.pieces(build_M(N - 1))]
    return _square_integral(pieces) / 2


def w2_obstruction(c):
    _check_unit_horizon(c)
    W1, W2, M4 = build_W(1), build_W(2), build_M(4)
    _check_channels(c, (X1, W1))
    basis = generate_hall(2, 5, "bstar")
    value = wN_functional(c, 2, xi_trajectory(c, basis, 5))
    zeta = zeta_coordinates(c, basis, 5)
    residuals = _residuals(zeta, [build_M(k) for k in range(4)])
    return _report(W2, value, residuals, zeta, ((W2, 1), (M4, -1)))


def forbidden_flows(N):
    return [build_M(k) for k in range(N, 2 * N + 1)] + [build_W(N)]


def wN_obstruction(c, N, flows=None):
    """General W_N functional with the hypotheses M_0..M_{2N} matched."""
    if N < 1:
        raise DomainError("N must be positive")
    flows = list(flows) if flows is not None else c.channels()
    for f in flows:
        if f in forbidden_flows(N):
            raise DomainError(f"flow {name_of(f)} is excluded by the W_{N} criterion")
    _check_unit_horizon(c)
    _check_channels(c, flows)
    degree = 2 * N + 1
    basis = generate_hall(2, degree, "bstar")
    value = wN_functional(c, N, xi_trajectory(c, basis, degree))
    zeta = zeta_coordinates(c, basis, degree)
    residuals = _residuals(zeta, [build_M(k) for k in range(2 * N + 1)])
    return _report(build_W(N), value, residuals, zeta, ((build_W(N), 1),))


def max_order_bound(flows, search_limit=16):
    """2N for the smallest N whose criterion excludes no given flow, else None."""
    flows = list(flows)
    if X1 not in flows:
        raise DomainError("the flow set must contain X1")
    if X0 in flows:
        raise DomainError("X0 is implicit and must not be listed")
    for N in range(1, search_limit + 1):
        if not any(f in flows for f in forbidden_flows(N)):
            return 2 * N
    return None


@dataclass
class DegeneracyWitness:
    brackets: tuple
    coefficients: tuple

    def __str__(self):
        (a, b), (ca, cb) = self.brackets, self.coefficients
        return (f"{format_scalar(ca)}*f_{name_of(a)} + {format_scalar(cb)}*f_{name_of(b)} = 0 "
                f"is forced, so f_{name_of(a)} and f_{name_of(b)} are linearly dependent")


def degeneracy_witness(zeta, degree, w1_vanishes=False):
    """The pair of brackets an order-(degree) relative scheme forces to be dependent."""
    if degree == 3:
        matched, pair = (X0, X1, build_M(1)), (build_M(2), build_W(1))
    elif degree == 5:
        if not w1_vanishes:
            raise DomainError("the degree-5 witness assumes f_W1 = 0")
        matched, pair = (X0, X1) + tuple(build_M(k) for k in range(1, 4)), (build_M(4), build_W(2))
    else:
        raise DomainError("degree must be 3 or 5")
    if zeta.N < degree:
        raise DomainError(f"coordinates are only known through degree {zeta.N}")
    ref = reference_zeta(zeta.basis, zeta.N)
    off = [name_of(b) for b in matched if zeta.values[b] != ref.values[b]]
    if off:
        raise DomainError("matching conditions unmet for " + ", ".join(off))
    coeffs = tuple(zeta.values[b] for b in pair)
    if all(v == 0 for v in coeffs):
        raise DomainError("both coefficients vanish; no dependence is forced")
    return DegeneracyWitness(pair, coeffs)
