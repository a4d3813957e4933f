"""Splitting schemes, Dirac controls and their coordinates.

Conventions
-----------
A :class:`Scheme` is a list of stages in *time order*: stage ``i`` first
runs the drift X_0 for time ``alpha_i`` and then applies the impulse
``exp(beta_i * c_i)``.  Written as a composition of flows acting on x(0) the
same scheme reads right to left, so the textbook product
``e^{a1 f0} e^{b1 f1} ... e^{ak f0} e^{bk f1}`` corresponds to the reversed
stage list; :meth:`Scheme.from_composition` performs that conversion.

The formal series solves S' = S (X_0 + sum_c u_c c), so the earliest factor
sits on the left: a kick ``b`` at time 0 followed by a drift ``a`` has series
``exp(b X_1) exp(a X_0)``.  Reversing every word maps this series to the
flow-ordered product; the reversal is an antiautomorphism sending the
evaluation of a bracket b to (-1)^(|b|-1) e(b).

Second-kind coordinates use the product formula with the largest basis
element leftmost: Ser = exp(xi_{b_R} b_R) ... exp(xi_{b_1} b_1).
"""

from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError, ParseError
from .freealg import (FLOAT, RATIONAL, GaussianRational, Polynomial,
                      coerce_scalar, exp_truncated, format_scalar, grade, join_kinds,
                      log_truncated, mul_truncated, parse_scalar, scalar_kind)
from .hall import (X0, X1, LieCoordinates, evaluate, generate_hall, lie_coordinates,
                   name_of, parse_bracket, render, structure_constants)
from .piecewise import Poly1

ALPHA_DOMAINS = ("R", "R+", "R*")
BETA_DOMAINS = ("R", "R+", "C", "C+")


def _is_real(x):
    if isinstance(x, GaussianRational):
        return x.im == 0
    if isinstance(x, complex):
        return x.imag == 0
    return True


def _real(x):
    if isinstance(x, GaussianRational):
        return x.re
    if isinstance(x, complex):
        return x.real
    return x


def _check_alpha(a, domain, first):
    if not _is_real(a):
        return "must be real"
    a = _real(a)
    if domain == "R+" and (a < 0 or (a == 0 and not first)):
        return "must be positive (only a leading zero drift is allowed)"
    if domain == "R*" and a == 0 and not first:
        return "must be nonzero"
    return None


def _check_beta(b, domain):
    if domain in ("R", "R+") and not _is_real(b):
        return "must be real"
    if domain in ("R+", "C+") and b != 0 and _real(b) <= 0:
        return "must have positive real part"
    return None


@dataclass(frozen=True)
class Stage:
    alpha: object
    channel: object
    beta: object


class Scheme:
    """Time-ordered splitting stages with declared coefficient domains."""

    def __init__(self, stages, alpha_domain="R+", beta_domain="R"):
        if alpha_domain not in ALPHA_DOMAINS:
            raise DomainError(f"unknown alpha domain {alpha_domain!r}")
        if beta_domain not in BETA_DOMAINS:
            raise DomainError(f"unknown beta domain {beta_domain!r}")
        out = []
        for i, st in enumerate(stages):
            if not isinstance(st, Stage):
                st = Stage(*st)
            if st.channel == X0:
                raise DomainError("X0 is the drift; it cannot be an impulse channel")
            err = _check_alpha(st.alpha, alpha_domain, i == 0)
            if err:
                raise DomainError(f"stage {i + 1}: alpha {format_scalar(st.alpha)} {err} in {alpha_domain}")
            err = _check_beta(st.beta, beta_domain)
            if err:
                raise DomainError(f"stage {i + 1}: beta {format_scalar(st.beta)} {err} in {beta_domain}")
            out.append(st)
        if not out:
            raise DomainError("a scheme needs at least one stage")
        self.stages = tuple(out)
        self.alpha_domain = alpha_domain
        self.beta_domain = beta_domain

    @classmethod
    def from_composition(cls, factors, channel=X1, alpha_domain="R+", beta_domain="R"):
        """Build from the written product e^{a1 f0} e^{b1 fc} ... (rightmost acts first).

        ``factors`` is the list of ``(a_i, b_i)`` pairs, or ``(a_i, c_i, b_i)``
        triples, in written order.
        """
        flat = []
        for f in factors:
            a, c, b = (f[0], channel, f[1]) if len(f) == 2 else f
            flat.append((X0, a))
            flat.append((c, b))
        flat.reverse()
        stages = []
        pending_alpha = 0
        for c, v in flat:
            if c == X0:
                pending_alpha += v
            else:
                if stages or pending_alpha != 0 or v != 0:
                    stages.append(Stage(pending_alpha, c, v))
                pending_alpha = 0
        if pending_alpha != 0:
            stages.append(Stage(pending_alpha, stages[-1].channel if stages else channel, 0))
        return cls(stages, alpha_domain, beta_domain)

    @property
    def kind(self):
        kinds = [scalar_kind(x) for st in self.stages for x in (st.alpha, st.beta)]
        return join_kinds(*kinds)

    @property
    def is_exact(self):
        return self.kind != FLOAT

    def channels(self):
        seen = []
        for st in self.stages:
            if st.channel not in seen:
                seen.append(st.channel)
        return seen

    def total_time(self):
        return sum((st.alpha for st in self.stages), 0)

    def normalized(self):
        """Rescale so that the drift durations sum to one (homogeneity)."""
        T = self.total_time()
        if T == 0:
            raise DomainError("total drift time is zero; cannot normalize")
        if T == 1:
            return self
        if isinstance(T, int):
            T = Fraction(T)
        stages = [Stage(st.alpha / T, st.channel, st.beta / T ** st.channel.degree)
                  for st in self.stages]
        return Scheme(stages, self.alpha_domain, self.beta_domain)

    def canonical(self):
        """Drop zero impulses, merging the surrounding drifts; keep a zero-beta tail."""
        stages = []
        carry = 0
        for st in self.stages:
            if st.beta == 0:
                carry += st.alpha
                continue
            stages.append(Stage(st.alpha + carry, st.channel, st.beta))
            carry = 0
        if carry != 0 or not stages:
            ch = stages[-1].channel if stages else X1
            stages.append(Stage(carry, ch, 0))
        return Scheme(stages, self.alpha_domain, self.beta_domain)

    def __eq__(self, other):
        return (isinstance(other, Scheme) and self.stages == other.stages
                and self.alpha_domain == other.alpha_domain
                and self.beta_domain == other.beta_domain)

    def __repr__(self):
        inner = "; ".join(f"{format_scalar(s.alpha)} {render(s.channel)} {format_scalar(s.beta)}"
                          for s in self.stages)
        return f"Scheme([{inner}], {self.alpha_domain}, {self.beta_domain})"


@dataclass(frozen=True)
class Impulse:
    time: object
    channel: object
    amplitude: object


class DiracControl:
    """Finite sum of Dirac masses on [0, T]; the drift X_0 always carries 1."""

    def __init__(self, horizon, impulses=()):
        if not _is_real(horizon) or _real(horizon) <= 0:
            raise DomainError("horizon must be positive")
        out = []
        prev = None
        for imp in impulses:
            if not isinstance(imp, Impulse):
                imp = Impulse(*imp)
            if imp.channel == X0:
                raise DomainError("X0 cannot carry an impulse")
            if not _is_real(imp.time) or not 0 <= imp.time <= horizon:
                raise DomainError(f"impulse time {format_scalar(imp.time)} outside [0, {format_scalar(horizon)}]")
            if prev is not None and not imp.time > prev:
                raise DomainError("impulse times must be strictly increasing")
            prev = imp.time
            out.append(imp)
        self.horizon = horizon
        self.impulses = tuple(out)

    @property
    def kind(self):
        kinds = [scalar_kind(self.horizon)]
        for imp in self.impulses:
            kinds += [scalar_kind(imp.time), scalar_kind(imp.amplitude)]
        return join_kinds(*kinds)

    def norm(self):
        return sum((abs(imp.amplitude) for imp in self.impulses), 0)

    def channels(self):
        seen = []
        for imp in self.impulses:
            if imp.channel not in seen:
                seen.append(imp.channel)
        return seen

    def primitive(self, channel=X1):
        """Breakpoints of U(t) = sum of amplitudes on ``channel`` with time <= t.

        Returns ``[(t_start, t_end, value), ...]`` covering [0, T].
        """
        pieces = []
        t, U = 0, 0
        for imp in self.impulses:
            if imp.channel != channel:
                continue
            if imp.time > t:
                pieces.append((t, imp.time, U))
            t = imp.time
            U = U + imp.amplitude
        if self.horizon > t:
            pieces.append((t, self.horizon, U))
        return pieces

    def U(self, t, channel=X1):
        return sum((imp.amplitude for imp in self.impulses
                    if imp.channel == channel and imp.time <= t), 0)

    def __eq__(self, other):
        return (isinstance(other, DiracControl) and self.horizon == other.horizon
                and self.impulses == other.impulses)

    def __repr__(self):
        inner = ", ".join(f"{format_scalar(i.amplitude)}*d({format_scalar(i.time)}) on {name_of(i.channel)}"
                          for i in self.impulses)
        return f"DiracControl(T={format_scalar(self.horizon)}, [{inner}])"


def scheme_to_control(s):
    """Dirac control whose trajectory is the scheme (stage i kicks at alpha_1+...+alpha_i)."""
    t = 0
    impulses = []
    for st in s.stages:
        if not _is_real(st.alpha) or _real(st.alpha) < 0:
            raise DomainError("controls need forward time: every alpha must be real and nonnegative")
        t = t + _real(st.alpha)
        if st.beta == 0:
            continue
        if impulses and impulses[-1].time == t:
            last = impulses[-1]
            if last.channel != st.channel:
                raise DomainError("two different channels kick at the same instant")
            merged = last.amplitude + st.beta
            impulses.pop()
            if merged != 0:
                impulses.append(Impulse(t, st.channel, merged))
            continue
        impulses.append(Impulse(t, st.channel, st.beta))
    if t == 0:
        raise DomainError("total drift time must be positive")
    return DiracControl(t, impulses)


def control_to_scheme(c, alpha_domain="R+", beta_domain="R"):
    stages = []
    t = 0
    for imp in c.impulses:
        stages.append(Stage(imp.time - t, imp.channel, imp.amplitude))
        t = imp.time
    if c.horizon > t or not stages:
        stages.append(Stage(c.horizon - t, stages[-1].channel if stages else X1, 0))
    if beta_domain == "R" and any(not _is_real(s.beta) for s in stages):
        beta_domain = "C"
    return Scheme(stages, alpha_domain, beta_domain)


def concatenate(u, v):
    """u followed by v (the concatenation u then v on [0, T_u + T_v])."""
    shift = u.horizon
    imps = list(u.impulses)
    for imp in v.impulses:
        moved = Impulse(imp.time + shift, imp.channel, imp.amplitude)
        if imps and imps[-1].time == moved.time:
            last = imps.pop()
            if last.channel != moved.channel:
                raise DomainError("concatenation puts two channels at the same instant")
            moved = Impulse(moved.time, moved.channel, last.amplitude + moved.amplitude)
        imps.append(moved)
    return DiracControl(u.horizon + v.horizon, [i for i in imps if i.amplitude != 0])


# -- formal series -------------------------------------------------------------

def _series_kind(values):
    kinds = [scalar_kind(v) for v in values]
    return join_kinds(RATIONAL, *kinds)


def _exp_factor(b, coeff, N, ngens, kind):
    return exp_truncated(evaluate(b, N, ngens, kind).scale(coeff))


def _check_channels(channels, N):
    for ch in channels:
        if ch.degree > N:
            raise DomainError(f"channel {render(ch)} has degree {ch.degree} > {N}")


def formal_series(c, N, ngens=2):
    """Ser_N of a Dirac control: ordered product of drift and kick exponentials."""
    _check_channels(c.channels(), N)
    kind = _series_kind([c.horizon] + [x for i in c.impulses for x in (i.time, i.amplitude)])
    S = Polynomial.one(ngens, N, kind)
    t = 0
    for imp in c.impulses:
        if imp.time > t:
            S = mul_truncated(S, _exp_factor(X0, imp.time - t, N, ngens, kind))
        S = mul_truncated(S, _exp_factor(imp.channel, imp.amplitude, N, ngens, kind))
        t = imp.time
    if c.horizon > t:
        S = mul_truncated(S, _exp_factor(X0, c.horizon - t, N, ngens, kind))
    return S


def scheme_series(s, N, ngens=2):
    """Series of a scheme read stage by stage (negative drifts allowed)."""
    _check_channels(s.channels(), N)
    kind = _series_kind([x for st in s.stages for x in (st.alpha, st.beta)])
    S = Polynomial.one(ngens, N, kind)
    for st in s.stages:
        if st.alpha != 0:
            S = mul_truncated(S, _exp_factor(X0, st.alpha, N, ngens, kind))
        if st.beta != 0:
            S = mul_truncated(S, _exp_factor(st.channel, st.beta, N, ngens, kind))
    return S


def target_generator(N, ngens=2, kind=RATIONAL):
    """X_0 + X_1, the logarithm of the exact flow at T = 1."""
    return (Polynomial.generator(0, ngens=ngens, N=N, kind=kind)
            + Polynomial.generator(1, ngens=ngens, N=N, kind=kind))


# -- coordinates -----------------------------------------------------------------

class CoordinateVector(LieCoordinates):
    """Lie coordinates tagged as first kind (zeta) or second kind (xi)."""

    def __init__(self, basis, values, N=None, kind=RATIONAL, coordinate_kind="first"):
        if coordinate_kind not in ("first", "second"):
            raise DomainError("coordinate kind must be 'first' or 'second'")
        super().__init__(basis, values, N=N, kind=kind)
        self.coordinate_kind = coordinate_kind


def _default_basis(N, basis):
    if basis is None:
        return generate_hall(2, N, "bstar")
    if basis.N < N:
        raise DomainError(f"basis degree {basis.N} below working degree {N}")
    return basis


def zeta_coordinates(c, basis=None, N=None):
    N = N if N is not None else (basis.N if basis is not None else 3)
    basis = _default_basis(N, basis)
    Z = log_truncated(formal_series(c, N, basis.ngens))
    lc = lie_coordinates(Z, basis)
    return CoordinateVector(basis, lc.values, N=N, kind=Z.kind, coordinate_kind="first")


def reference_zeta(basis=None, N=3, kind=RATIONAL):
    """Coordinates of the exact flow exp(X_0 + X_1): one on X_0 and X_1."""
    basis = _default_basis(N, basis)
    return CoordinateVector(basis, {X0: 1, X1: 1}, N=N, kind=kind, coordinate_kind="first")


def _lie_vector(b, coeff, basis):
    if b in basis:
        return {basis.index(b): coeff}
    coords = lie_coordinates(evaluate(b, b.degree, basis.ngens), basis.truncate(b.degree))
    return {basis.index(t): v * coeff for t, v in coords.nonzero().items()}


def _ad(j, V, table):
    out = {}
    for k, p in V.items():
        row = table.get((j, k))
        if not row:
            continue
        for m, c in row.items():
            q = p * c
            if m in out:
                out[m] = out[m] + q
                if not out[m]:
                    del out[m]
            elif q:
                out[m] = q
    return out


def _run_segment(basis, table, L, start):
    """Second-kind coordinates along a segment with constant generator ``L``.

    ``L`` maps basis positions to scalars (the right-hand side X_0 + sum u_c c
    with constant controls), ``start`` holds xi at the beginning of the
    segment.  Returns one polynomial in the local time s per basis position.
    The recursion is the Lazard elimination: xi_j' = <V_{j-1}, b_j> and
    V_j = exp(ad_{xi_j b_j}) (V_{j-1} - <V_{j-1}, b_j> b_j).
    """
    V = {k: Poly1.const(v) for k, v in L.items() if v != 0}
    out = []
    for j in range(len(basis)):
        rate = V.pop(j, Poly1())
        xi = Poly1.const(start[j]) + rate.antiderivative()
        out.append(xi)
        if not xi or not V:
            continue
        total = dict(V)
        term = V
        m = 1
        while term:
            term = {k: p * xi * Fraction(1, m) for k, p in _ad(j, term, table).items()}
            term = {k: p for k, p in term.items() if p}
            for k, p in term.items():
                if k <= j:
                    raise AssertionError("Lazard elimination produced an already eliminated element")
                total[k] = total[k] + p if k in total else p
                if not total[k]:
                    del total[k]
            m += 1
        V = total
    return out


@dataclass
class XiSegment:
    start: object
    end: object
    polys: dict          # basis element -> Poly1 in the local time s = t - start


class XiTrajectory:
    """Second-kind coordinates as piecewise polynomials in time."""

    def __init__(self, basis, N, segments, final, kind, horizon):
        self.basis = basis
        self.horizon = horizon
        self.N = N
        self.segments = segments
        self.final = final
        self.kind = kind

    def value(self, b, t):
        """xi_b(t), right-continuous at impulse times."""
        for seg in self.segments:
            if seg.start <= t < seg.end:
                return seg.polys[b](t - seg.start)
        if t == self.horizon:
            return self.final.values[b]
        raise DomainError(f"time {t} outside [0, {self.horizon}]")

    def pieces(self, b):
        """``[(start, end, Poly1 in absolute time)]`` for element ``b``."""
        return [(seg.start, seg.end, seg.polys[b].shift(-seg.start)) for seg in self.segments]


def xi_trajectory(c, basis=None, N=None):
    N = N if N is not None else (basis.N if basis is not None else 3)
    basis = _default_basis(N, basis).truncate(N)
    _check_channels(c.channels(), N)
    table = structure_constants(basis)
    kind = _series_kind([c.horizon] + [x for i in c.impulses for x in (i.time, i.amplitude)])
    state = [coerce_scalar(0, kind)] * len(basis)
    segments = []
    drift = {basis.index(X0): coerce_scalar(1, kind)}
    elems = basis.elements

    def drift_to(t0, t1):
        nonlocal state
        polys = _run_segment(basis, table, drift, state)
        d = t1 - t0
        segments.append(XiSegment(t0, t1, {b: p for b, p in zip(elems, polys)}))
        state = [p(d) for p in polys]

    t = 0
    for imp in c.impulses:
        if imp.time > t:
            drift_to(t, imp.time)
        # Dirac limit of a unit-time pulse of height a on the channel
        polys = _run_segment(basis, table, _lie_vector(imp.channel, imp.amplitude, basis), state)
        state = [p(1) for p in polys]
        t = imp.time
    if c.horizon > t:
        drift_to(t, c.horizon)
    final = CoordinateVector(basis, dict(zip(elems, state)), N=N, kind=kind, coordinate_kind="second")
    return XiTrajectory(basis, N, segments, final, kind, c.horizon)


def xi_coordinates(c, basis=None, N=None):
    """Coordinates of the second kind at the final time."""
    return xi_trajectory(c, basis, N).final


def xi_regularized(c, basis=None, N=None, eps=Fraction(1, 1000)):
    """Oracle: replace each Dirac mass by a pulse of height a/eps on [tau, tau+eps].

    The drift keeps running during the pulse, and the coordinates are read
    at max(T, last tau + eps).  Converges to :func:`xi_coordinates` as eps -> 0.
    """
    N = N if N is not None else (basis.N if basis is not None else 3)
    basis = _default_basis(N, basis).truncate(N)
    table = structure_constants(basis)
    kind = _series_kind([c.horizon, eps] + [x for i in c.impulses for x in (i.time, i.amplitude)])
    one = coerce_scalar(1, kind)
    state = [coerce_scalar(0, kind)] * len(basis)
    x0 = basis.index(X0)

    def run(L, d):
        nonlocal state
        polys = _run_segment(basis, table, L, state)
        state = [p(d) for p in polys]

    t = 0
    for imp in c.impulses:
        if imp.time < t:
            raise DomainError("eps is larger than the gap between two impulses")
        if imp.time > t:
            run({x0: one}, imp.time - t)
        L = {k: v / eps for k, v in _lie_vector(imp.channel, imp.amplitude, basis).items()}
        L[x0] = L.get(x0, 0) + one
        run(L, eps)
        t = imp.time + eps
    if c.horizon > t:
        run({x0: one}, c.horizon - t)
    return CoordinateVector(basis, dict(zip(basis.elements, state)), N=N, kind=kind,
                            coordinate_kind="second")


def ordered_product(xi):
    """prod over the basis in descending order of exp(xi_b e(b))."""
    basis, N = xi.basis, xi.N
    S = Polynomial.one(basis.ngens, N, xi.kind)
    for b in reversed(basis.elements):
        if b.degree > N:
            continue
        v = xi.values[b]
        if v != 0:
            S = mul_truncated(S, _exp_factor(b, v, N, basis.ngens, xi.kind))
    return S


def _as_coordinate_vector(v, coordinate_kind):
    if isinstance(v, LieCoordinates):
        return v
    raise DomainError("expected a coordinate vector")


def _complete(v):
    missing = [b for b in v.basis.elements if b.degree <= v.N and b not in v.values]
    if missing:
        raise DomainError("incomplete coordinate vector: missing " + ", ".join(name_of(b) for b in missing))


def xi_to_zeta(xi):
    """First-kind coordinates from second-kind ones (the triangular map Phi)."""
    xi = _as_coordinate_vector(xi, "second")
    _complete(xi)
    Z = log_truncated(ordered_product(xi))
    lc = lie_coordinates(Z, xi.basis)
    return CoordinateVector(xi.basis, lc.values, N=xi.N, kind=xi.kind, coordinate_kind="first")


def zeta_to_xi(zeta):
    """Inverse of :func:`xi_to_zeta`, solved degree by degree."""
    zeta = _as_coordinate_vector(zeta, "first")
    _complete(zeta)
    basis, N, kind = zeta.basis, zeta.N, zeta.kind
    xi = {b: coerce_scalar(0, kind) for b in basis.elements if b.degree <= N}
    for n in range(1, N + 1):
        lower = {b: v for b, v in xi.items() if b.degree <= n}
        trial = CoordinateVector(basis, lower, N=n, kind=kind, coordinate_kind="second")
        phi = xi_to_zeta(trial)
        for b in basis.elements:
            if b.degree == n:
                # xi_b is still zero here, so phi[b] is exactly P_b(lower xi)
                xi[b] = zeta.values[b] - phi.values[b]
    return CoordinateVector(basis, xi, N=N, kind=kind, coordinate_kind="second")


# -- order checking ----------------------------------------------------------------

@dataclass
class OrderReport:
    order: int
    at_least: bool
    defect_degree: object
    defect: dict
    basis: object

    def order_text(self):
        return f">={self.order}" if self.at_least else str(self.order)

    def defect_text(self):
        if self.defect_degree is None:
            return "none"
        names = ", ".join(f"{name_of(b)}={format_scalar(v)}" for b, v in self.defect.items())
        only = " only" if len(self.defect) == 1 else ""
        return f"{names}{only} at degree {self.defect_degree}"

    def __str__(self):
        return f"order: {self.order_text()}; defect: {self.defect_text()}"


def _require_exact(s):
    for st in s.stages:
        for x in (st.alpha, st.beta):
            if scalar_kind(x) == FLOAT:
                raise DomainError("order checking needs exact coefficients; use the search module for floats")


def order_of_scheme(s, N_max=6, basis=None, policy="bstar"):
    """Exact order: the largest n with pi_n(log Ser) = X_0 + X_1.

    The comparison is done on monomials; coordinates are only used to
    describe the first defect.  The scheme is first normalized to unit time.
    """
    _require_exact(s)
    s = s.normalized()
    D = N_max + 1
    S = scheme_series(s, D)
    diff = log_truncated(S) - target_generator(D, kind=S.kind)
    first = next((n for n in range(1, D + 1) if diff.bucket(n)), None)
    if first is None:
        return OrderReport(D, True, None, {}, basis)
    if basis is None or basis.N < first:
        basis = generate_hall(2, max(first, basis.N if basis else 0), policy)
    coords = lie_coordinates(grade(diff, first).truncate(first), basis)
    defect = {b: v for b, v in coords.nonzero().items()}
    return OrderReport(first - 1, False, first, defect, basis)


def order_via_coordinates(s, N_max, basis):
    """Same as :func:`order_of_scheme` but comparing zeta coordinates in ``basis``."""
    _require_exact(s)
    s = s.normalized()
    D = min(N_max + 1, basis.N)
    Z = log_truncated(scheme_series(s, D))
    zeta = lie_coordinates(Z, basis)
    for n in range(1, D + 1):
        for b in basis.of_degree(n):
            ref = 1 if b in (X0, X1) else 0
            if zeta.values[b] != ref:
                return n - 1
    return D


@dataclass
class HomogeneityReport:
    time_scaling: bool
    amplitude_scaling: bool

    def __bool__(self):
        return self.time_scaling and self.amplitude_scaling


def homogeneity_check(c, eps=1, lambdas=None, basis=None, N=4):
    """Verify both scaling laws of the first-kind coordinates exactly.

    Time scaling by ``eps`` multiplies times and the horizon by eps and a kick
    on channel c by eps^|c|; coordinates scale by eps^|b|.  Scaling letter j
    by ``lambdas[j]`` stretches time by lambda_0 and multiplies a kick on c
    by prod_j lambda_j^{n_j(c)}; coordinates scale by prod_j lambda_j^{n_j(b)}.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    lambdas = dict(lambdas or {})
    lam0 = lambdas.get(0, 1)
    if not lam0 > 0:
        raise DomainError("lambda_0 rescales time and must be positive")
    basis = _default_basis(N, basis)
    base = zeta_coordinates(c, basis, N)

    scaled_t = DiracControl(c.horizon * eps, [
        Impulse(i.time * eps, i.channel, i.amplitude * eps ** i.channel.degree) for i in c.impulses])
    zt = zeta_coordinates(scaled_t, basis, N)
    time_ok = all(zt.values[b] == base.values[b] * eps ** b.degree for b in base.values)

    def weight(b):
        w = 1
        for j, n in b.counts.items():
            w = w * lambdas.get(j, 1) ** n
        return w

    scaled_a = DiracControl(c.horizon * lam0, [
        Impulse(i.time * lam0, i.channel, i.amplitude * weight(i.channel)) for i in c.impulses])
    za = zeta_coordinates(scaled_a, basis, N)
    amp_ok = all(za.values[b] == base.values[b] * weight(b) for b in base.values)
    return HomogeneityReport(time_ok, amp_ok)


# -- text formats ------------------------------------------------------------------

SCHEME_HEADER = "splitting-scheme v1"
CONTROL_HEADER = "dirac-control v1"


def dump_scheme(s):
    lines = [SCHEME_HEADER,
             "# stage <alpha> <channel> <beta>: drift alpha, then kick beta on channel",
             f"domains alpha={s.alpha_domain} beta={s.beta_domain}"]
    for st in s.stages:
        lines.append(f"stage {format_scalar(st.alpha)} {render(st.channel)} {format_scalar(st.beta)}")
    return "\n".join(lines) + "\n"


def dump_control(c):
    lines = [CONTROL_HEADER, f"horizon {format_scalar(c.horizon)}"]
    for imp in c.impulses:
        lines.append(f"impulse {format_scalar(imp.time)} {render(imp.channel)} {format_scalar(imp.amplitude)}")
    return "\n".join(lines) + "\n"


def _tokens(line):
    """Whitespace tokens with their 1-based start columns."""
    out = []
    i = 0
    while i < len(line):
        if line[i].isspace():
            i += 1
            continue
        j = i
        depth = 0
        while j < len(line) and (depth > 0 or not line[j].isspace()):
            if line[j] in "([":
                depth += 1
            elif line[j] in ")]":
                depth -= 1
            j += 1
        out.append((line[i:j], i + 1))
        i = j
    return out


def _scalar_at(tok, lineno, source):
    text, col = tok
    try:
        return parse_scalar(text)
    except ParseError as exc:
        raise ParseError(str(exc), lineno, col, source) from None


def _bracket_at(tok, lineno, source):
    text, col = tok
    try:
        return parse_bracket(text)
    except ParseError as exc:
        raise ParseError(str(exc), lineno, col + (exc.column or 1) - 1, source) from None


def load(text, source=None):
    """Parse a scheme or control file; returns a Scheme or a DiracControl."""
    lines = text.splitlines()
    body = [(n, l.split("#", 1)[0].rstrip()) for n, l in enumerate(lines, 1)]
    body = [(n, l) for n, l in body if l.strip()]
    if not body:
        raise ParseError("empty file", 1, 1, source)
    n0, header = body[0]
    header = header.strip()
    if header == SCHEME_HEADER:
        return _load_scheme(body[1:], source)
    if header == CONTROL_HEADER:
        return _load_control(body[1:], source)
    raise ParseError(f"unknown header {header!r}; expected {SCHEME_HEADER!r} or {CONTROL_HEADER!r}",
                     n0, 1, source)


def _load_scheme(body, source):
    alpha_domain, beta_domain = "R+", "R"
    stages = []
    for lineno, line in body:
        toks = _tokens(line)
        key = toks[0][0]
        if key == "domains":
            for text, col in toks[1:]:
                if "=" not in text:
                    raise ParseError(f"expected alpha=... or beta=..., got {text!r}", lineno, col, source)
                k, v = text.split("=", 1)
                if k == "alpha" and v in ALPHA_DOMAINS:
                    alpha_domain = v
                elif k == "beta" and v in BETA_DOMAINS:
                    beta_domain = v
                else:
                    raise ParseError(f"bad domain declaration {text!r}", lineno, col, source)
        elif key == "stage":
            if len(toks) != 4:
                col = toks[-1][1] if toks else 1
                raise ParseError("a stage line needs: stage <alpha> <channel> <beta>", lineno, col, source)
            stages.append((_scalar_at(toks[1], lineno, source), _bracket_at(toks[2], lineno, source),
                           _scalar_at(toks[3], lineno, source), lineno))
        else:
            raise ParseError(f"unknown directive {key!r}", lineno, toks[0][1], source)
    if not stages:
        raise ParseError("no stages", None, None, source)
    try:
        return Scheme([Stage(a, c, b) for a, c, b, _ in stages], alpha_domain, beta_domain)
    except DomainError as exc:
        raise ParseError(str(exc), stages[0][3], 1, source) from None


def _load_control(body, source):
    horizon = None
    impulses = []
    for lineno, line in body:
        toks = _tokens(line)
        key = toks[0][0]
        if key == "horizon":
            if len(toks) != 2:
                raise ParseError("expected: horizon <T>", lineno, 1, source)
            horizon = _scalar_at(toks[1], lineno, source)
        elif key == "impulse":
            if len(toks) != 4:
                raise ParseError("expected: impulse <time> <channel> <amplitude>", lineno, 1, source)
            impulses.append(Impulse(_scalar_at(toks[1], lineno, source), _bracket_at(toks[2], lineno, source),
                                    _scalar_at(toks[3], lineno, source)))
        else:
            raise ParseError(f"unknown directive {key!r}", lineno, toks[0][1], source)
    if horizon is None:
        raise ParseError("missing horizon line", None, None, source)
    try:
        return DiracControl(horizon, impulses)
    except DomainError as exc:
        raise ParseError(str(exc), None, None, source) from None
