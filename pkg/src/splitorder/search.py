"""Numerical search for splitting schemes that meet the order conditions.

Stage coefficients are mapped to a float "jet": the truncated formal series
of the scheme together with its derivatives with respect to every
coefficient, carried through the product of stage exponentials and the
logarithm by forward-mode differentiation.  Hall coordinates of the
logarithm minus those of X_0 + X_1 form the residual, and scipy's
least-squares driver does the rest from many random starts.

Domain constraints are built into the parameterization:

* alpha in R+: softmax of free logits, so the drifts are positive and sum to 1;
* alpha in R or R*: free, with the last drift fixed by sum(alpha) = 1;
* beta in R / R+ / C / C+: identity / exp / re + i im / exp(re) + i im.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import yaml
from scipy.optimize import least_squares

from .errors import ConfigurationError, DomainError, ParseError, SplitOrderError
from .freealg import GaussianRational
from .hall import X0, X1, evaluate, generate_hall, name_of, parse_bracket, witt_dimension
from .hall import _degree_solver
from .scheme import ALPHA_DOMAINS, BETA_DOMAINS, Scheme, Stage, order_of_scheme

log = logging.getLogger(__name__)


@dataclass
class SearchSpec:
    target_order: int
    flows: list = field(default_factory=lambda: [X1])
    stages: int = None
    alpha_domain: str = "R+"
    beta_domain: str = "R"
    seed: int = None
    restarts: int = 50
    tolerance: float = 1e-12
    pattern: list = None
    max_nfev: int = 600
    snap_denominator: int = 720
    slope_tolerance: float = None
    name: str = ""

    def __post_init__(self):
        if self.target_order < 1:
            raise ConfigurationError("target_order must be at least 1")
        if self.alpha_domain not in ALPHA_DOMAINS:
            raise ConfigurationError(f"alpha_domain must be one of {ALPHA_DOMAINS}")
        if self.beta_domain not in BETA_DOMAINS:
            raise ConfigurationError(f"beta_domain must be one of {BETA_DOMAINS}")
        self.flows = [parse_bracket(f) if isinstance(f, str) else f for f in self.flows]
        if not self.flows:
            raise ConfigurationError("at least one controlled flow is needed")
        if X0 in self.flows:
            raise ConfigurationError("X0 is the drift and cannot be a controlled flow")
        if self.pattern is not None:
            self.pattern = [parse_bracket(f) if isinstance(f, str) else f for f in self.pattern]
            if self.stages is None:
                self.stages = len(self.pattern)
            if len(self.pattern) != self.stages:
                raise ConfigurationError("pattern length must equal the stage count")
        if self.stages is None:
            self.stages = default_stages(self.target_order)
        if self.stages < 1:
            raise ConfigurationError("stage count must be positive")
        if self.slope_tolerance is None:
            self.slope_tolerance = 0.3 if self.target_order < 6 else 0.5

    @property
    def complex(self):
        return self.beta_domain in ("C", "C+")

    def channel_pattern(self):
        if self.pattern is not None:
            return list(self.pattern)
        return [self.flows[i % len(self.flows)] for i in range(self.stages)]

    def to_dict(self):
        out = {
            "target_order": self.target_order,
            "flows": [name_of(f) for f in self.flows],
            "stages": self.stages,
            "alpha_domain": self.alpha_domain,
            "beta_domain": self.beta_domain,
            "restarts": self.restarts,
            "tolerance": self.tolerance,
        }
        if self.seed is not None:
            out["seed"] = self.seed
        if self.pattern is not None:
            out["pattern"] = [name_of(f) for f in self.pattern]
        if self.name:
            out["name"] = self.name
        return out

    def dumps(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def effective_seed(self):
        if self.seed is not None:
            return int(self.seed)
        digest = hashlib.sha256(self.dumps().encode()).hexdigest()
        return int(digest[:12], 16)


_SPEC_KEYS = {"target_order", "flows", "stages", "alpha_domain", "beta_domain", "seed", "restarts",
              "tolerance", "pattern", "max_nfev", "snap_denominator", "slope_tolerance", "name"}


def load_spec(text, source="<spec>"):
    """Parse a YAML search spec."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(str(exc).splitlines()[0], line=mark.line + 1 if mark else None,
                         column=mark.column + 1 if mark else None, source=source) from None
    if not isinstance(data, dict):
        raise ParseError("a search spec must be a mapping", source=source)
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        raise ParseError(f"unknown key(s): {', '.join(sorted(unknown))}", source=source)
    if "target_order" not in data:
        raise ParseError("missing key target_order", source=source)
    for key in ("alpha_domain", "beta_domain"):
        if key in data:
            data[key] = str(data[key])
    if "tolerance" in data:
        data["tolerance"] = float(data["tolerance"])
    try:
        return SearchSpec(**data)
    except ParseError as exc:
        raise ParseError(f"bad bracket in spec: {exc}", source=source) from None


def default_stages(N):
    """Cumulative free Lie dimension over two letters through degree N."""
    return sum(witt_dimension(2, n) for n in range(1, N + 1))


# --- float jets -----------------------------------------------------------

class Layout:
    """Flat indexing of all words of length <= N over two letters.

    A word of length d read as a binary number b (first letter most
    significant) lives at position 2**d - 1 + b.  The product table lists
    every split w = uv with |w| <= N, sorted by w, so a truncated product is
    one gather, one multiply and one ``np.add.reduceat``.
    """

    _cache = {}

    def __new__(cls, N):
        if N in cls._cache:
            return cls._cache[N]
        self = super().__new__(cls)
        self.N = N
        self.size = 2 ** (N + 1) - 1
        iu, iv, iw = [], [], []
        for d in range(N + 1):
            for b in range(2 ** d):
                w = 2 ** d - 1 + b
                for i in range(d + 1):
                    j = d - i
                    u, v = b >> j, b & ((1 << j) - 1)
                    iu.append(2 ** i - 1 + u)
                    iv.append(2 ** j - 1 + v)
                    iw.append(w)
        self.iu, self.iv = np.array(iu), np.array(iv)
        self.starts = np.searchsorted(np.array(iw), np.arange(self.size))
        self.degree = np.concatenate([[d] * 2 ** d for d in range(N + 1)])
        cls._cache[N] = self
        return self

    def offset(self, d):
        return 2 ** d - 1


class Jet:
    """Truncated series over two letters plus tangents.

    ``v`` holds the coefficients in :class:`Layout` order and ``t`` the
    derivatives, shape (n, size).
    """

    __slots__ = ("layout", "v", "t")

    def __init__(self, layout, v, t):
        self.layout = layout
        self.v = v
        self.t = t

    @classmethod
    def constant(cls, layout, n, value=1.0, dtype=float):
        v = np.zeros(layout.size, dtype=dtype)
        v[0] = value
        return cls(layout, v, np.zeros((n, layout.size), dtype=dtype))

    def __mul__(self, other):
        L = self.layout
        a, b = self.v[L.iu], other.v[L.iv]
        v = np.add.reduceat(a * b, L.starts)
        t = np.add.reduceat(self.t[:, L.iu] * b + a * other.t[:, L.iv], L.starts, axis=1)
        return Jet(L, v, t)

    def log(self):
        """log(1 + q) by Horner's rule with q = self - 1."""
        L = self.layout
        N = L.N
        qv = self.v.copy()
        qv[0] = 0
        q = Jet(L, qv, self.t)
        acc = Jet.constant(L, self.t.shape[0], (-1) ** (N + 1) / N, self.v.dtype)
        for k in range(N - 1, 0, -1):
            acc = q * acc
            acc.v[0] += (-1) ** (k + 1) / k
        return q * acc


def _word_index(word):
    idx = 0
    for letter in word:
        idx = 2 * idx + letter
    return idx


class ResidualModel:
    """Residuals and analytic Jacobian of the order conditions for a spec."""

    def __init__(self, spec):
        self.spec = spec
        self.N = spec.target_order
        self.pattern = spec.channel_pattern()
        for ch in self.pattern:
            if ch.degree > self.N:
                raise ConfigurationError(f"flow {name_of(ch)} has degree above the target order")
        self.k = len(self.pattern)
        self.basis = generate_hall(2, self.N, "bstar")
        self.dtype = complex if spec.complex else float
        self.layout = Layout(self.N)
        self._powers = {ch: self._channel_powers(ch) for ch in set(self.pattern)}
        rows = []
        self.elements = []
        for d in range(1, self.N + 1):
            elems, pivots, inverse = _degree_solver(self.basis, d)
            inv = np.array([[float(x) for x in row] for row in inverse])
            cols = [self.layout.offset(d) + _word_index(w) for w in pivots]
            for i, b in enumerate(elems):
                if b == X0:
                    continue
                row = np.zeros(self.layout.size)
                row[cols] = inv[i]
                rows.append(row)
                self.elements.append(b)
        self.projector = np.array(rows)
        self.target = np.array([1.0 if b == X1 else 0.0 for b in self.elements])
        self.n_alpha = self.k if spec.alpha_domain == "R+" else self.k - 1
        self.n_beta = self.k * (2 if spec.complex else 1)
        self.n_params = self.n_alpha + self.n_beta
        self.n_residuals = len(self.elements) * (2 if spec.complex else 1)

    def _channel_powers(self, ch):
        """Flat vector of exp(c) - 1 split by power: {m: c^m / m!}."""
        d = ch.degree
        base = np.zeros(2 ** d)
        for w, c in evaluate(ch, self.N).bucket(d).items():
            base[_word_index(w)] = float(c)
        out = {}
        cur = base
        m = 1
        while m * d <= self.N:
            flat = np.zeros(self.layout.size)
            off = self.layout.offset(m * d)
            flat[off:off + cur.size] = cur / math.factorial(m)
            out[m] = flat
            m += 1
            cur = np.kron(cur, base)
        return out

    # parameterization

    def coefficients(self, p):
        """(alpha, beta, dalpha/dp, dbeta/dp) for a parameter vector."""
        p = np.asarray(p, dtype=float)
        k, na = self.k, self.n_alpha
        a_raw, b_raw = p[:na], p[na:]
        if self.spec.alpha_domain == "R+":
            z = np.exp(a_raw - np.max(a_raw))
            alpha = z / z.sum()
            dalpha = np.diag(alpha) - np.outer(alpha, alpha)
        else:
            alpha = np.append(a_raw, 1.0 - a_raw.sum())
            dalpha = np.vstack([np.eye(k - 1), -np.ones((1, k - 1))])
        dom = self.spec.beta_domain
        if dom == "R":
            beta, dbeta = b_raw.copy(), np.eye(k)
        elif dom == "R+":
            beta = np.exp(b_raw)
            dbeta = np.diag(beta)
        else:
            re, im = b_raw[:k], b_raw[k:]
            if dom == "C+":
                re_v = np.exp(re)
                dre = np.diag(re_v)
            else:
                re_v, dre = re, np.eye(k)
            beta = re_v + 1j * im
            dbeta = np.hstack([dre.astype(complex), 1j * np.eye(k)])
        return alpha, beta, dalpha, dbeta

    def _drift(self, a, row, n):
        L = self.layout
        v = np.zeros(L.size, dtype=self.dtype)
        t = np.zeros((n, L.size), dtype=self.dtype)
        for d in range(self.N + 1):
            # the word X0^d sits at the start of each degree block
            v[L.offset(d)] = a ** d / math.factorial(d)
            if d >= 1:
                t[row, L.offset(d)] = a ** (d - 1) / math.factorial(d - 1)
        return Jet(L, v, t)

    def _kick(self, ch, b, row, n):
        L = self.layout
        v = np.zeros(L.size, dtype=self.dtype)
        t = np.zeros((n, L.size), dtype=self.dtype)
        v[0] = 1.0
        for m, arr in self._powers[ch].items():
            v += b ** m * arr
            t[row] += m * b ** (m - 1) * arr
        return Jet(L, v, t)

    def series(self, alpha, beta):
        """Jet of the scheme series with tangents in the raw (alpha, beta)."""
        n = 2 * self.k
        S = None
        for i, ch in enumerate(self.pattern):
            f = self._drift(alpha[i], i, n) * self._kick(ch, beta[i], self.k + i, n)
            S = f if S is None else S * f
        return S

    def coordinates(self, alpha, beta):
        """Hall coordinates (X0 excluded) and their raw-coefficient Jacobian."""
        L = self.series(alpha, beta).log()
        return self.projector @ L.v, (L.t @ self.projector.T).T

    def evaluate(self, p):
        alpha, beta, dalpha, dbeta = self.coefficients(p)
        zeta, J_raw = self.coordinates(alpha, beta)
        k = self.k
        r = zeta - self.target
        J = np.hstack([J_raw[:, :k] @ dalpha, J_raw[:, k:] @ dbeta])
        if self.spec.complex:
            r = np.concatenate([r.real, r.imag])
            J = np.vstack([J.real, J.imag])
        else:
            r, J = np.real(r), np.real(J)
        return r, J

    def residuals(self, p):
        return self.evaluate(p)[0]

    def jacobian(self, p):
        return self.evaluate(p)[1]

    def scheme(self, p):
        alpha, beta, _, _ = self.coefficients(p)
        stages = []
        for a, ch, b in zip(alpha, self.pattern, beta):
            b = complex(b) if self.spec.complex else float(np.real(b))
            stages.append(Stage(float(a), ch, b))
        return Scheme(stages, alpha_domain=self.spec.alpha_domain, beta_domain=self.spec.beta_domain)

    def labels(self):
        if self.spec.complex:
            return [f"Re {name_of(b)}" for b in self.elements] + [f"Im {name_of(b)}" for b in self.elements]
        return [name_of(b) for b in self.elements]


def residuals(coeffs, spec):
    """Order-condition residuals for a raw parameter vector."""
    return ResidualModel(spec).residuals(coeffs)


def scheme_residuals(s, target_order, basis_policy="bstar"):
    """Float residuals of a concrete scheme, via the same jet machinery."""
    spec = SearchSpec(target_order, flows=s.channels() or [X1], stages=len(s.stages),
                      pattern=[st.channel for st in s.stages],
                      alpha_domain="R", beta_domain="C" if s.kind == "gaussian" or any(
                          isinstance(st.beta, complex) for st in s.stages) else "R")
    model = ResidualModel(spec)
    s = s.normalized()
    alpha = np.array([float(st.alpha) for st in s.stages])
    beta = np.array([complex(st.beta) for st in s.stages]) if spec.complex else \
        np.array([float(st.beta) for st in s.stages])
    zeta, _ = model.coordinates(alpha, beta)
    r = zeta - model.target
    return dict(zip(model.elements, r))


# --- results and verification ---------------------------------------------

@dataclass
class Verification:
    verified: bool
    method: str
    order: object = None
    slopes: dict = field(default_factory=dict)
    reason: str = ""

    def __str__(self):
        if self.method == "exact":
            return f"{'verified' if self.verified else 'rejected'} exactly: order {self.order}"
        slopes = ", ".join(f"{k} {v:.2f}" if v is not None else f"{k} n/a" for k, v in self.slopes.items())
        head = "verified" if self.verified else "rejected"
        return f"{head} empirically (one-step slopes: {slopes}){'; ' + self.reason if self.reason else ''}"


@dataclass
class SearchResult:
    scheme: Scheme
    residual_norm: float
    residuals: dict
    params: np.ndarray
    restart: int
    certificate: Scheme = None
    verification: Verification = None
    history: list = field(default_factory=list)

    def recompute_norm(self, spec):
        return float(np.linalg.norm(ResidualModel(spec).residuals(self.params)))


class SearchFailure(SplitOrderError):
    def __init__(self, message, best=None, history=None):
        super().__init__(message)
        self.best = best
        self.history = history or []


def snap(s, max_denominator=720, tol=1e-9):
    """Rational (or Gaussian-rational) reconstruction of float coefficients, if close."""
    def one(x):
        if isinstance(x, complex):
            re, im = one(x.real), one(x.imag)
            if re is None or im is None:
                return None
            return GaussianRational(re, im) if im != 0 else re
        q = Fraction(x).limit_denominator(max_denominator)
        return q if abs(float(q) - x) <= tol * max(1.0, abs(x)) else None

    stages = []
    for st in s.stages:
        a, b = one(float(st.alpha)), one(st.beta)
        if a is None or b is None:
            return None
        stages.append(Stage(a, st.channel, b))
    try:
        return Scheme(stages, alpha_domain=s.alpha_domain, beta_domain=s.beta_domain)
    except DomainError:
        return None


VERIFY_SYSTEMS = ("linearpair", "linearpair2")
VERIFY_GRID = tuple(2.0 ** -k for k in range(1, 13))


def verify_candidate(r, spec, systems=VERIFY_SYSTEMS):
    """Exact order check of the rational snap if any, else slopes on two linear systems."""
    from .numverify import empirical_order

    cert = r.certificate if r.certificate is not None else snap(r.scheme, spec.snap_denominator)
    if cert is not None:
        rep = order_of_scheme(cert, N_max=spec.target_order)
        if rep.order >= spec.target_order:
            r.certificate = cert
            return Verification(True, "exact", order=rep.order)
    need = spec.target_order + 1 - spec.slope_tolerance
    slopes, notes = {}, []
    try:
        for name in systems:
            rep = empirical_order(r.scheme, name, grid=VERIFY_GRID)
            slopes[name] = math.inf if rep.exact else rep.slope
            if rep.slope is None and not rep.exact:
                notes.append(f"{name}: {'; '.join(rep.notes)}")
    except SplitOrderError as exc:
        return Verification(False, "empirical", reason=f"verification unavailable: {exc}")
    ok = all(v is not None and v >= need for v in slopes.values())
    if not ok:
        notes.append(f"need slope >= {need:.2f}")
    return Verification(ok, "empirical", slopes=slopes, reason="; ".join(notes))


def solve(spec, progress=None):
    """Multi-start least squares; returns the first verified SearchResult.

    Raises :class:`SearchFailure` carrying the best attempt and the final
    residual norm of every restart when no restart succeeds.
    """
    model = ResidualModel(spec)
    rng = np.random.default_rng(spec.effective_seed())
    # MINPACK's Levenberg-Marquardt wants at least as many rows as unknowns;
    # zero rows leave the problem unchanged.
    pad = max(0, model.n_params - model.n_residuals)
    history, best = [], None
    for restart in range(spec.restarts):
        p0 = rng.normal(0.0, 1.0, model.n_params)
        cache = {}

        def fun(p):
            key = p.tobytes()
            if key not in cache:
                cache.clear()
                r, J = model.evaluate(p)
                if pad:
                    r = np.concatenate([r, np.zeros(pad)])
                    J = np.vstack([J, np.zeros((pad, model.n_params))])
                cache[key] = (r, J)
            return cache[key][0]

        def jac(p):
            fun(p)
            return cache[p.tobytes()][1]

        try:
            sol = least_squares(fun, p0, jac=jac, method="lm", xtol=1e-14, ftol=1e-10, gtol=1e-14,
                                max_nfev=spec.max_nfev)
            p = sol.x
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            log.debug("restart %d failed: %s", restart, exc)
            history.append(math.inf)
            continue
        r, _ = model.evaluate(p)
        norm = float(np.linalg.norm(r))
        if not np.isfinite(norm):
            history.append(math.inf)
            continue
        history.append(norm)
        if progress:
            progress(restart, norm)
        try:
            sch = model.scheme(p)
        except DomainError:
            continue
        result = SearchResult(sch, norm, dict(zip(model.labels(), r.tolist())), p, restart)
        if best is None or norm < best.residual_norm:
            best = result
        if norm < spec.tolerance:
            result.verification = verify_candidate(result, spec)
            if result.verification.verified:
                result.history = history
                return result
            log.info("restart %d converged but was rejected: %s", restart, result.verification)
    if best is not None:
        best.history = history
    raise SearchFailure(
        f"no verified scheme after {spec.restarts} restarts; best residual "
        f"{best.residual_norm if best else math.inf:.3e}", best, history)
