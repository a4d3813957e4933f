"""Empirical order checks on concrete vector fields.

A scheme is run on a test system by composing exact flows in time order:
stage i applies the drift f_0 for time alpha_i T and then the flow of the
bracket field f_c for time beta_i T^|c|.  Bracket trees map to vector fields
through [f, g] = Dg f - Df g, which makes the Lie-derivative representation a
morphism, so the formal series and the composed flows agree.

Built-in systems:

* ``linearpair``, ``linearpair2``: f_0 = A x, f_1 = B x with fixed
  non-commuting matrices; every bracket field is linear and its flow is a
  matrix exponential.
* ``quadratic``: f_0 = (0, x1^2), f_1 = (1, 0).  Here f_W1 = (0, 2) and
  f_M2 = 0.
* ``quadraticfull``: f_0 = (0, x1^2, x2), f_1 = (1, 0, 0).  Here
  f_W1 = (0, 2, 0) and f_M2 = (0, 0, 2 x1) are independent.

The polynomial systems are nilpotent, so every flow is a terminating Lie
series, derived once with sympy and compiled to numpy.
"""

import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .errors import ConfigurationError, DomainError
from .freealg import GaussianRational
from .hall import X0, Leaf, build_M, build_W, name_of, render

DEFAULT_GRID = tuple(2.0 ** -k for k in range(3, 13))
ERROR_FLOOR = 1e-13
EXACT_THRESHOLD = 1e-12


class TestSystem:
    """Base class: ``flow``, ``field`` and ``reference`` over numpy vectors."""

    __test__ = False  # not a pytest class
    name = "system"
    dim = 0
    default_x0 = None

    def supports(self, channel):
        try:
            self.flow(channel, 0.0, np.zeros(self.dim))
        except DomainError:
            return False
        return True

    def flow(self, channel, t, x):
        raise NotImplementedError

    def field(self, channel, x):
        raise NotImplementedError

    def reference(self, T, x):
        raise NotImplementedError

    def fallback_flow(self, channel, t, x, rtol=1e-13, atol=1e-15):
        """Flow of ``channel`` by a high-order adaptive integrator (real t only)."""
        sol = solve_ivp(lambda _, y: self.field(channel, y), (0.0, float(t)),
                        np.asarray(x, dtype=float), method="DOP853", rtol=rtol, atol=atol)
        return sol.y[:, -1]

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} d={self.dim}>"


class LinearSystem(TestSystem):
    def __init__(self, name, A, B, x0):
        self.name = name
        self.A = np.array(A, dtype=float)
        self.B = np.array(B, dtype=float)
        self.dim = self.A.shape[0]
        self.default_x0 = np.array(x0, dtype=float)
        self._mats = {}

    def matrix(self, b):
        m = self._mats.get(b)
        if m is None:
            if isinstance(b, Leaf):
                if b.index > 1:
                    raise DomainError(f"{self.name} has two generators; got {render(b)}")
                m = self.A if b.index == 0 else self.B
            else:
                L, R = self.matrix(b.left), self.matrix(b.right)
                m = R @ L - L @ R
            self._mats[b] = m
        return m

    def flow(self, channel, t, x):
        return expm(t * self.matrix(channel)) @ x

    def field(self, channel, x):
        return self.matrix(channel) @ x

    def reference(self, T, x):
        return expm(T * (self.A + self.B)) @ x


class PolynomialSystem(TestSystem):
    """Two-generator polynomial system with nilpotent (terminating) flows."""

    def __init__(self, name, f0, f1, x0, max_terms=16):
        self.name = name
        self.dim = len(f0)
        self.vars = sp.symbols(f"x1:{self.dim + 1}")
        self.f0 = sp.Matrix(f0)
        self.f1 = sp.Matrix(f1)
        self.default_x0 = np.array(x0, dtype=float)
        self.max_terms = max_terms
        self._fields = {}
        self._flows = {}
        self._field_fns = {}

    def symbolic_field(self, b):
        f = self._fields.get(b)
        if f is None:
            if isinstance(b, Leaf):
                if b.index > 1:
                    raise DomainError(f"{self.name} has two generators; got {render(b)}")
                f = self.f0 if b.index == 0 else self.f1
            else:
                F, G = self.symbolic_field(b.left), self.symbolic_field(b.right)
                X = sp.Matrix(self.vars)
                f = (G.jacobian(X) * F - F.jacobian(X) * G).applyfunc(sp.expand)
            self._fields[b] = f
        return f

    def _lie_series(self, g):
        """Coefficients c_k(x) with flow_t(x) = sum_k t^k / k! c_k(x)."""
        X = sp.Matrix(self.vars)
        terms, cur = [], X
        for _ in range(self.max_terms):
            if cur == sp.zeros(self.dim, 1):
                return terms
            terms.append(cur)
            cur = (cur.jacobian(X) * g).applyfunc(sp.expand)
        return None

    def _compiled_flow(self, key, g):
        fn = self._flows.get(key)
        if fn is None:
            series = self._lie_series(g)
            if series is None:
                raise DomainError(f"no terminating flow for {key} on {self.name}")
            t = sp.Symbol("t")
            expr = sum((s * t ** k / math.factorial(k) for k, s in enumerate(series)), sp.zeros(self.dim, 1))
            fn = sp.lambdify((t,) + tuple(self.vars), list(expr), "numpy")
            self._flows[key] = fn
        return fn

    def flow(self, channel, t, x):
        fn = self._compiled_flow(channel, self.symbolic_field(channel))
        return np.array(fn(t, *x), dtype=np.result_type(t, x, float))

    def field(self, channel, x):
        fn = self._field_fns.get(channel)
        if fn is None:
            fn = sp.lambdify(tuple(self.vars), list(self.symbolic_field(channel)), "numpy")
            self._field_fns[channel] = fn
        return np.array(fn(*x), dtype=float)

    def reference(self, T, x):
        fn = self._compiled_flow("f0+f1", self.f0 + self.f1)
        return np.array(fn(T, *x), dtype=np.result_type(T, x, float))


@lru_cache(maxsize=None)
def _builtin():
    x1, x2 = sp.symbols("x1:3")
    y1, y2, y3 = sp.symbols("x1:4")
    return {
        "linearpair": LinearSystem(
            "linearpair",
            [[0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.5, 0.0], [0.0, -0.5, 0.0, 1.0], [0.3, 0.0, -1.0, 0.0]],
            [[0.2, 0.0, 0.4, 0.0], [0.0, -0.3, 0.0, 0.7], [0.5, 0.0, 0.1, 0.0], [0.0, 0.6, 0.0, -0.2]],
            [1.0, 0.5, -0.3, 0.8]),
        "linearpair2": LinearSystem(
            "linearpair2",
            [[-0.4, 1.1, 0.0], [0.0, 0.3, -0.8], [0.9, 0.0, 0.1]],
            [[0.0, 0.0, 0.6], [0.7, -0.2, 0.0], [0.0, -1.0, 0.5]],
            [0.6, -1.0, 0.4]),
        "quadratic": PolynomialSystem("quadratic", [0, x1 ** 2], [1, 0], [0.7, -0.4]),
        "quadraticfull": PolynomialSystem("quadraticfull", [0, y1 ** 2, y2], [1, 0, 0], [0.7, -0.4, 0.3]),
    }


def builtin_systems():
    return list(_builtin().values())


def get_system(name):
    try:
        return _builtin()[name.lower()]
    except KeyError:
        raise ConfigurationError(f"unknown system {name!r}; choose from {', '.join(_builtin())}") from None


def _number(v):
    if isinstance(v, (GaussianRational, complex)):
        v = complex(v)
        return v if v.imag != 0 else v.real
    return float(v)


def apply_scheme(s, system, T, x0=None, normalize=True):
    """One step of size T: stages applied in time order."""
    if normalize:
        s = s.normalized()
    betas = [_number(st.beta) for st in s.stages]
    dtype = complex if any(isinstance(b, complex) for b in betas) else float
    x = np.array(system.default_x0 if x0 is None else x0, dtype=dtype)
    for st, beta in zip(s.stages, betas):
        if st.alpha != 0:
            x = system.flow(X0, float(st.alpha) * T, x)
        if beta != 0:
            x = system.flow(st.channel, beta * T ** st.channel.degree, x)
    return x


@dataclass
class ConvergenceReport:
    system: str
    mode: str
    grid: list
    errors: list
    slope: object = None
    fit_window: tuple = ()
    local_slopes: list = field(default_factory=list)
    exact: bool = False
    notes: list = field(default_factory=list)

    @property
    def order(self):
        """Estimated order: one-step error exponent minus one, or the global exponent."""
        if self.exact:
            return math.inf
        if self.slope is None:
            return None
        return self.slope - 1 if self.mode == "one-step" else self.slope

    def to_csv(self):
        buf = io.StringIO()
        buf.write("T,error\n")
        for T, e in zip(self.grid, self.errors):
            buf.write(f"{T!r},{e!r}\n")
        return buf.getvalue()

    def summary(self):
        if self.exact:
            return f"{self.system}: exact (error at reference precision, max {max(self.errors):.3e})"
        if self.slope is None:
            return f"{self.system}: no fit ({'; '.join(self.notes)})"
        lo, hi = self.fit_window
        return (f"{self.system}: slope {self.slope:.3f} over T in [{self.grid[hi - 1]:.3g}, "
                f"{self.grid[lo]:.3g}] ({hi - lo} points), order {self.order:.2f}")


def fit_slope(grid, errors, floor=ERROR_FLOOR, tol=0.15, min_points=3):
    """Least-squares slope of log(error) against log(T) on the cleanest regime.

    Points at or below ``floor`` are dropped.  Among contiguous windows of at
    least ``min_points`` points, pick the longest whose local slopes stay
    within ``tol`` of the fitted slope, preferring smaller T on ties.
    Returns (slope, (start, stop), local_slopes, notes).
    """
    idx = [i for i, e in enumerate(errors) if e > floor and np.isfinite(e)]
    notes = []
    if len(idx) < len(errors):
        notes.append(f"{len(errors) - len(idx)} point(s) at or below the {floor:g} floor")
    logs = {i: (math.log(grid[i]), math.log(errors[i])) for i in idx}
    local = []
    for i, j in zip(idx, idx[1:]):
        if j == i + 1:
            local.append((logs[j][1] - logs[i][1]) / (logs[j][0] - logs[i][0]))
    runs, run = [], []
    for i in idx:
        if run and i != run[-1] + 1:
            runs.append(run)
            run = []
        run.append(i)
    if run:
        runs.append(run)
    best = None
    for run in runs:
        for a in range(len(run)):
            for b in range(a + min_points, len(run) + 1):
                pts = run[a:b]
                xs = np.array([logs[i][0] for i in pts])
                ys = np.array([logs[i][1] for i in pts])
                slope = float(np.polyfit(xs, ys, 1)[0])
                loc = np.diff(ys) / np.diff(xs)
                if np.max(np.abs(loc - slope)) > tol:
                    continue
                key = (len(pts), pts[-1])
                if best is None or key > best[0]:
                    best = (key, slope, (pts[0], pts[-1] + 1))
    if best is None:
        notes.append("no clean power-law regime found")
        return None, (), local, notes
    return best[1], best[2], local, notes


def empirical_order(s, system, grid=DEFAULT_GRID, x0=None, mode="one-step", final_time=1.0,
                    floor=ERROR_FLOOR, exact_threshold=EXACT_THRESHOLD):
    """One-step (error ~ T^(order+1)) or multi-step (error ~ h^order) convergence study."""
    if isinstance(system, str):
        system = get_system(system)
    for ch in s.channels():
        if not system.supports(ch):
            raise DomainError(f"channel {name_of(ch)} is not supported by {system.name}")
    x0 = np.array(system.default_x0 if x0 is None else x0, dtype=float)
    errors = []
    grid = [float(T) for T in grid]
    for T in grid:
        if mode == "one-step":
            approx = apply_scheme(s, system, T, x0)
            exact = system.reference(T, x0)
        elif mode == "multi-step":
            n = max(1, round(final_time / T))
            approx = x0
            for _ in range(n):
                approx = apply_scheme(s, system, final_time / n, approx)
            exact = system.reference(final_time, x0)
        else:
            raise ConfigurationError(f"unknown mode {mode!r}")
        errors.append(float(np.linalg.norm(approx - exact)))
    report = ConvergenceReport(system.name, mode, grid, errors)
    if max(errors) <= exact_threshold:
        report.exact = True
        return report
    report.slope, report.fit_window, report.local_slopes, report.notes = fit_slope(grid, errors, floor)
    return report


@dataclass
class DependenceReport:
    system: str
    brackets: tuple
    ranks: list
    dependent: bool

    def __str__(self):
        a, b = (name_of(x) for x in self.brackets)
        verdict = "dependent" if self.dependent else "independent"
        return f"{self.system}: f_{a}, f_{b} {verdict} (pointwise ranks {sorted(set(self.ranks))})"


def dependence_test(system, degree, points=None, samples=8, seed=0, rtol=1e-10):
    """Pointwise rank of (f_a(x), f_b(x)) for the degree-3 or degree-5 pair."""
    if isinstance(system, str):
        system = get_system(system)
    pair = {3: (build_M(2), build_W(1)), 5: (build_M(4), build_W(2))}.get(degree)
    if pair is None:
        raise DomainError("degree must be 3 or 5")
    if points is None:
        points = np.random.default_rng(seed).uniform(-1.5, 1.5, size=(samples, system.dim))
    ranks = []
    for x in points:
        M = np.vstack([system.field(b, np.asarray(x, dtype=float)) for b in pair])
        sv = np.linalg.svd(M, compute_uv=False)
        scale = max(1.0, float(np.max(np.abs(M))))
        ranks.append(int(np.sum(sv > rtol * scale)))
    return DependenceReport(system.name, pair, ranks, all(r <= 1 for r in ranks))


def series_action(poly, system, x0=None):
    """Apply a truncated formal series to x0 on a linear system.

    The word w_1 ... w_k acts on linear coordinates as M_{w_k} ... M_{w_1},
    the Lie-derivative representation of the earliest-left product.
    """
    if not isinstance(system, LinearSystem):
        raise DomainError("series action is implemented for linear systems")
    x = np.array(system.default_x0 if x0 is None else x0, dtype=complex)
    out = np.zeros_like(x)
    mats = (system.A, system.B)
    for word, c in poly.terms.items():
        v = x
        for letter in word:
            v = mats[letter] @ v
        out = out + complex(c) * v
    return out
