"""Truncated free associative algebra A^N(X) over exact scalars.

A polynomial is a finite map from words (tuples of generator indices) to
scalars, with every word of length at most the truncation degree N.  Three
scalar kinds are supported:

* ``"rational"``: :class:`fractions.Fraction`
* ``"gaussian"``: :class:`GaussianRational`, exact complex rationals
* ``"float"``: Python floats or complex numbers (only used by numerical code)

Polynomials are immutable.  Terms are stored in one dict per degree so that
products only visit degree pairs whose sum survives truncation.
"""

import math
import re
from fractions import Fraction
from numbers import Rational

from .errors import ContractError, DomainError, ParseError

RATIONAL = "rational"
GAUSSIAN = "gaussian"
FLOAT = "float"
KINDS = (RATIONAL, GAUSSIAN, FLOAT)


class GaussianRational:
    """Exact complex number re + im*i with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", Fraction(re))
        object.__setattr__(self, "im", Fraction(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    @staticmethod
    def _coerce(x):
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, (int, Fraction)):
            return GaussianRational(x, 0)
        return NotImplemented

    @property
    def real(self):
        return self.re

    @property
    def imag(self):
        return self.im

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return complex(self) + other if isinstance(other, (float, complex)) else NotImplemented
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return complex(self) - other if isinstance(other, (float, complex)) else NotImplemented
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return other - complex(self) if isinstance(other, (float, complex)) else NotImplemented
        return o - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return GaussianRational(self.re * other, self.im * other)
        o = self._coerce(other)
        if o is NotImplemented:
            return complex(self) * other if isinstance(other, (float, complex)) else NotImplemented
        return GaussianRational(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return GaussianRational(self.re / other, self.im / other)
        o = self._coerce(other)
        if o is NotImplemented:
            return complex(self) / other if isinstance(other, (float, complex)) else NotImplemented
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("division by zero")
        return self * GaussianRational(o.re / den, -o.im / den)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return other / complex(self) if isinstance(other, (float, complex)) else NotImplemented
        return o / self

    def __pow__(self, n):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return GaussianRational(1) / self ** (-n)
        result = GaussianRational(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, GaussianRational):
            return self.re == other.re and self.im == other.im
        if isinstance(other, (int, Fraction)):
            return self.im == 0 and self.re == other
        if isinstance(other, (float, complex)):
            return complex(self) == other
        return NotImplemented

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self):
        return abs(complex(self))

    def __repr__(self):
        return f"GaussianRational({self.re!s}, {self.im!s})"

    def __str__(self):
        return format_scalar(self)


def scalar_kind(x):
    if isinstance(x, GaussianRational):
        return GAUSSIAN
    if isinstance(x, (int, Fraction)) and not isinstance(x, bool):
        return RATIONAL
    if isinstance(x, Rational):
        return RATIONAL
    if isinstance(x, (float, complex)):
        return FLOAT
    raise ContractError(f"unsupported scalar type {type(x).__name__}")


def is_exact(x):
    return scalar_kind(x) != FLOAT


def coerce_scalar(x, kind):
    """Convert ``x`` to the representation used by ``kind``."""
    if kind == RATIONAL:
        if isinstance(x, GaussianRational):
            if x.im != 0:
                raise ContractError("cannot convert a nonreal Gaussian rational to a rational")
            return x.re
        if isinstance(x, (float, complex)):
            raise ContractError("cannot convert a float to an exact rational")
        return Fraction(x)
    if kind == GAUSSIAN:
        if isinstance(x, (float, complex)):
            raise ContractError("cannot convert a float to a Gaussian rational")
        return x if isinstance(x, GaussianRational) else GaussianRational(x)
    if kind == FLOAT:
        if isinstance(x, GaussianRational):
            return complex(x)
        if isinstance(x, complex):
            return x
        return float(x)
    raise ContractError(f"unknown scalar kind {kind!r}")


def join_kinds(*kinds):
    """Smallest kind able to hold values of all the given kinds."""
    if FLOAT in kinds:
        return FLOAT
    if GAUSSIAN in kinds:
        return GAUSSIAN
    return RATIONAL


def reciprocal(k, kind):
    return 1.0 / k if kind == FLOAT else Fraction(1, k)


# -- scalar text format ----------------------------------------------------

_REAL = r"(?:\d+(?:/\d+)?|\d*\.\d+(?:[eE][+-]?\d+)?|\d+\.?(?:[eE][+-]?\d+)?)"
_SCALAR_RE = re.compile(
    rf"^(?P<re>[+-]?{_REAL})?(?:(?P<isign>[+-])?(?P<im>{_REAL})?i)?$"
)


def _parse_real(text):
    if "." in text or "e" in text or "E" in text:
        return float(text)
    try:
        return Fraction(text)
    except ZeroDivisionError:
        raise ParseError(f"zero denominator in {text!r}") from None


def parse_scalar(text):
    """Parse ``"3/4"``, ``"-2"``, ``"1/2+1/6i"``, ``"-i"`` or a decimal.

    Decimal inputs produce floats (complex for imaginary parts); everything
    else is exact.
    """
    s = text.strip().replace(" ", "")
    m = _SCALAR_RE.match(s)
    if not s or not m or (m.group("re") is None and not s.endswith("i")):
        raise ParseError(f"malformed scalar {text!r}")
    re_txt = m.group("re")
    if not s.endswith("i"):
        return _parse_real(re_txt)
    isign = m.group("isign")
    im_txt = m.group("im")
    if re_txt is not None and isign is None and im_txt is None:
        # "3i" was captured entirely as the real part
        im_txt, re_txt = re_txt, None
    elif re_txt is not None and isign is None:
        raise ParseError(f"malformed scalar {text!r}")
    if re_txt is not None and re_txt[0] in "+-" and im_txt is None and isign is None:
        raise ParseError(f"malformed scalar {text!r}")
    im = _parse_real(im_txt) if im_txt is not None else Fraction(1)
    if isign == "-":
        im = -im
    re_val = _parse_real(re_txt) if re_txt is not None else Fraction(0)
    if isinstance(im, float) or isinstance(re_val, float):
        return complex(float(re_val), float(im))
    return GaussianRational(re_val, im)


def _fmt_fraction(q):
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def format_scalar(x):
    """Inverse of :func:`parse_scalar` (lossless for every kind)."""
    if isinstance(x, GaussianRational):
        if x.im == 0:
            return _fmt_fraction(x.re)
        im = x.im
        if im == 1:
            im_txt = "i"
        elif im == -1:
            im_txt = "-i"
        else:
            im_txt = _fmt_fraction(im) + "i"
        if x.re == 0:
            return im_txt
        if not im_txt.startswith("-"):
            im_txt = "+" + im_txt
        return _fmt_fraction(x.re) + im_txt
    if isinstance(x, complex):
        return f"{x.real!r}{x.imag:+}i" if x.imag else repr(x.real)
    if isinstance(x, float):
        return repr(x)
    return _fmt_fraction(Fraction(x))


def decimal_string(x, digits=15):
    if isinstance(x, (GaussianRational, complex)):
        z = complex(x)
        return f"{z.real:.{digits}g}{z.imag:+.{digits}g}i"
    return f"{float(x):.{digits}g}"


# -- polynomials -------------------------------------------------------------

def _is_zero(c):
    return c == 0


class Polynomial:
    """Element of A^N(X) over a fixed scalar kind.

    ``ngens`` is the number of generators X_0..X_{ngens-1}; ``N`` is the
    truncation degree.  Construct with a mapping ``{word: coefficient}``.
    """

    __slots__ = ("ngens", "N", "kind", "_buckets", "_hash")

    def __init__(self, terms=None, *, ngens=2, N, kind=RATIONAL):
        if kind not in KINDS:
            raise ContractError(f"unknown scalar kind {kind!r}")
        if N < 0:
            raise DomainError("truncation degree must be nonnegative")
        buckets = [dict() for _ in range(N + 1)]
        for word, c in (terms or {}).items():
            word = tuple(word)
            if len(word) > N:
                continue
            for letter in word:
                if not 0 <= letter < ngens:
                    raise DomainError(f"letter {letter} outside 0..{ngens - 1}")
            c = coerce_scalar(c, kind)
            if _is_zero(c):
                continue
            bucket = buckets[len(word)]
            bucket[word] = bucket.get(word, 0) + c
            if _is_zero(bucket[word]):
                del bucket[word]
        self.ngens = ngens
        self.N = N
        self.kind = kind
        self._buckets = tuple(buckets)
        self._hash = None

    @classmethod
    def _from_buckets(cls, buckets, ngens, N, kind):
        obj = object.__new__(cls)
        obj.ngens = ngens
        obj.N = N
        obj.kind = kind
        obj._buckets = tuple(buckets)
        obj._hash = None
        return obj

    # constructors
    @classmethod
    def zero(cls, ngens=2, N=1, kind=RATIONAL):
        return cls._from_buckets([{} for _ in range(N + 1)], ngens, N, kind)

    @classmethod
    def one(cls, ngens=2, N=1, kind=RATIONAL):
        return cls({(): 1}, ngens=ngens, N=N, kind=kind)

    @classmethod
    def monomial(cls, word, coeff=1, *, ngens=2, N, kind=RATIONAL):
        return cls({tuple(word): coeff}, ngens=ngens, N=N, kind=kind)

    @classmethod
    def generator(cls, i, *, ngens=2, N, kind=RATIONAL):
        return cls.monomial((i,), 1, ngens=ngens, N=N, kind=kind)

    # access
    @property
    def truncation_degree(self):
        return self.N

    @property
    def terms(self):
        out = {}
        for bucket in self._buckets:
            out.update(bucket)
        return out

    def bucket(self, n):
        return self._buckets[n] if 0 <= n <= self.N else {}

    def coeff(self, word):
        word = tuple(word)
        if len(word) > self.N:
            return coerce_scalar(0, self.kind)
        return self._buckets[len(word)].get(word, coerce_scalar(0, self.kind))

    def constant_term(self):
        return self.coeff(())

    def is_zero(self):
        return not any(self._buckets)

    def __bool__(self):
        return not self.is_zero()

    def __len__(self):
        return sum(len(b) for b in self._buckets)

    def degrees(self):
        return [n for n, b in enumerate(self._buckets) if b]

    def to_kind(self, kind):
        if kind == self.kind:
            return self
        buckets = [{w: coerce_scalar(c, kind) for w, c in b.items()} for b in self._buckets]
        return Polynomial._from_buckets(buckets, self.ngens, self.N, kind)

    def truncate(self, N):
        """pi_N of this polynomial (N may not exceed the current degree)."""
        if N > self.N:
            raise DomainError("cannot raise the truncation degree")
        return Polynomial._from_buckets(
            [dict(b) for b in self._buckets[: N + 1]], self.ngens, N, self.kind)

    def lift(self, N):
        """Same terms viewed in a larger truncation."""
        if N < self.N:
            return self.truncate(N)
        buckets = [dict(b) for b in self._buckets] + [{} for _ in range(N - self.N)]
        return Polynomial._from_buckets(buckets, self.ngens, N, self.kind)

    def reverse(self):
        """Image under the word-reversal antiautomorphism."""
        buckets = [{w[::-1]: c for w, c in b.items()} for b in self._buckets]
        return Polynomial._from_buckets(buckets, self.ngens, self.N, self.kind)

    # arithmetic
    def _check(self, other):
        if not isinstance(other, Polynomial):
            raise ContractError("expected a Polynomial")
        if other.N != self.N:
            raise ContractError(f"truncation degrees differ ({self.N} vs {other.N})")
        if other.ngens != self.ngens:
            raise ContractError(f"generator counts differ ({self.ngens} vs {other.ngens})")
        if other.kind != self.kind:
            raise ContractError(f"scalar kinds differ ({self.kind} vs {other.kind})")

    def _combine(self, other, sign):
        self._check(other)
        buckets = []
        for a, b in zip(self._buckets, other._buckets):
            out = dict(a)
            for w, c in b.items():
                v = out.get(w, 0) + (c if sign > 0 else -c)
                if _is_zero(v):
                    out.pop(w, None)
                else:
                    out[w] = v
            buckets.append(out)
        return Polynomial._from_buckets(buckets, self.ngens, self.N, self.kind)

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            return self + self.constant(other)
        return self._combine(other, 1)

    def __radd__(self, other):
        return self.constant(other) + self

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            return self - self.constant(other)
        return self._combine(other, -1)

    def __rsub__(self, other):
        return self.constant(other) - self

    def __neg__(self):
        return self.scale(-1)

    def constant(self, c):
        return Polynomial({(): c}, ngens=self.ngens, N=self.N, kind=self.kind)

    def scale(self, c):
        c = coerce_scalar(c, self.kind)
        if _is_zero(c):
            return Polynomial.zero(self.ngens, self.N, self.kind)
        buckets = []
        for b in self._buckets:
            out = {}
            for w, v in b.items():
                p = v * c
                if not _is_zero(p):
                    out[w] = p
            buckets.append(out)
        return Polynomial._from_buckets(buckets, self.ngens, self.N, self.kind)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return mul_truncated(self, other)
        try:
            return self.scale(other)
        except ContractError:
            return NotImplemented

    def __rmul__(self, other):
        try:
            return self.scale(other)
        except ContractError:
            return NotImplemented

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return (self.N == other.N and self.ngens == other.ngens
                and self._buckets == other._buckets)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.N, self.ngens, frozenset(self.terms.items())))
        return self._hash

    def __repr__(self):
        return f"Polynomial({format_polynomial(self)}, N={self.N})"


def word_string(word):
    return "".join(f"X{i}" for i in word) if word else "1"


def format_polynomial(p):
    """Terms by degree, e.g. ``X0X1 - X1X0 + 1/2 X0X0``."""
    if p.is_zero():
        return "0"
    out = ""
    for n in range(p.N + 1):
        for w in sorted(p.bucket(n)):
            c = p.bucket(n)[w]
            text = format_scalar(c)
            compound = "+" in text[1:] or "-" in text[1:]
            neg = text.startswith("-") and not compound
            if neg:
                text = text[1:]
            if compound:
                text = f"({text})"
            term = word_string(w) if text == "1" and w else (f"{text} {word_string(w)}" if w else text)
            if not out:
                out = ("-" if neg else "") + term
            else:
                out += (" - " if neg else " + ") + term
    return out


def mul_truncated(a, b):
    """pi_N(ab), dropping every product word longer than N."""
    a._check(b)
    N = a.N
    out = [dict() for _ in range(N + 1)]
    for i, ba in enumerate(a._buckets):
        if not ba:
            continue
        for j in range(0, N - i + 1):
            bb = b._buckets[j]
            if not bb:
                continue
            target = out[i + j]
            for wa, ca in ba.items():
                for wb, cb in bb.items():
                    w = wa + wb
                    target[w] = target.get(w, 0) + ca * cb
    for bucket in out:
        for w in [w for w, c in bucket.items() if _is_zero(c)]:
            del bucket[w]
    return Polynomial._from_buckets(out, a.ngens, N, a.kind)


def bracket(a, b):
    return mul_truncated(a, b) - mul_truncated(b, a)


def exp_truncated(s):
    """Sum_{k<=N} s^k / k! for s without constant term."""
    if not _is_zero(s.constant_term()):
        raise DomainError("exp_truncated needs a zero constant term")
    one = Polynomial.one(s.ngens, s.N, s.kind)
    result = one
    # Horner form: 1 + s(1 + s/2(1 + s/3(...)))
    for k in range(s.N, 0, -1):
        result = one + mul_truncated(s, result).scale(reciprocal(k, s.kind))
    return result


def log_truncated(p):
    """Sum_{k<=N} (-1)^(k+1) (p-1)^k / k for p with constant term 1."""
    if p.constant_term() != 1:
        raise DomainError("log_truncated needs constant term 1")
    q = p - Polynomial.one(p.ngens, p.N, p.kind)
    N = p.N
    if N == 0:
        return q
    # acc ends as sum_k (-1)^(k+1) q^(k-1) / k
    acc = Polynomial.zero(p.ngens, N, p.kind)
    for k in range(N, 0, -1):
        c = reciprocal(k, p.kind)
        if k % 2 == 0:
            c = -c
        acc = p.constant(c) + mul_truncated(q, acc)
    return mul_truncated(q, acc)


def grade(p, n):
    """Homogeneous component of degree n."""
    if not 0 <= n <= p.N:
        raise DomainError(f"degree {n} outside 0..{p.N}")
    buckets = [{} for _ in range(p.N + 1)]
    buckets[n] = dict(p.bucket(n))
    return Polynomial._from_buckets(buckets, p.ngens, p.N, p.kind)


def bch(a, b):
    """log(exp(a) exp(b)) in the truncation shared by a and b."""
    return log_truncated(mul_truncated(exp_truncated(a), exp_truncated(b)))


def factorial_inverse(k, kind=RATIONAL):
    return reciprocal(math.factorial(k), kind)
