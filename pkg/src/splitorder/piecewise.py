"""Univariate polynomials with exact coefficients, for closed-form time integrals."""

from fractions import Fraction


class Poly1:
    """Polynomial in one variable; ``coeffs[k]`` multiplies s**k."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = list(coeffs)
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def const(cls, c):
        return cls((c,))

    @classmethod
    def monomial(cls, k, c=1):
        return cls((0,) * k + (c,))

    def __bool__(self):
        return bool(self.coeffs)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __add__(self, other):
        if not isinstance(other, Poly1):
            other = Poly1.const(other)
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        return Poly1(tuple(x + y for x, y in zip(a, b)) + a[len(b):])

    __radd__ = __add__

    def __neg__(self):
        return Poly1(tuple(-x for x in self.coeffs))

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly1) else Poly1.const(-other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly1):
            if other == 0:
                return Poly1()
            return Poly1(tuple(x * other for x in self.coeffs))
        if not self.coeffs or not other.coeffs:
            return Poly1()
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, x in enumerate(self.coeffs):
            if x == 0:
                continue
            for j, y in enumerate(other.coeffs):
                out[i + j] += x * y
        return Poly1(out)

    __rmul__ = __mul__

    def __pow__(self, n):
        out = Poly1.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __call__(self, s):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc

    def antiderivative(self):
        """Primitive vanishing at 0."""
        return Poly1((0,) + tuple(c * Fraction(1, k + 1) if not isinstance(c, float) else c / (k + 1)
                                  for k, c in enumerate(self.coeffs)))

    def integrate(self, a, b):
        P = self.antiderivative()
        return P(b) - P(a)

    def shift(self, a):
        """The polynomial s -> p(s + a)."""
        out = Poly1()
        base = Poly1((a, 1))
        for c in reversed(self.coeffs):
            out = out * base + c
        return out

    def __eq__(self, other):
        if not isinstance(other, Poly1):
            other = Poly1.const(other)
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"Poly1({list(self.coeffs)})"
