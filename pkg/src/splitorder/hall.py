"""Formal brackets, Hall sets and Lie coordinates.

Bracket trees live in the free magma over the generators X_0..X_m.  A Hall
basis is an ordered list of trees; the order is the list order.  The axioms
checked by :func:`validate_hall` are, for a Node (b1, b2):

1. b1 < b2;
2. b2 is a leaf, or b2 = (b3, b4) with b3 <= b1;
3. b1 < (b1, b2);

together with completeness (every admissible pair of basis elements whose
degree fits is itself in the basis) and the Witt dimension count.

Two generation policies are available:

``"bstar"``
    Two generators only.  The 14 elements of degree <= 5 are the fixed prefix
    returned by :func:`bstar_prefix`.  Higher degrees use the same sort key
    that reproduces the prefix: elements are grouped by the number of X_1
    letters (X_0 comes last), then ordered by the degree of their *core*
    (the tree with trailing ``, X_0`` right factors stripped), then by the
    number of stripped X_0 factors, then recursively by the core's children.
    The result is called B*-compatible; it is a valid Hall set containing
    every M_nu, W_j, Q_1 and ad^2_{W_1}(X_0).

``"lyndon"``
    Mirror images of the standard bracketings of Lyndon words, ordered by
    decreasing lexicographic order of the words (with letter 0 smallest).
    Mirroring turns the classical left-factor condition into the
    right-factor condition used here, and keeps X_0 as the largest element.
"""

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .errors import ConfigurationError, DomainError, NotLieError, ParseError
from .freealg import RATIONAL, Polynomial, bracket, coerce_scalar, format_scalar

POLICIES = ("bstar", "lyndon")


# -- bracket trees ------------------------------------------------------------

class BracketTree:
    __slots__ = ()

    @property
    def degree(self):
        return self._degree

    def __len__(self):
        return self._degree

    def count(self, j):
        """n_j: number of occurrences of generator j."""
        return self._counts.get(j, 0)

    @property
    def counts(self):
        return dict(self._counts)

    def foliage(self):
        raise NotImplementedError

    def __str__(self):
        return render(self)


class Leaf(BracketTree):
    __slots__ = ("index", "_degree", "_counts", "_hash")

    def __init__(self, index):
        if index < 0:
            raise DomainError("generator index must be nonnegative")
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "_degree", 1)
        object.__setattr__(self, "_counts", {index: 1})
        object.__setattr__(self, "_hash", hash(("L", index)))

    def __setattr__(self, name, value):
        raise AttributeError("bracket trees are immutable")

    def foliage(self):
        return (self.index,)

    def __eq__(self, other):
        return isinstance(other, Leaf) and other.index == self.index

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Leaf({self.index})"


class Node(BracketTree):
    __slots__ = ("left", "right", "_degree", "_counts", "_hash")

    def __init__(self, left, right):
        counts = dict(left._counts)
        for k, v in right._counts.items():
            counts[k] = counts.get(k, 0) + v
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "_degree", left._degree + right._degree)
        object.__setattr__(self, "_counts", counts)
        object.__setattr__(self, "_hash", hash(("N", left._hash, right._hash)))

    def __setattr__(self, name, value):
        raise AttributeError("bracket trees are immutable")

    def foliage(self):
        return self.left.foliage() + self.right.foliage()

    def __eq__(self, other):
        if self is other:
            return True
        return (isinstance(other, Node) and other._hash == self._hash
                and other.left == self.left and other.right == self.right)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Node({self.left!r}, {self.right!r})"


X0 = Leaf(0)
X1 = Leaf(1)


def build_M(nu):
    """M_0 = X_1 and M_{nu+1} = (M_nu, X_0)."""
    if nu < 0:
        raise DomainError("M index must be nonnegative")
    b = X1
    for _ in range(nu):
        b = Node(b, X0)
    return b


def build_W(j):
    """W_j = (M_{j-1}, M_j) = ad^2_{M_{j-1}}(X_0)."""
    if j < 1:
        raise DomainError("W index must be positive")
    return Node(build_M(j - 1), build_M(j))


def build_Q1():
    """Q_1 = ad^4_{X_1}(X_0) = (X_1, (X_1, W_1))."""
    return Node(X1, Node(X1, build_W(1)))


def build_Q1_flat():
    """ad^2_{W_1}(X_0) = (W_1, (W_1, X_0))."""
    w1 = build_W(1)
    return Node(w1, Node(w1, X0))


def bstar_prefix():
    M1, M2, M3, M4 = (build_M(k) for k in range(1, 5))
    W1, W2 = build_W(1), build_W(2)
    W1X0 = Node(W1, X0)
    X1W1 = Node(X1, W1)
    return (X1, M1, M2, M3, M4, W1, W1X0, Node(W1X0, X0), W2, X1W1,
            Node(X1W1, X0), Node(M1, W1), build_Q1(), X0)


# -- names and text format ---------------------------------------------------

def _named_trees(limit=12):
    names = {}
    for nu in range(1, limit):
        names[build_M(nu)] = f"M{nu}"
    for j in range(1, limit // 2):
        names[build_W(j)] = f"W{j}"
    names[build_Q1()] = "Q1"
    names[build_Q1_flat()] = "Q1b"
    return names


_NAMES = _named_trees()
_BY_NAME = {v: k for k, v in _NAMES.items()}


def name_of(b):
    """Short name (X0, M2, W1, Q1, ...) or the bracket expression."""
    if isinstance(b, Leaf):
        return f"X{b.index}"
    return _NAMES.get(b, render(b))


def render(b, brackets="[]"):
    """Nested bracket expression such as ``[X1,[X1,X0]]``."""
    if isinstance(b, Leaf):
        return f"X{b.index}"
    o, c = brackets
    return f"{o}{render(b.left, brackets)},{render(b.right, brackets)}{c}"


def parse_bracket(text, ngens=None):
    """Parse ``[X1,[X1,X0]]``, ``(X1,(X1,X0))`` or a name like ``W1``."""
    s = text.strip()
    pos = 0

    def fail(msg):
        raise ParseError(f"{msg} in bracket expression {text!r}", column=pos + 1)

    def skip():
        nonlocal pos
        while pos < len(s) and s[pos] == " ":
            pos += 1

    def parse():
        nonlocal pos
        skip()
        if pos >= len(s):
            fail("unexpected end")
        ch = s[pos]
        if ch in "([":
            close = ")" if ch == "(" else "]"
            pos += 1
            left = parse()
            skip()
            if pos >= len(s) or s[pos] != ",":
                fail("expected ','")
            pos += 1
            right = parse()
            skip()
            if pos >= len(s) or s[pos] != close:
                fail(f"expected {close!r}")
            pos += 1
            return Node(left, right)
        start = pos
        while pos < len(s) and (s[pos].isalnum() or s[pos] == "_"):
            pos += 1
        token = s[start:pos]
        if not token:
            fail(f"unexpected character {ch!r}")
        if token[0] == "X" and token[1:].isdigit():
            idx = int(token[1:])
            if ngens is not None and idx >= ngens:
                pos = start
                fail(f"generator {token} outside the alphabet")
            return Leaf(idx)
        if token in _BY_NAME:
            return _BY_NAME[token]
        pos = start
        fail(f"unknown symbol {token!r}")

    tree = parse()
    skip()
    if pos != len(s):
        fail("trailing characters")
    return tree


# -- Witt numbers ------------------------------------------------------------

def mobius(n):
    if n < 1:
        raise DomainError("mobius needs n >= 1")
    result = 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    if n > 1:
        result = -result
    return result


def witt_dimension(ngens, n):
    """Dimension of the degree-n part of the free Lie algebra on ngens letters."""
    total = sum(mobius(d) * ngens ** (n // d) for d in range(1, n + 1) if n % d == 0)
    return total // n


# -- Hall bases ----------------------------------------------------------------

class HallBasis:
    """An ordered Hall set truncated at degree ``N``."""

    def __init__(self, ngens, N, elements, policy=None):
        self.ngens = ngens
        self.N = N
        self.elements = tuple(elements)
        self.policy = policy
        self._index = {b: i for i, b in enumerate(self.elements)}
        self._solvers = {}
        self._structure = None
        self._truncations = {}

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def __contains__(self, b):
        return b in self._index

    def __eq__(self, other):
        return (isinstance(other, HallBasis) and self.ngens == other.ngens
                and self.N == other.N and self.elements == other.elements)

    def __hash__(self):
        return hash((self.ngens, self.N, self.elements))

    def __repr__(self):
        return f"HallBasis(ngens={self.ngens}, N={self.N}, size={len(self)}, policy={self.policy!r})"

    def index(self, b):
        try:
            return self._index[b]
        except KeyError:
            raise DomainError(f"{render(b)} is not in the basis") from None

    def less(self, a, b):
        return self._index[a] < self._index[b]

    def of_degree(self, n):
        return [b for b in self.elements if b.degree == n]

    def truncate(self, N):
        """The same ordered basis restricted to degrees <= N."""
        if N >= self.N:
            return self
        if N not in self._truncations:
            self._truncations[N] = HallBasis(
                self.ngens, N, [b for b in self.elements if b.degree <= N], self.policy)
        return self._truncations[N]

    def dump(self):
        header = f"# hall basis: letters={self.ngens} degree={self.N}"
        if self.policy:
            header += f" policy={self.policy}"
        lines = [header] + [render(b, "()") for b in self.elements]
        return "\n".join(lines) + "\n"


def load_basis(text, source=None):
    ngens, N, policy = None, None, None
    elements = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if token.startswith("letters="):
                    ngens = int(token.split("=", 1)[1])
                elif token.startswith("degree="):
                    N = int(token.split("=", 1)[1])
                elif token.startswith("policy="):
                    policy = token.split("=", 1)[1]
            continue
        try:
            elements.append(parse_bracket(line))
        except ParseError as exc:
            raise ParseError(str(exc), line=lineno, column=exc.column, source=source) from None
    if not elements:
        raise ParseError("empty basis", source=source)
    if ngens is None:
        ngens = 1 + max(max(b.foliage()) for b in elements)
    if N is None:
        N = max(b.degree for b in elements)
    return HallBasis(ngens, N, elements, policy)


def _bstar_key(b):
    strips = 0
    core = b
    while isinstance(core, Node) and core.right == X0:
        core = core.left
        strips += 1
    group = math.inf if b == X0 else b.count(1)
    if isinstance(core, Node):
        tie = (_bstar_key(core.left), _bstar_key(core.right))
    else:
        tie = (core.index,)
    return (group, core.degree, strips, tie)


def _lex_cmp(u, v):
    return (u > v) - (u < v)


def _lyndon_cmp(a, b):
    # larger Lyndon word (reversed foliage) comes first
    return -_lex_cmp(a.foliage()[::-1], b.foliage()[::-1])


def _admissible(b1, b2, less):
    if not less(b1, b2):
        return False
    if isinstance(b2, Leaf):
        return True
    return not less(b1, b2.left)


def generate_hall(ngens, N, policy="bstar"):
    """Hall set over ngens generators truncated at degree N."""
    if N < 1:
        raise DomainError("degree must be at least 1")
    if ngens < 1 or ngens > 6:
        raise DomainError("between 1 and 6 generators are supported")
    if policy not in POLICIES:
        raise ConfigurationError(f"unknown basis policy {policy!r}; choose from {', '.join(POLICIES)}")
    return _generate(ngens, N, policy)


@functools.lru_cache(maxsize=None)
def _generate(ngens, N, policy):
    if policy == "bstar":
        if ngens != 2:
            raise ConfigurationError("the bstar policy is defined for two generators only")
        key = _bstar_key
    else:
        key = functools.cmp_to_key(_lyndon_cmp)
    by_degree = {1: [Leaf(i) for i in range(ngens)]}
    order = sorted(by_degree[1], key=key)
    keys = {b: key(b) for b in order}

    def less(a, b):
        return keys[a] < keys[b]

    for n in range(2, N + 1):
        fresh = []
        for d1 in range(1, n):
            for b1 in by_degree[d1]:
                for b2 in by_degree[n - d1]:
                    if _admissible(b1, b2, less):
                        fresh.append(Node(b1, b2))
        for b in fresh:
            keys[b] = key(b)
        by_degree[n] = fresh
        order.extend(fresh)
    order.sort(key=lambda b: keys[b])
    for a, b in zip(order, order[1:]):
        if not keys[a] < keys[b]:
            raise AssertionError(f"order policy {policy} does not separate {render(a)} and {render(b)}")
    return HallBasis(ngens, N, order, policy)


@dataclass(frozen=True)
class Violation:
    axiom: str
    elements: tuple
    message: str

    def __str__(self):
        return f"{self.axiom}: {self.message}"


def validate_hall(basis):
    """Check the Hall axioms, completeness and Witt counts.

    Returns a list of :class:`Violation`; an empty list means the basis passes.
    """
    out = []
    elems = basis.elements
    pos = {}
    for i, b in enumerate(elems):
        if b in pos:
            out.append(Violation("duplicate", (b,), f"{render(b)} appears twice"))
        else:
            pos[b] = i
        if b.degree > basis.N:
            out.append(Violation("degree", (b,), f"{render(b)} exceeds degree {basis.N}"))
    for i in range(basis.ngens):
        if Leaf(i) not in pos:
            out.append(Violation("generators", (Leaf(i),), f"X{i} is missing"))

    def less(a, b):
        return pos[a] < pos[b]

    for b in elems:
        if not isinstance(b, Node):
            continue
        b1, b2 = b.left, b.right
        missing = [c for c in (b1, b2) if c not in pos]
        if missing:
            out.append(Violation("closure", (b,) + tuple(missing),
                                 f"children of {render(b)} are not in the basis"))
            continue
        if not less(b1, b2):
            out.append(Violation("axiom 1", (b1, b2), f"{render(b1)} is not below {render(b2)}"))
        if isinstance(b2, Node) and less(b1, b2.left):
            out.append(Violation("axiom 2", (b1, b2.left),
                                 f"left factor {render(b2.left)} of {render(b2)} exceeds {render(b1)}"))
        if not less(b1, b):
            out.append(Violation("axiom 3", (b1, b), f"{render(b1)} is not below {render(b)}"))
    # completeness
    by_degree = {}
    for b in elems:
        by_degree.setdefault(b.degree, []).append(b)
    for n in range(2, basis.N + 1):
        for d1 in range(1, n):
            for b1 in by_degree.get(d1, []):
                for b2 in by_degree.get(n - d1, []):
                    if _admissible(b1, b2, less) and Node(b1, b2) not in pos:
                        out.append(Violation("completeness", (b1, b2),
                                             f"admissible {render(Node(b1, b2))} is missing"))
    for n in range(1, basis.N + 1):
        have = len(by_degree.get(n, []))
        want = witt_dimension(basis.ngens, n)
        if have != want:
            out.append(Violation("witt", (), f"degree {n} has {have} elements, expected {want}"))
    return out


# -- evaluation and coordinates ------------------------------------------------

@functools.lru_cache(maxsize=4096)
def _evaluate(b, N, ngens):
    if isinstance(b, Leaf):
        return Polynomial.generator(b.index, ngens=ngens, N=N)
    return bracket(_evaluate(b.left, N, ngens), _evaluate(b.right, N, ngens))


def evaluate(b, N, ngens=2, kind=RATIONAL):
    """Image of a bracket tree in the free Lie algebra, as a polynomial."""
    if b.degree > N:
        raise DomainError(f"{render(b)} has degree {b.degree} > {N}")
    top = max(b.foliage())
    if top >= ngens:
        raise DomainError(f"{render(b)} uses X{top} but only {ngens} generators exist")
    return _evaluate(b, N, ngens).to_kind(kind)


class LieCoordinates:
    """Coordinates of a Lie polynomial in a Hall basis.

    Every element of the basis up to degree ``N`` has an entry (zeros
    included), so the vector is complete through its working degree.
    """

    def __init__(self, basis, values, N=None, kind=RATIONAL):
        self.basis = basis
        self.N = basis.N if N is None else N
        self.kind = kind
        zero = coerce_scalar(0, kind)
        self.values = {b: zero for b in basis.elements if b.degree <= self.N}
        for b, v in values.items():
            if b not in self.values:
                raise DomainError(f"{render(b)} is not a basis element of degree <= {self.N}")
            self.values[b] = coerce_scalar(v, kind)

    def __getitem__(self, b):
        if isinstance(b, str):
            b = parse_bracket(b)
        return self.values[b]

    def get(self, b, default=0):
        return self.values.get(b, default)

    def items(self):
        return self.values.items()

    def nonzero(self):
        return {b: v for b, v in self.values.items() if v != 0}

    def reconstruct(self):
        out = Polynomial.zero(self.basis.ngens, self.N, self.kind)
        for b, v in self.values.items():
            if v != 0:
                out = out + evaluate(b, self.N, self.basis.ngens, self.kind).scale(v)
        return out

    def __eq__(self, other):
        if not isinstance(other, LieCoordinates):
            return NotImplemented
        return self.basis == other.basis and self.N == other.N and self.values == other.values

    def __repr__(self):
        inner = ", ".join(f"{name_of(b)}: {format_scalar(v)}" for b, v in self.nonzero().items())
        return f"{type(self).__name__}({{{inner}}})"


def _words(ngens, n):
    return list(product(range(ngens), repeat=n))


def _degree_solver(basis, n):
    """Pivot words and exact inverse for the degree-n evaluation matrix."""
    if n in basis._solvers:
        return basis._solvers[n]
    elems = basis.of_degree(n)
    k = len(elems)
    if k == 0:
        basis._solvers[n] = (elems, [], [])
        return basis._solvers[n]
    words = _words(basis.ngens, n)
    polys = [evaluate(b, n, basis.ngens).bucket(n) for b in elems]
    # rows of `rows` are the element vectors; find k independent word columns
    rows = [[p.get(w, Fraction(0)) for w in words] for p in polys]
    pivots = []
    work = [list(r) for r in rows]
    r = 0
    for col in range(len(words)):
        if r == k:
            break
        piv = next((i for i in range(r, k) if work[i][col] != 0), None)
        if piv is None:
            continue
        work[r], work[piv] = work[piv], work[r]
        inv = 1 / work[r][col]
        work[r] = [x * inv for x in work[r]]
        for i in range(k):
            if i != r and work[i][col] != 0:
                f = work[i][col]
                work[i] = [a - f * b for a, b in zip(work[i], work[r])]
        pivots.append(col)
        r += 1
    if r < k:
        raise DomainError(f"degree-{n} basis elements are linearly dependent")
    # square system S c = v with S[i][j] = coefficient of pivot word i in element j
    S = [[rows[j][pivots[i]] for j in range(k)] for i in range(k)]
    inverse = _invert(S)
    result = (elems, [words[c] for c in pivots], inverse)
    basis._solvers[n] = result
    return result


def _invert(S):
    k = len(S)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(k)] for i, row in enumerate(S)]
    for col in range(k):
        piv = next(i for i in range(col, k) if aug[i][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for i in range(k):
            if i != col and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[col])]
    return [row[k:] for row in aug]


def lie_coordinates(p, basis):
    """Coordinates of ``p`` in ``basis``, raising :class:`NotLieError` if none exist."""
    if p.constant_term() != 0:
        raise DomainError("lie_coordinates needs a zero constant term")
    if p.N > basis.N:
        raise DomainError(f"basis degree {basis.N} is below the polynomial degree {p.N}")
    if p.ngens != basis.ngens:
        raise DomainError("generator count of polynomial and basis differ")
    values = {}
    for n in range(1, p.N + 1):
        bucket = p.bucket(n)
        if not bucket:
            continue
        elems, pivot_words, inverse = _degree_solver(basis, n)
        rhs = [bucket.get(w, 0) for w in pivot_words]
        coords = [sum((row[j] * rhs[j] for j in range(len(rhs)) if rhs[j] != 0), 0)
                  for row in inverse]
        residual = dict(bucket)
        for b, c in zip(elems, coords):
            if c == 0:
                continue
            for w, e in evaluate(b, n, basis.ngens).bucket(n).items():
                v = residual.get(w, 0) - c * e
                if v == 0:
                    residual.pop(w, None)
                else:
                    residual[w] = v
            values[b] = c
        if residual:
            raise NotLieError(Polynomial(residual, ngens=p.ngens, N=p.N, kind=p.kind), n)
    return LieCoordinates(basis, values, N=p.N, kind=p.kind)


def structure_constants(basis):
    """Hall coordinates of [b_i, b_j] for every pair with degree sum <= N.

    Returns a dict ``(i, j) -> {k: c}`` keyed by basis positions.
    """
    if basis._structure is not None:
        return basis._structure
    table = {}
    elems = basis.elements
    for i, a in enumerate(elems):
        for j, b in enumerate(elems):
            d = a.degree + b.degree
            if d > basis.N or i == j:
                continue
            if (j, i) in table:
                table[(i, j)] = {k: -c for k, c in table[(j, i)].items()}
                continue
            br = bracket(evaluate(a, d, basis.ngens), evaluate(b, d, basis.ngens))
            coords = lie_coordinates(br, basis.truncate(d))
            table[(i, j)] = {basis.index(t): c for t, c in coords.nonzero().items()}
    basis._structure = table
    return table
