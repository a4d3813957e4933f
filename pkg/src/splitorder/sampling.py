"""Random exact Dirac controls, optionally matching the reference coordinates.

Used by the property tests and the acceptance suite.  ``rng`` is a
:class:`random.Random` instance so that every draw is reproducible.
"""

import math
from fractions import Fraction

from .errors import DomainError
from .hall import X1
from .scheme import DiracControl, Impulse


def random_rational(rng, lo=-2, hi=2, denominator=12):
    span = (hi - lo) * denominator
    return Fraction(lo) + Fraction(rng.randint(0, span), denominator)


def random_times(rng, n, horizon=1, grid=96, include_ends=False):
    """n distinct sorted rational times in [0, horizon] on a uniform grid."""
    pool = range(0, grid + 1) if include_ends else range(1, grid)
    ticks = sorted(rng.sample(list(pool), n))
    return [Fraction(horizon) * Fraction(k, grid) for k in ticks]


def random_control(rng, n, channels=(X1,), horizon=1, grid=96):
    times = random_times(rng, n, horizon, grid, include_ends=True)
    imps = []
    for t in times:
        amp = random_rational(rng)
        while amp == 0:
            amp = random_rational(rng)
        imps.append(Impulse(t, rng.choice(list(channels)), amp))
    return DiracControl(Fraction(horizon), imps)


def solve_linear(A, b):
    """Exact solution of a square system over the rationals."""
    n = len(A)
    M = [list(map(Fraction, row)) + [Fraction(v)] for row, v in zip(A, b)]
    for col in range(n):
        piv = next((i for i in range(col, n) if M[i][col] != 0), None)
        if piv is None:
            raise DomainError("singular system")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for i in range(n):
            if i != col and M[i][col] != 0:
                f = M[i][col]
                M[i] = [a - f * c for a, c in zip(M[i], M[col])]
    return [row[n] for row in M]


def matching_control(rng, n_x1, moments, extra=(), n_extra=0, grid=96):
    """Control on [0, 1] whose X_1 kicks reproduce the reference M_0..M_{moments-1}.

    xi_{M_nu}(1) = sum_i a_i (1 - tau_i)^nu / nu! must equal 1/(nu+1)!.  The
    first ``n_x1 - moments`` amplitudes are random; the rest solve the moment
    system.  ``n_extra`` further kicks are placed on channels from ``extra``
    (e.g. W_1) with random amplitudes; they leave the M coordinates alone.
    """
    if n_x1 < moments:
        raise DomainError("need at least as many X1 kicks as matched moments")
    while True:
        times = random_times(rng, n_x1 + n_extra, 1, grid, include_ends=True)
        order = list(range(len(times)))
        rng.shuffle(order)
        x1_times = sorted(times[i] for i in order[:n_x1])
        other_times = sorted(times[i] for i in order[n_x1:])
        free = [random_rational(rng) for _ in range(n_x1 - moments)]
        fixed_t, solve_t = x1_times[: n_x1 - moments], x1_times[n_x1 - moments:]
        A, rhs = [], []
        for nu in range(moments):
            w = Fraction(1, math.factorial(nu))
            target = Fraction(1, math.factorial(nu + 1))
            target -= sum(a * (1 - t) ** nu * w for a, t in zip(free, fixed_t))
            A.append([(1 - t) ** nu * w for t in solve_t])
            rhs.append(target)
        try:
            solved = solve_linear(A, rhs)
        except DomainError:
            continue
        amps = dict(zip(fixed_t, free))
        amps.update(zip(solve_t, solved))
        imps = [Impulse(t, X1, amps[t]) for t in x1_times if amps[t] != 0]
        for t in other_times:
            amp = random_rational(rng)
            if amp != 0:
                imps.append(Impulse(t, rng.choice(list(extra)), amp))
        imps.sort(key=lambda i: i.time)
        return DiracControl(Fraction(1), imps)
