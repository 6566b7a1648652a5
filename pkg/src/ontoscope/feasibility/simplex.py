"""Exact phase-one simplex over the rationals.

Decides feasibility of ``A x = b, x >= 0`` with :class:`fractions.Fraction`
arithmetic and Bland's rule, returning either a feasible point or a Farkas
vector ``z`` with ``A^T z >= 0`` and ``b^T z = -1``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def exact_feasibility(
    A: Sequence[Sequence], b: Sequence
) -> tuple[list[Fraction] | None, list[Fraction] | None]:
    """Return ``(x, None)`` if feasible, else ``(None, z)`` with a Farkas certificate."""
    m = len(b)
    n = len(A[0]) if m else 0
    rows = [[_frac(v) for v in row] for row in A]
    rhs = [_frac(v) for v in b]
    if m == 0:
        return [Fraction(0)] * n, None
    sign = [1 if v >= 0 else -1 for v in rhs]
    width = n + m + 1
    T = []
    for i in range(m):
        row = [sign[i] * v for v in rows[i]] + [Fraction(0)] * m + [sign[i] * rhs[i]]
        row[n + i] = Fraction(1)
        T.append(row)
    basis = [n + i for i in range(m)]
    # reduced costs of the phase-one objective sum(artificials)
    cost = [Fraction(0)] * width
    for j in range(n):
        cost[j] = -sum(T[i][j] for i in range(m))
    cost[-1] = -sum(T[i][-1] for i in range(m))

    while True:
        enter = next((j for j in range(n + m) if cost[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = T[i][-1] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            # phase one is bounded below by zero; an unbounded ray cannot occur
            raise ArithmeticError("phase-one simplex became unbounded")
        r = best[1]
        piv = T[r][enter]
        T[r] = [v / piv for v in T[r]]
        for i in range(m):
            if i != r and T[i][enter] != 0:
                f = T[i][enter]
                Ti, Tr = T[i], T[r]
                T[i] = [Ti[k] - f * Tr[k] for k in range(width)]
        f = cost[enter]
        cost = [cost[k] - f * T[r][k] for k in range(width)]
        basis[r] = enter

    objective = -cost[-1]
    if objective == 0:
        x = [Fraction(0)] * n
        for i, j in enumerate(basis):
            if j < n:
                x[j] = T[i][-1]
        return x, None
    # phase-one duals y_i = 1 - reduced cost of artificial i; A'^T y <= 0, b'^T y > 0
    y = [1 - cost[n + i] for i in range(m)]
    z = [-sign[i] * y[i] for i in range(m)]
    btz = sum(rhs[i] * z[i] for i in range(m))
    z = [v / -btz for v in z]
    return None, z
