"""Exact Gaussian elimination over rationals, plus a float fallback."""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import List


def fraction_rank(rows: List[List[Fraction]]) -> int:
    m = [list(r) for r in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    row = 0
    for col in range(ncols):
        piv = next((i for i in range(row, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[row], m[piv] = m[piv], m[row]
        pv = m[row][col]
        for i in range(len(m)):
            if i != row and m[i][col] != 0:
                f = m[i][col] / pv
                m[i] = [a - f * b for a, b in zip(m[i], m[row])]
        rank += 1
        row += 1
        if row == len(m):
            break
    return rank


def float_rank(rows: List[List[float]], tol: float = 1e-9) -> int:
    m = [list(map(float, r)) for r in rows]
    if not m:
        return 0
    ncols = len(m[0])
    rank = 0
    row = 0
    for col in range(ncols):
        piv = max(range(row, len(m)), key=lambda i: abs(m[i][col]), default=None)
        if piv is None or abs(m[piv][col]) < tol:
            continue
        m[row], m[piv] = m[piv], m[row]
        pv = m[row][col]
        for i in range(len(m)):
            if i != row and m[i][col] != 0.0:
                f = m[i][col] / pv
                m[i] = [a - f * b for a, b in zip(m[i], m[row])]
        rank += 1
        row += 1
        if row == len(m):
            break
    return rank


def fraction_nullspace(rows: List[List[Fraction]], ncols: int) -> List[List[Fraction]]:
    """RREF-based basis of the right null space of the matrix."""
    m = [list(r) for r in rows if any(x != 0 for x in r)]
    pivots = []
    row = 0
    for col in range(ncols):
        piv = next((i for i in range(row, len(m)) if m[i][col] != 0), None)
        if piv is None:
            continue
        m[row], m[piv] = m[piv], m[row]
        pv = m[row][col]
        m[row] = [a / pv for a in m[row]]
        for i in range(len(m)):
            if i != row and m[i][col] != 0:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[row])]
        pivots.append(col)
        row += 1
        if row == len(m):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            v[pc] = -m[r][fc]
        basis.append(v)
    return basis


def integer_ratio(values: List[Fraction]) -> List[int]:
    """Scale rationals to coprime integers, preserving the sign pattern."""
    den = 1
    for v in values:
        den = den * v.denominator // gcd(den, v.denominator)
    ints = [int(v * den) for v in values]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    if g > 1:
        ints = [x // g for x in ints]
    return ints
