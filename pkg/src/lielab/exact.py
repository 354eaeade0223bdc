"""Exact Gaussian elimination over Q and over the multiquadratic field.

Every routine works on lists of rows whose entries support ``+ - * /`` and
exact zero tests: ``Fraction``, ``int`` or :class:`~lielab.field.FieldElement`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Optional, Sequence

from .field import FieldElement


def _is_zero(x) -> bool:
    return not x


def rref(rows: Sequence[Sequence]) -> tuple[list[list], list[int]]:
    """Reduced row echelon form; returns (nonzero rows, pivot columns)."""
    m = [list(r) for r in rows]
    if not m:
        return [], []
    ncols = len(m[0])
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if not _is_zero(m[i][c])), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        if p != 1:
            inv = 1 / p if isinstance(p, FieldElement) else Fraction(1) / p
            m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and not _is_zero(m[i][c]):
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def rank(rows: Sequence[Sequence]) -> int:
    return len(rref(rows)[1])


def nullspace(rows: Sequence[Sequence], ncols: Optional[int] = None) -> list[list]:
    """Basis of {x : A x = 0}."""
    if not rows:
        if ncols is None:
            raise ValueError("ncols is required for an empty matrix")
        return [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    ncols = len(rows[0])
    red, pivots = rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, pc in zip(red, pivots):
            v[pc] = -row[f]
        basis.append(v)
    return basis


def independent_subset(vectors: Sequence[Sequence]) -> list[int]:
    """Indices of a greedy maximal linearly independent subset, in order."""
    if not vectors:
        return []
    # column pivots of the transposed matrix pick the earliest independent vectors
    cols = list(zip(*vectors))
    return rref(cols)[1]


def solve(A: Sequence[Sequence], b: Sequence) -> Optional[list]:
    """One solution x of A x = b, or None when inconsistent."""
    n = len(A[0])
    aug = [list(row) + [bi] for row, bi in zip(A, b)]
    red, pivots = rref(aug)
    if n in pivots:
        return None
    x = [Fraction(0)] * n
    for row, pc in zip(red, pivots):
        x[pc] = row[n]
    return x


def inverse(A: Sequence[Sequence]) -> list[list]:
    n = len(A)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(A)]
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)) or len(pivots) < n:
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in red]


def matmul(A, B, zero=Fraction(0)):
    cols = list(zip(*B))
    out = []
    for row in A:
        # skip zero terms: the matrices here are mostly sparse
        nz = [(k, a) for k, a in enumerate(row) if a]
        out.append([sum((a * col[k] for k, a in nz if col[k]), zero) for col in cols])
    return out


def matvec(A, v):
    return [sum((a * x for a, x in zip(row, v)), Fraction(0)) for row in A]


def identity(n: int, one=Fraction(1)):
    zero = one * 0
    return [[one if i == j else zero for j in range(n)] for i in range(n)]


# -- rational specifics ---------------------------------------------------


def qrank(vectors: Sequence[Sequence]) -> int:
    """Rank of the Q-span of rational vectors (0 for an empty list)."""
    if not vectors:
        return 0
    lengths = {len(v) for v in vectors}
    if len(lengths) != 1:
        raise ValueError("all vectors must have the same length")
    return rank([[Fraction(x) for x in v] for v in vectors])


def primitive_integer(v: Sequence[Fraction]) -> list[int]:
    """Scale a rational vector to a primitive integer vector (same direction)."""
    v = [Fraction(x) for x in v]
    den = reduce(math.lcm, (x.denominator for x in v), 1)
    ints = [int(x * den) for x in v]
    g = reduce(math.gcd, ints, 0)
    return [i // g for i in ints] if g else ints


def integer_kernel(vectors: Sequence[Sequence[FieldElement]]) -> list[list[int]]:
    """Integer vectors m spanning (over Q) all relations sum_i m_i v_i = 0.

    The vectors have field-element entries; relations are detected on the
    rational coordinates, so the result spans a finite-index sublattice of
    the full relation lattice.
    """
    if not vectors:
        return []
    rows = []
    for coord in range(len(vectors[0])):
        for t in range(8):
            rows.append([_coords(v[coord])[t] for v in vectors])
    return [primitive_integer(k) for k in nullspace(rows)]


def _coords(x) -> tuple:
    if isinstance(x, FieldElement):
        return x.coeffs
    q = Fraction(x)
    return (q,) + (Fraction(0),) * 7


@dataclass(frozen=True)
class Independence:
    """Outcome of the Q-independence test of {1, a_1, ..., a_n}.

    ``relation`` holds integers (q_0, ..., q_n) with q_0 + sum q_j a_j = 0.
    """

    independent: bool
    relation: Optional[tuple] = None

    def __bool__(self):
        return self.independent


def q_independent_with_one(values: Sequence) -> Independence:
    """Decide Q-linear independence of {1, a_1, ..., a_n} exactly."""
    elems = [FieldElement.from_rational(1)] + [
        v if isinstance(v, FieldElement) else FieldElement.from_rational(v) for v in values
    ]
    # columns are the 8 rational coordinates of 1, a_1, ..., a_n
    rows = [[e.coeffs[t] for e in elems] for t in range(8)]
    if rank(rows) == len(elems):
        return Independence(True)
    kernel = nullspace(rows)
    # a relation touching only q_0 would say 1 = 0; every kernel vector has some q_j != 0
    best = min((primitive_integer(k) for k in kernel), key=lambda r: sum(abs(x) for x in r))
    lead = next(x for x in best[1:] if x)
    if lead < 0:
        best = [-x for x in best]
    return Independence(False, tuple(best))
