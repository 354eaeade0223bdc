"""Certified density decisions for finitely generated subgroups of R^n.

Generators have coordinates in Q(sqrt2, sqrt3, sqrt5).  A subgroup is not
dense exactly when some nonzero linear functional takes integer values on
it; such a functional is the certificate of a ``NotDense`` verdict.  With
n + 1 spanning generators, g_{n+1} = sum a_j g_j, and the subgroup is dense
iff 1, a_1, ..., a_n are Q-linearly independent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Optional, Sequence

from . import exact
from .field import FieldElement, ZERO

DENSE = "Dense"
NOT_DENSE = "NotDense"
INCONCLUSIVE = "Inconclusive"


class DimensionMismatchError(ValueError):
    pass


Vector = Sequence[FieldElement]


def _fe(x) -> FieldElement:
    if isinstance(x, FieldElement):
        return x
    if isinstance(x, str):
        return FieldElement.parse(x)
    return FieldElement.from_rational(Fraction(x))


def as_vectors(gens) -> list[tuple]:
    vecs = [tuple(_fe(x) for x in g) for g in gens]
    if not vecs:
        raise DimensionMismatchError("no generators")
    n = len(vecs[0])
    if n == 0:
        raise DimensionMismatchError("ambient dimension must be at least 1")
    if any(len(v) != n for v in vecs):
        raise DimensionMismatchError("generators have different lengths")
    return vecs


def evaluate(F: Vector, v: Vector) -> FieldElement:
    return sum((f * x for f, x in zip(F, v)), ZERO)


@dataclass
class DensityVerdict:
    verdict: str
    branch: str
    # Dense: coefficients a_j of g_{n+1} in the basis g_1..g_n and the basis indices
    coefficients: Optional[tuple] = None
    basis: Optional[tuple] = None
    # NotDense: functional with integer values on every generator
    witness: Optional[tuple] = None
    relation: Optional[tuple] = None
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def dense(self) -> bool:
        return self.verdict == DENSE

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "branch": self.branch}
        if self.coefficients is not None:
            out["coefficients"] = [a.to_string() for a in self.coefficients]
        if self.basis is not None:
            out["basis"] = list(self.basis)
        if self.witness is not None:
            out["witness"] = [f.to_string() for f in self.witness]
        if self.relation is not None:
            out["relation"] = [int(q) for q in self.relation]
        if self.note:
            out["note"] = self.note
        out.update(self.extra)
        return out


def witness_check(F: Vector, gens) -> bool:
    """True iff F is nonzero and F(g) is an integer for every generator, decided exactly."""
    F = [_fe(f) for f in F]
    vecs = as_vectors(gens)
    if len(F) != len(vecs[0]):
        raise DimensionMismatchError("functional and generators live in different dimensions")
    if not any(F):
        return False
    return all(evaluate(F, v).is_integer() for v in vecs)


def _columns_inverse(basis_vecs: list[tuple]) -> list[list]:
    """Inverse of the matrix whose columns are the given vectors."""
    n = len(basis_vecs)
    cols = [[basis_vecs[j][i] for j in range(n)] for i in range(n)]
    return exact.inverse(cols)


def _functional_from_values(binv: list[list], values: Sequence) -> tuple:
    """F with F(b_j) = values[j], i.e. F = values^T B^{-1}."""
    n = len(binv)
    return tuple(
        sum((_fe(values[j]) * binv[j][i] for j in range(n)), ZERO) for i in range(n)
    )


def _scale_to_integers(values: Sequence[Fraction]) -> list[int]:
    return exact.primitive_integer(values)


def _annihilator(vecs: list[tuple], n: int) -> tuple:
    """A nonzero functional vanishing on the span of ``vecs`` (span must be proper)."""
    rows = [list(v) for v in vecs]
    kernel = exact.nullspace(rows, n) if rows else exact.identity(n)
    f = kernel[0]
    # clear denominators of the rational part for readability
    lead = next(x for x in f if x)
    return tuple(_fe(x) / _fe(lead) for x in f)


def decide_density(gens) -> DensityVerdict:
    """Decide whether the subgroup of R^n generated by ``gens`` is dense."""
    vecs = as_vectors(gens)
    n = len(vecs[0])
    k = len(vecs)
    indep = exact.independent_subset(vecs)
    r = len(indep)

    if r < n:
        F = _annihilator([vecs[i] for i in indep], n)
        return DensityVerdict(NOT_DENSE, "proper-span", witness=F, note=f"real rank {r} < {n}")

    if k == n:
        binv = _columns_inverse(vecs)
        F = _functional_from_values(binv, [1] + [0] * (n - 1))
        return DensityVerdict(NOT_DENSE, "lattice", witness=F, note="n generators of full rank span a lattice")

    if k == n + 1:
        return _decide_n_plus_one(vecs, indep)

    # more than n + 1 generators: try every (n+1)-subset first
    for subset in itertools.combinations(range(k), n + 1):
        sub = [vecs[i] for i in subset]
        sub_indep = exact.independent_subset(sub)
        if len(sub_indep) < n:
            continue
        v = _decide_n_plus_one(sub, sub_indep)
        if v.dense:
            v.branch = "subset"
            v.basis = tuple(subset[i] for i in v.basis)
            v.extra["subset"] = list(subset)
            return v
    # no subset certifies density: fall back to the complete closure computation
    closed = closed_subgroup(vecs)
    if closed.dense:
        return DensityVerdict(DENSE, "closure", note="closure computation: identity component is R^n")
    if closed.witness is not None:
        return DensityVerdict(
            NOT_DENSE, "closure", witness=closed.witness,
            note=f"closure identity component has dimension {closed.dimension}",
        )
    return DensityVerdict(INCONCLUSIVE, "subset", note="no (n+1)-subset certifies density")


def _decide_n_plus_one(vecs: list[tuple], indep: list[int]) -> DensityVerdict:
    n = len(vecs[0])
    base = indep[:n]
    last = next(i for i in range(len(vecs)) if i not in base)
    b = [vecs[i] for i in base]
    binv = _columns_inverse(b)
    # g_last = sum_j a_j b_j
    a = tuple(sum((binv[j][i] * vecs[last][i] for i in range(n)), ZERO) for j in range(n))
    test = exact.q_independent_with_one(a)
    if test.independent:
        return DensityVerdict(DENSE, "n+1", coefficients=a, basis=tuple(base) + (last,))
    q = test.relation
    # q_0 + sum q_j a_j = 0, so F(b_j) = q_j gives F(g_last) = -q_0
    F = _functional_from_values(binv, q[1:])
    return DensityVerdict(
        NOT_DENSE, "n+1", coefficients=a, basis=tuple(base) + (last,), witness=F, relation=q,
    )


# -- closure of a finitely generated subgroup ---------------------------------


@dataclass
class ClosedSubgroup:
    """Closure of the subgroup generated by vectors in R^m.

    ``dimension`` is the dimension of the identity component V of the closure;
    ``span_rank`` the real rank of the generators; ``component`` a basis of V.
    """

    ambient: int
    span_rank: int
    dimension: int
    component: list
    witness: Optional[tuple]

    @property
    def dense(self) -> bool:
        return self.dimension == self.ambient

    @property
    def discrete(self) -> bool:
        return self.dimension == 0


def closed_subgroup(gens) -> ClosedSubgroup:
    """Exact identity component of the closure of a subgroup of R^m.

    With b_1..b_r a real basis chosen among the generators and g_i = sum_j M_ij b_j,
    the integer-valued functionals are the f in Z^r whose images M f have
    vanishing irrational coordinates (and integral rational parts).  So the
    identity component has dimension rank_Q(A), A being the matrix of
    irrational coordinates of M, and in b-coordinates it is the row space of A.
    """
    vecs = as_vectors(gens)
    m = len(vecs[0])
    indep = exact.independent_subset(vecs)
    r = len(indep)
    if r == 0:
        return ClosedSubgroup(m, 0, 0, [], _annihilator([], m))
    b = [vecs[i] for i in indep]
    # coefficients of every generator in the basis b
    cols = [[b[j][i] for j in range(r)] for i in range(m)]
    coeffs = []
    for v in vecs:
        x = exact.solve(cols, list(v))
        coeffs.append([_fe(t) for t in x])
    a_rows = []
    for row in coeffs:
        for t in range(1, 8):
            a_rows.append([x.coeffs[t] for x in row])
    a_rows = [row for row in a_rows if any(row)]
    red, _ = exact.rref(a_rows) if a_rows else ([], [])
    dim = len(red)
    component = [
        tuple(sum((_fe(y[j]) * b[j][i] for j in range(r)), ZERO) for i in range(m)) for y in red
    ]
    witness = None
    if r < m:
        witness = _annihilator(b, m)
    elif dim < r:
        kernel = exact.nullspace(red, r) if red else exact.identity(r)
        f = _scale_to_integers(kernel[0])
        # make the rational parts of every F(g_i) integral as well
        rat = [sum((Fraction(fj) * row[j].rational_part() for j, fj in enumerate(f)), Fraction(0)) for row in coeffs]
        den = reduce(math.lcm, (q.denominator for q in rat), 1)
        f = [fj * den for fj in f]
        witness = _functional_from_values(_columns_inverse(b), f)
    return ClosedSubgroup(m, r, dim, component, witness)
