"""Lie algebras given by structure constants, and their subspaces.

``[e_i, e_j] = sum_k c[i][j][k] e_k`` with rational constants.  Subspaces
carry either exact bases (rationals or field elements, kept in reduced row
echelon form) or float bases (orthonormal rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import exact

FLOAT_TOL = 1e-8


class NotAnIdealError(ValueError):
    pass


# -- subspaces --------------------------------------------------------------


def _is_float_data(vectors) -> bool:
    if isinstance(vectors, np.ndarray):
        return vectors.dtype.kind in "fc"
    for v in vectors:
        if isinstance(v, np.ndarray) and v.dtype.kind in "fc":
            return True
        for x in v:
            if isinstance(x, (float, np.floating)):
                return True
    return False


class Subspace:
    """A linear subspace of an ``ambient``-dimensional coordinate space."""

    def __init__(self, ambient: int, basis, exact_: bool, tol: float = FLOAT_TOL):
        self.ambient = ambient
        self.exact = exact_
        self.tol = tol
        self.basis = basis  # list of lists (exact rref rows) or ndarray (orthonormal rows)

    @classmethod
    def span(cls, vectors, ambient: int, tol: float = FLOAT_TOL) -> "Subspace":
        vectors = list(vectors) if not isinstance(vectors, np.ndarray) else vectors
        if len(vectors) and _is_float_data(vectors):
            return cls(ambient, _orthonormal_rows(np.asarray(vectors, dtype=float), ambient, tol), False, tol)
        rows = [list(v) for v in vectors if any(x for x in v)]
        red, _ = exact.rref(rows) if rows else ([], [])
        return cls(ambient, red, True)

    @classmethod
    def zero(cls, ambient: int) -> "Subspace":
        return cls(ambient, [], True)

    @classmethod
    def whole(cls, ambient: int) -> "Subspace":
        return cls(ambient, exact.identity(ambient), True)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def vectors(self) -> list:
        return [list(r) for r in self.basis]

    def as_float(self) -> np.ndarray:
        if not self.exact:
            return np.asarray(self.basis)
        if not self.basis:
            return np.zeros((0, self.ambient))
        return _orthonormal_rows(np.array([[float(x) for x in r] for r in self.basis]), self.ambient, FLOAT_TOL)

    def contains(self, v) -> bool:
        if self.exact and not _is_float_data([v]):
            if not any(x for x in v):
                return True
            return exact.rank(self.basis + [list(v)]) == self.dim
        q = self.as_float()
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return True
        resid = v - q.T @ (q @ v) if len(q) else v
        return np.linalg.norm(resid) <= self.tol * max(1.0, nv) * 10

    def contains_space(self, other: "Subspace") -> bool:
        return all(self.contains(v) for v in other.vectors())

    def __eq__(self, other):
        if not isinstance(other, Subspace):
            return NotImplemented
        return (
            self.ambient == other.ambient
            and self.dim == other.dim
            and self.contains_space(other)
        )

    def __repr__(self):
        kind = "exact" if self.exact else "float"
        return f"Subspace(dim={self.dim}, ambient={self.ambient}, {kind})"

    def to_json(self) -> dict:
        if self.exact:
            basis = [[str(x) for x in r] for r in self.basis]
        else:
            basis = [[float(x) for x in r] for r in self.basis]
        return {"ambient": self.ambient, "dim": self.dim, "exact": self.exact, "basis": basis}


def _orthonormal_rows(a: np.ndarray, ambient: int, tol: float) -> np.ndarray:
    if a.size == 0:
        return np.zeros((0, ambient))
    a = np.atleast_2d(a)
    norms = np.linalg.norm(a, axis=1)
    a = a[norms > tol]
    if len(a) == 0:
        return np.zeros((0, ambient))
    a = a / np.linalg.norm(a, axis=1)[:, None]
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    r = int(np.sum(s > tol))
    return vt[:r]


# -- algebras ----------------------------------------------------------------


@dataclass
class LieAlgebraSpec:
    """Structure constants c[i][j][k] of an n-dimensional real Lie algebra."""

    dim: int
    c: list
    labels: Optional[tuple] = None
    name: str = ""
    _cf: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = self.dim
        if len(self.c) != n or any(len(row) != n or any(len(x) != n for x in row) for row in self.c):
            raise ValueError("structure constants must have shape (dim, dim, dim)")
        self.c = [[[Fraction(x) for x in col] for col in row] for row in self.c]
        if self.labels is None:
            self.labels = tuple(f"e{i}" for i in range(n))

    @classmethod
    def from_brackets(cls, dim: int, brackets: dict, labels=None, name: str = "") -> "LieAlgebraSpec":
        """Build from {(i, j): {k: value}} for i < j; antisymmetric partners are filled in."""
        c = [[[Fraction(0)] * dim for _ in range(dim)] for _ in range(dim)]
        for (i, j), out in brackets.items():
            for k, v in out.items():
                c[i][j][k] = Fraction(v)
                c[j][i][k] = -Fraction(v)
        return cls(dim, c, tuple(labels) if labels else None, name)

    @property
    def constants(self) -> np.ndarray:
        if self._cf is None:
            self._cf = np.array([[[float(x) for x in col] for col in row] for row in self.c])
        return self._cf

    def bracket(self, u, v):
        if _is_float_data([u, v]):
            return np.einsum("i,j,ijk->k", np.asarray(u, float), np.asarray(v, float), self.constants)
        n = self.dim
        out = [Fraction(0)] * n
        for i in range(n):
            if not u[i]:
                continue
            for j in range(n):
                if not v[j]:
                    continue
                uv = u[i] * v[j]
                cij = self.c[i][j]
                for k in range(n):
                    if cij[k]:
                        out[k] = out[k] + uv * cij[k]
        return out

    def basis_vector(self, i: int) -> list:
        return [Fraction(int(i == j)) for j in range(self.dim)]

    def is_abelian(self) -> bool:
        return not any(x for row in self.c for col in row for x in col)


@dataclass
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def validate_algebra(spec: LieAlgebraSpec) -> ValidationReport:
    """Check antisymmetry and the Jacobi identity exactly."""
    n = spec.dim
    bad = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if spec.c[i][j][k] != -spec.c[j][i][k]:
                    bad.append(("antisymmetry", (i, j, k)))
    e = [spec.basis_vector(i) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            for l in range(j + 1, n):
                s = [
                    a + b + d
                    for a, b, d in zip(
                        spec.bracket(e[i], spec.bracket(e[j], e[l])),
                        spec.bracket(e[j], spec.bracket(e[l], e[i])),
                        spec.bracket(e[l], spec.bracket(e[i], e[j])),
                    )
                ]
                if any(s):
                    bad.append(("jacobi", (i, j, l)))
    return ValidationReport(not bad, bad)


def bracket_space(spec: LieAlgebraSpec, a: Subspace, b: Subspace) -> Subspace:
    """span{[u, v] : u in a, v in b}."""
    vecs = [spec.bracket(u, v) for u in a.vectors() for v in b.vectors()]
    if not a.exact or not b.exact:
        vecs = [np.asarray(v, dtype=float) for v in vecs]
        if not vecs:
            return Subspace(spec.dim, np.zeros((0, spec.dim)), False)
    return Subspace.span(vecs, spec.dim)


@dataclass
class CentralSeries:
    terms: list
    dims: list
    nilpotent: bool
    nilpotency_class: Optional[int]


def lower_central_series(spec: LieAlgebraSpec) -> CentralSeries:
    """g^1 = g, g^{k+1} = [g, g^k], until the dimension stops dropping."""
    whole = Subspace.whole(spec.dim)
    terms = [whole]
    while terms[-1].dim > 0:
        nxt = bracket_space(spec, whole, terms[-1])
        if nxt.dim == terms[-1].dim:
            terms.append(nxt)
            break
        terms.append(nxt)
    dims = [t.dim for t in terms]
    nilpotent = dims[-1] == 0
    return CentralSeries(terms, dims, nilpotent, len(dims) - 1 if nilpotent else None)


def nilpotent_shadow(spec: LieAlgebraSpec) -> Subspace:
    """Stable term of the lower central series: the kernel of the maximal nilpotent quotient."""
    return lower_central_series(spec).terms[-1]


def is_ideal(spec: LieAlgebraSpec, sub: Subspace) -> Optional[tuple]:
    """None if ``sub`` is an ideal, else a violating pair (basis index, vector)."""
    for i in range(spec.dim):
        e = spec.basis_vector(i)
        for v in sub.vectors():
            if not sub.contains(spec.bracket(e, v)):
                return i, v
    return None


def _reduce_mod(sub: Subspace, v: list) -> list:
    pivots = [next(c for c, x in enumerate(r) if x) for r in sub.basis]
    w = list(v)
    for row, p in zip(sub.basis, pivots):
        if w[p]:
            f = w[p]
            w = [a - f * b for a, b in zip(w, row)]
    return w


def _rational(x) -> Fraction:
    if hasattr(x, "is_rational"):
        if not x.is_rational():
            raise ValueError("quotient structure constants left Q; choose a rational ideal basis")
        return x.rational_part()
    return Fraction(x)


def quotient_algebra(spec: LieAlgebraSpec, ideal: Subspace) -> LieAlgebraSpec:
    """Structure constants of g / ideal on the complementary standard basis vectors."""
    if not ideal.exact:
        raise TypeError("quotients need an exact ideal")
    bad = is_ideal(spec, ideal)
    if bad is not None:
        i, v = bad
        raise NotAnIdealError(f"[{spec.labels[i]}, {v}] leaves the subspace")
    pivots = {next(c for c, x in enumerate(r) if x) for r in ideal.basis}
    keep = [i for i in range(spec.dim) if i not in pivots]
    m = len(keep)
    c = [[[Fraction(0)] * m for _ in range(m)] for _ in range(m)]
    for a, i in enumerate(keep):
        for b, j in enumerate(keep):
            w = _reduce_mod(ideal, spec.c[i][j])
            for d, k in enumerate(keep):
                c[a][b][d] = _rational(w[k])
    labels = tuple(spec.labels[i] for i in keep)
    return LieAlgebraSpec(m, c, labels, f"{spec.name}/ideal" if spec.name else "")


# -- subalgebra predicates ---------------------------------------------------


def is_subalgebra(spec: LieAlgebraSpec, sub: Subspace) -> bool:
    vs = sub.vectors()
    return all(sub.contains(spec.bracket(u, v)) for u in vs for v in vs)


def is_nilpotent_subalgebra(spec: LieAlgebraSpec, sub: Subspace) -> bool:
    term = sub
    for _ in range(sub.dim + 1):
        if term.dim == 0:
            return True
        nxt = bracket_space(spec, sub, term)
        if nxt.dim >= term.dim:
            return False
        term = nxt
    return term.dim == 0


def normalizer(spec: LieAlgebraSpec, sub: Subspace) -> Subspace:
    """{x : [x, s] in sub for every s in sub}."""
    n = spec.dim
    if sub.exact:
        rows = []
        for s in sub.vectors():
            # column i of ad(-s) is [e_i, s]
            cols = [_reduce_mod(sub, spec.bracket(spec.basis_vector(i), s)) for i in range(n)]
            rows.extend([cols[i][k] for i in range(n)] for k in range(n))
        rows = [r for r in rows if any(r)]
        return Subspace.span(exact.nullspace(rows, n) if rows else exact.identity(n), n)
    q = sub.as_float()
    proj = np.eye(n) - q.T @ q
    blocks = []
    for s in q:
        m = np.einsum("j,ijk->ki", s, spec.constants)
        blocks.append(proj @ m)
    if not blocks:
        return Subspace(n, np.eye(n), False)
    a = np.vstack(blocks)
    _, sv, vt = np.linalg.svd(a)
    sv = np.concatenate([sv, np.zeros(n - len(sv))])
    kernel = vt[sv <= sub.tol * 10]
    return Subspace.span(kernel if len(kernel) else np.zeros((0, n)), n)


# -- fixtures ----------------------------------------------------------------

FIXTURES = ("abelian3", "heisenberg", "filiform4", "aff1", "sl2", "so3")


def parse_algebra(text: str) -> LieAlgebraSpec:
    """Parse ``dim``, optional ``name``/``labels`` lines, then ``i j k value`` triples."""
    dim = None
    name = ""
    labels = None
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *rest = line.split()
        if key == "dim":
            dim = int(rest[0])
        elif key == "name":
            name = " ".join(rest)
        elif key == "labels":
            labels = tuple(rest)
        else:
            try:
                i, j, k = int(key), int(rest[0]), int(rest[1])
                entries[i, j, k] = Fraction(rest[2])
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {lineno}: expected 'i j k value', got {raw!r}") from exc
    if dim is None:
        raise ValueError("missing 'dim' line")
    c = [[[Fraction(0)] * dim for _ in range(dim)] for _ in range(dim)]
    for (i, j, k), v in entries.items():
        c[i][j][k] = v
        if (j, i, k) not in entries:
            c[j][i][k] = -v
    return LieAlgebraSpec(dim, c, labels, name)


def load_algebra(path) -> LieAlgebraSpec:
    return parse_algebra(Path(path).read_text())


def fixture(name: str) -> LieAlgebraSpec:
    text = resources.files("lielab").joinpath("fixtures", f"{name}.lie").read_text()
    return parse_algebra(text)


def abelian(n: int) -> LieAlgebraSpec:
    return LieAlgebraSpec.from_brackets(n, {}, name=f"R^{n}")


def dump_algebra(spec: LieAlgebraSpec) -> str:
    lines = [f"name {spec.name}" if spec.name else None, f"dim {spec.dim}", "labels " + " ".join(spec.labels)]
    out = [l for l in lines if l]
    for i in range(spec.dim):
        for j in range(spec.dim):
            for k in range(spec.dim):
                if spec.c[i][j][k] and i < j:
                    out.append(f"{i} {j} {k} {spec.c[i][j][k]}")
    return "\n".join(out) + "\n"


def ideal_generated(spec: LieAlgebraSpec, vectors) -> Subspace:
    """Smallest ideal containing the given vectors."""
    n = spec.dim
    sub = Subspace.span(vectors, n)
    basis = [spec.basis_vector(i) for i in range(n)]
    if not sub.exact:
        basis = [np.asarray(b, dtype=float) for b in basis]
    while True:
        vecs = sub.vectors() + [spec.bracket(e, v) for e in basis for v in sub.vectors()]
        if not sub.exact:
            vecs = [np.asarray(v, dtype=float) for v in vecs]
        nxt = Subspace.span(vecs, n)
        if nxt.dim == sub.dim:
            return sub
        sub = nxt
