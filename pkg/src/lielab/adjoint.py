"""Adjoint action, regular elements and Cartan subalgebras of the group models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import exact, lie
from .field import ONE
from .models import GroupElement, GroupModel, InvalidElementError, NeighbourhoodSpec

# eigenvalues of Ad(g) within this distance of 1 count towards the multiplicity
EIG_TOL = 1e-6
KERNEL_TOL = 1e-8


class NotRegularError(ValueError):
    pass


def adjoint(model: GroupModel, g: GroupElement):
    """Matrix of Ad(g) on the model's algebra basis (exact lists or a float array)."""
    model._check(g)
    if not model.exact:
        # reject matrices that drifted off the group
        model.element(g.data)
    return model.adjoint_matrix(g)


def _minus_identity(a):
    return [[x - ONE if i == j else x for j, x in enumerate(row)] for i, row in enumerate(a)]


def multiplicity_of_one(model: GroupModel, g: GroupElement) -> int:
    """Algebraic multiplicity of 1 as a root of the characteristic polynomial of Ad(g)."""
    ad = adjoint(model, g)
    n = model.dim
    if model.exact:
        m = _minus_identity(ad)
        # kernel of (Ad - 1)^k stabilizes once k >= n; square until it does
        p, k = m, 1
        while k < n:
            p, k = exact.matmul(p, p), 2 * k
        return n - exact.rank(p)
    eig = np.linalg.eigvals(ad)
    return int(np.sum(np.abs(eig - 1.0) < EIG_TOL))


@dataclass(frozen=True)
class Regularity:
    regular: bool
    multiplicity: int

    def __bool__(self):
        return self.regular


def is_regular(model: GroupModel, g: GroupElement) -> Regularity:
    mult = multiplicity_of_one(model, g)
    return Regularity(mult == model.generic_multiplicity, mult)


def estimate_generic_multiplicity(
    model: GroupModel, W: NeighbourhoodSpec, rng: np.random.Generator, samples: int = 10_000
) -> int:
    """Minimum multiplicity of eigenvalue 1 over a Haar draw from W."""
    return min(multiplicity_of_one(model, model.haar_sample(W, rng)) for _ in range(samples))


def cartan_of_regular(model: GroupModel, g: GroupElement) -> lie.Subspace:
    """Generalized eigenspace of Ad(g) at eigenvalue 1, checked to be a Cartan subalgebra."""
    reg = is_regular(model, g)
    if not reg.regular:
        raise NotRegularError(
            f"multiplicity {reg.multiplicity} exceeds the generic value {model.generic_multiplicity}"
        )
    ad = adjoint(model, g)
    n = model.dim
    if model.exact:
        m = _minus_identity(ad)
        p = m
        for _ in range(n - 1):
            p = exact.matmul(p, m)
        rows = [r for r in p if any(r)]
        kernel = exact.nullspace(rows, n) if rows else exact.identity(n)
        sub = lie.Subspace.span(kernel, n)
    else:
        # the Jordan index is at most the multiplicity, so this power already kills the block
        p = np.linalg.matrix_power(np.asarray(ad) - np.eye(n), reg.multiplicity)
        _, s, vt = np.linalg.svd(p)
        sub = lie.Subspace.span(vt[s < KERNEL_TOL], n)
    spec = model.algebra
    if not (
        lie.is_subalgebra(spec, sub)
        and lie.is_nilpotent_subalgebra(spec, sub)
        and lie.normalizer(spec, sub) == sub
    ):
        raise RuntimeError(f"eigenvalue-1 space of Ad(g) in {model.name} is not a Cartan subalgebra")
    return sub
