"""Commutator dynamics, closure-dimension estimates and theorem trials.

Exact coordinate models get certified answers: density reduces to the
abelianization, and when the abelianized image is discrete the closure is
computed inside the abelian derived subgroup.  Float matrix models get a
word search: reduced words that land near the identity contribute their
logarithms, and the span is saturated under brackets and Ad(g_i).
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import exact, lie
from .abelian import DensityVerdict, closed_subgroup, decide_density
from .adjoint import is_regular
from .field import ONE, ZERO
from .models import (
    ChartError,
    CoordinateModel,
    GroupElement,
    GroupModel,
    NeighbourhoodSpec,
    Torus,
    get_model,
)

log = logging.getLogger(__name__)

EPS_ID = 1e-9
MAX_ITER = 200
WORD_LENGTH = 12
CHART_RADIUS = 0.2
SUBSPACE_TOL = 1e-8
MAX_WORDS = 20_000
ROUND_DIGITS = 12
DIVERGED = 1e4  # distances beyond this count as escaped
SPOT_CHECK_SEED = 20_240_101

CERTIFIED = "certified"
STATISTICAL = "statistical"
NOT_DENSE = "false"


@dataclass
class ConvergenceReport:
    iterates: int
    final_distance: float
    converged: bool
    trajectory: list

    def to_json(self) -> dict:
        return {
            "iterates": self.iterates,
            "final_distance": self.final_distance,
            "converged": self.converged,
            "trajectory": self.trajectory,
        }


def commutator_orbit(
    model: GroupModel,
    g: GroupElement,
    x: GroupElement,
    max_iter: int = MAX_ITER,
    eps_id: float = EPS_ID,
) -> ConvergenceReport:
    """Iterate x <- g x g^-1 x^-1 until x reaches the identity or max_iter runs out."""
    if eps_id <= 0:
        raise ValueError("eps_id must be positive")
    model._check(g, x)
    traj = []
    dist = model.distance(x)
    for k in range(1, max_iter + 1):
        x = model.commutator(g, x)
        dist = model.distance(x)
        traj.append(dist)
        if model.exact:
            if model.is_identity(x):
                return ConvergenceReport(k, 0.0, True, traj)
        elif dist < eps_id:
            return ConvergenceReport(k, dist, True, traj)
        if not np.isfinite(dist) or dist > DIVERGED:
            break
    return ConvergenceReport(len(traj), dist, False, traj)


def batch_orbits_converge(
    model: GroupModel,
    gs: np.ndarray,
    xs: np.ndarray,
    max_iter: int = MAX_ITER,
    eps_id: float = EPS_ID,
) -> np.ndarray:
    """Vectorized commutator_orbit for stacks of float matrices; returns the converged mask."""
    ginv = np.linalg.inv(gs)
    x = xs.copy()
    eye = np.eye(gs.shape[-1])
    done = np.zeros(len(gs), dtype=bool)
    alive = np.ones(len(gs), dtype=bool)
    for _ in range(max_iter):
        xinv = np.linalg.inv(x)
        x = gs @ x @ ginv @ xinv
        dist = np.linalg.norm(x - eye, ord=2, axis=(1, 2))
        done |= alive & (dist < eps_id)
        alive &= ~done & np.isfinite(dist) & (dist < DIVERGED)
        if not alive.any():
            break
        # freeze finished entries so they cannot blow up later
        x[~alive] = eye
    return done


def _neighbourhood(model: GroupModel, r: float) -> NeighbourhoodSpec:
    if model.exact:
        return NeighbourhoodSpec(model.name, "box", (r,) * model.dim)
    return NeighbourhoodSpec(model.name, "ball", (r,))


def z_check(
    model: GroupModel,
    W: NeighbourhoodSpec,
    pairs: int,
    seed=0,
    max_iter: int = MAX_ITER,
    eps_id: float = EPS_ID,
) -> bool:
    """Do all sampled pairs (g, x) in W have commutator orbits reaching e?"""
    rng = np.random.default_rng(seed)
    samples = [(model.haar_sample(W, rng), model.haar_sample(W, rng)) for _ in range(pairs)]
    if model.exact:
        return all(commutator_orbit(model, g, x, max_iter, eps_id).converged for g, x in samples)
    gs = np.array([g.data for g, _ in samples])
    xs = np.array([x.data for _, x in samples])
    return bool(batch_orbits_converge(model, gs, xs, max_iter, eps_id).all())


class BudgetExhaustedError(RuntimeError):
    pass


def estimate_z_radius(
    model: GroupModel,
    budget: int = 1000,
    max_iter: int = MAX_ITER,
    eps_id: float = EPS_ID,
    lo: float = 0.02,
    hi: float = 1.0,
    steps: int = 8,
    seed=0,
) -> float:
    """Largest radius on a bisection grid in [lo, hi] whose sampled pairs all converge.

    Every radius is tested with the same seed; the returned value always passed.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")

    def ok(r):
        return z_check(model, _neighbourhood(model, r), budget, seed, max_iter, eps_id)

    if ok(hi):
        return hi
    if not ok(lo):
        raise BudgetExhaustedError(f"even radius {lo} has non-converging pairs in {model.name}")
    for _ in range(steps):
        mid = (lo + hi) / 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# -- closure reports --------------------------------------------------------------


@dataclass
class ClosureReport:
    model: str
    dimension: int
    dense: str
    discrete: bool
    discrete_certified: bool
    algebra: lie.Subspace
    method: str
    evidence: dict = field(default_factory=dict)
    abelianization: Optional[DensityVerdict] = None

    @property
    def neither_dense_nor_discrete(self) -> bool:
        return self.dense == NOT_DENSE and not self.discrete

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "dimension": self.dimension,
            "dense": self.dense,
            "discrete": self.discrete,
            "discrete_certified": self.discrete_certified,
            "method": self.method,
            "algebra": self.algebra.to_json(),
            "evidence": self.evidence,
            "abelianization": self.abelianization.to_json() if self.abelianization else None,
        }


def _signed(i: int, inverse: bool = False) -> int:
    return -(i + 1) if inverse else i + 1


def _power_word(rel: Sequence[int]) -> list:
    word = []
    for i, m in enumerate(rel):
        word.extend([_signed(i, m < 0)] * abs(m))
    return word


def _eval_word(model: GroupModel, gens: Sequence[GroupElement], word: Sequence[int]) -> GroupElement:
    out = model.identity()
    invs = {}
    for s in word:
        i = abs(s) - 1
        if s > 0:
            out = model.multiply(out, gens[i])
        else:
            if i not in invs:
                invs[i] = model.invert(gens[i])
            out = model.multiply(out, invs[i])
    return out


def abelianization_images(model: CoordinateModel, gens: Sequence[GroupElement]) -> list:
    imgs = [tuple(model.abelianization(g)) for g in gens]
    if isinstance(model, Torus):
        # lift to R^n: the torus subgroup is dense iff lifts plus Z^n are dense
        n = model.dim
        imgs += [tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n)]
    return imgs


def _derived_module(model: CoordinateModel, gens, seeds: list) -> list:
    """Z-module generators of the normal closure of ``seeds`` inside the abelian group G'."""
    out = []
    seen = set()
    queue = [tuple(model.derived_coords(s)) for s in seeds]
    invs = [model.invert(g) for g in gens]
    while queue:
        v = queue.pop()
        if not any(v) or v in seen:
            continue
        seen.add(v)
        out.append(v)
        elem = model.from_derived(v)
        for g, ginv in zip(gens, invs):
            w = tuple(model.derived_coords(model.multiply(model.multiply(g, elem), ginv)))
            diff = tuple(a - b for a, b in zip(w, v))
            if any(diff):
                queue.append(diff)
    return out


def _exact_closure(model: CoordinateModel, gens: Sequence[GroupElement]) -> Optional[ClosureReport]:
    n = model.dim
    imgs = abelianization_images(model, gens)
    verdict = decide_density(imgs)
    top = closed_subgroup(imgs)
    d = len(imgs[0])
    if top.dense:
        return ClosureReport(
            model.name, n, CERTIFIED, False, True, lie.Subspace.whole(n), "exact-abelianization",
            {"words": [[_signed(i)] for i in range(len(gens))]}, verdict,
        )
    if model.abelian:
        algebra = lie.Subspace.span([list(v) for v in top.component], n)
        return ClosureReport(
            model.name, top.dimension, NOT_DENSE, top.dimension == 0, top.dimension == 0,
            algebra, "exact-abelian", {"words": [[_signed(i)] for i in range(len(gens))]}, verdict,
        )
    if top.dimension > 0:
        # partially dense abelianization: no exact procedure, fall back to words
        return None
    words = []
    seeds = []
    for i, j in itertools.combinations(range(len(gens)), 2):
        words.append([_signed(i), _signed(j), _signed(i, True), _signed(j, True)])
        seeds.append(model.commutator(gens[i], gens[j]))
    for rel in exact.integer_kernel(imgs):
        w = _power_word(rel)
        words.append(w)
        seeds.append(_eval_word(model, gens, w))
    module = _derived_module(model, gens, seeds)
    m = n - d
    if module:
        inner = closed_subgroup(module)
        dim = inner.dimension
        component = [[ZERO] * d + list(v) for v in inner.component]
    else:
        dim = 0
        component = []
    algebra = lie.Subspace.span(component, n) if component else lie.Subspace.zero(n)
    return ClosureReport(
        model.name, dim, NOT_DENSE, dim == 0, dim == 0, algebra, "exact-derived",
        {"words": words, "derived_generators": [[x.to_string() for x in v] for v in module],
         "derived_dim": m},
        verdict,
    )


def _word_search(model: GroupModel, gens, L: int, rho: float, max_words: int):
    mats = [model.float_matrix(g) for g in gens]
    size = mats[0].shape[0]
    eye = np.eye(size)
    letters = []
    labels = []
    for i, m in enumerate(mats):
        letters += [m, np.linalg.inv(m)]
        labels += [i + 1, -(i + 1)]
    letters = np.array(letters)
    labels = np.array(labels)
    inverse_letter = np.arange(len(labels)) ^ 1
    seen = set()
    near = []
    explored = 0
    truncated = False
    elems = np.array([eye])
    last = np.array([-1])
    words = np.zeros((1, 0), dtype=np.int64)
    for length in range(1, L + 1):
        prod = np.einsum("mij,ljk->mlik", elems, letters)
        ok = last[:, None] != inverse_letter[None, :]
        mi, li = np.nonzero(ok)
        cand = prod[mi, li]
        cand_words = np.column_stack([words[mi], li])
        keys = np.round(cand.reshape(len(cand), -1), ROUND_DIGITS)
        keep = []
        for idx, key in enumerate(keys):
            b = key.tobytes()
            if b in seen:
                continue
            seen.add(b)
            keep.append(idx)
            if explored + len(keep) >= max_words:
                truncated = True
                break
        keep = np.array(keep, dtype=np.int64)
        if len(keep) == 0:
            break
        elems, last, words = cand[keep], li[keep], cand_words[keep]
        explored += len(keep)
        dist = np.linalg.norm(elems - eye, ord=2, axis=(1, 2))
        for idx in np.flatnonzero((dist < rho) & (dist > EPS_ID)):
            near.append((labels[words[idx]].tolist(), elems[idx]))
        if truncated:
            break
    return near, explored, truncated


def saturate(
    spec: lie.LieAlgebraSpec, vectors, ads: Sequence[np.ndarray], tol: float = SUBSPACE_TOL
) -> np.ndarray:
    """Smallest subspace containing ``vectors`` closed under brackets and the maps in ``ads``."""
    n = spec.dim
    q = lie._orthonormal_rows(np.asarray(vectors, dtype=float).reshape(-1, n), n, tol)
    while True:
        cand = [q]
        if len(q):
            cand.append(np.einsum("ai,bj,ijk->abk", q, q, spec.constants).reshape(-1, n))
            cand.extend(q @ a.T for a in ads)
        new = lie._orthonormal_rows(np.vstack(cand), n, tol)
        if new.shape[0] == q.shape[0]:
            return new
        q = new


def _subset_algebras(model: CoordinateModel, gens) -> list:
    """Exact closure algebras of generator subsets; each lies in the algebra of the full closure."""
    out = []
    for size in range(1, len(gens)):
        for sub in itertools.combinations(gens, size):
            rep = _exact_closure(model, list(sub))
            if rep is not None and rep.dimension:
                out.extend(rep.algebra.as_float())
    return out


def _word_closure(model: GroupModel, gens, L: int, rho: float, eps: float, max_words: int,
                  verdict: Optional[DensityVerdict] = None, seeds=()) -> ClosureReport:
    near, explored, truncated = _word_search(model, gens, L, rho, max_words)
    logs = list(seeds)
    skipped = 0
    for _, m in near:
        try:
            logs.append(model.log_from_matrix(m))
        except ChartError:
            skipped += 1
    ads = []
    for g in gens:
        a = np.array([[float(x) for x in row] for row in model.adjoint_matrix(g)], dtype=float)
        ads += [a, np.linalg.inv(a)]
    n = model.dim
    q = saturate(model.algebra, logs, ads, eps) if logs else np.zeros((0, n))
    dim = q.shape[0]
    algebra = lie.Subspace(n, q, False, eps)
    return ClosureReport(
        model.name, dim, STATISTICAL if dim == n else NOT_DENSE, not near and dim == 0, False, algebra, "words",
        {
            "words": [w for w, _ in near[:50]],
            "near_identity_words": len(near),
            "words_explored": explored,
            "truncated": truncated,
            "chart_failures": skipped,
            "subset_vectors": len(seeds),
        },
        verdict,
    )


def closure_dimension(
    model: GroupModel,
    gens: Sequence[GroupElement],
    word_length: int = WORD_LENGTH,
    chart_radius: float = CHART_RADIUS,
    eps: float = SUBSPACE_TOL,
    max_words: int = MAX_WORDS,
) -> ClosureReport:
    """Estimate the dimension of the identity component of the closure of <gens>."""
    if not gens:
        raise ValueError("need at least one generator")
    model._check(*gens)
    if isinstance(model, CoordinateModel):
        report = _exact_closure(model, gens)
        if report is not None:
            return report
        verdict = decide_density(abelianization_images(model, gens))
        seeds = _subset_algebras(model, gens)
        return _word_closure(model, gens, word_length, chart_radius, eps, max_words, verdict, seeds)
    return _word_closure(model, gens, word_length, chart_radius, eps, max_words)


@dataclass
class NilpotentDensity:
    dense: bool
    certificate: DensityVerdict


def nilpotent_density_check(model: GroupModel, gens: Sequence[GroupElement]) -> NilpotentDensity:
    """Dense in G iff the image in G/G' is dense; decided exactly on the abelianization."""
    if not (isinstance(model, CoordinateModel) and model.nilpotent):
        raise TypeError(f"{model.name} is not an exact nilpotent model")
    model._check(*gens)
    verdict = decide_density(abelianization_images(model, gens))
    return NilpotentDensity(verdict.dense, verdict)


# -- theorem trials -------------------------------------------------------------------


@dataclass
class TrialResult:
    seed: object
    model: str
    gens: list
    regular: list
    report: ClosureReport

    @property
    def all_regular(self) -> bool:
        return all(self.regular)

    def record(self) -> dict:
        return {
            "seed": self.seed,
            "model": self.model,
            "all_regular": self.all_regular,
            "regular_count": int(sum(self.regular)),
            "dim": self.report.dimension,
            "dense": self.report.dense,
            "discrete": self.report.discrete,
        }

    def to_json(self) -> dict:
        out = self.record()
        out["gens"] = [g.to_json() for g in self.gens]
        out["report"] = self.report.to_json()
        return out


@lru_cache(maxsize=64)
def verified_z_neighbourhood(model_name: str, W: NeighbourhoodSpec, pairs: int = 200) -> bool:
    model = get_model(model_name)
    if model.nilpotent:
        # commutator iterates descend the lower central series and reach e exactly
        return True
    return z_check(model, W, pairs, seed=SPOT_CHECK_SEED)


def theorem_trial(
    model: GroupModel,
    W: NeighbourhoodSpec,
    seed,
    word_length: int = WORD_LENGTH,
    chart_radius: float = CHART_RADIUS,
    eps: float = SUBSPACE_TOL,
    max_words: int = MAX_WORDS,
) -> TrialResult:
    """Draw dim + 1 Haar elements of W and report on the subgroup they generate."""
    if not verified_z_neighbourhood(model.name, W):
        raise ValueError(f"{W} failed the Z-neighbourhood spot check")
    rng = np.random.default_rng(seed)
    gens = [model.haar_sample(W, rng) for _ in range(model.dim + 1)]
    regular = [is_regular(model, g).regular for g in gens]
    report = closure_dimension(model, gens, word_length, chart_radius, eps, max_words)
    return TrialResult(seed, model.name, gens, regular, report)
