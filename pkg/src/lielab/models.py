"""Concrete connected Lie groups: group law, charts, adjoint action, Haar sampling.

Coordinate models (Euclidean, Torus, Heisenberg, Filiform4) run on exact
:class:`~lielab.field.FieldElement` coordinates.  Matrix models (SL2R, SO3)
are float only, since their entries are transcendental in general.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import exact, lie
from .field import FieldElement, ONE, ZERO, to_float

HALF = Fraction(1, 2)
GRID = 2**16  # denominator of the rational sampling grid
PERTURB = Fraction(1, 64)  # size of the irrational part relative to the box half-width


class ModelMismatchError(TypeError):
    pass


class ChartError(ValueError):
    pass


class InvalidElementError(ValueError):
    pass


class SamplerError(RuntimeError):
    def __init__(self, message, proposals=0, accepted=0):
        super().__init__(f"{message} (proposals={proposals}, accepted={accepted})")
        self.proposals = proposals
        self.accepted = accepted


@dataclass(frozen=True)
class NeighbourhoodSpec:
    """Relatively compact neighbourhood of the identity.

    ``chart`` is ``"box"`` (coordinate half-widths, one per dimension) or
    ``"ball"`` (radius of a ball in the exponential chart).
    """

    model: str
    chart: str
    radius: tuple

    def __post_init__(self):
        if self.chart not in ("box", "ball"):
            raise ValueError(f"unknown chart kind {self.chart!r}")
        if not self.radius or any(not (0 < float(r) < math.inf) for r in self.radius):
            raise ValueError("radii must be positive and finite")

    def to_json(self) -> dict:
        return {"model": self.model, "chart": self.chart, "radius": [str(r) for r in self.radius]}

    @classmethod
    def from_json(cls, d: dict) -> "NeighbourhoodSpec":
        return cls(d["model"], d["chart"], tuple(_number(r) for r in d["radius"]))


def _number(r):
    if isinstance(r, str):
        try:
            return Fraction(r)
        except ValueError:
            return float(r)
    return r


class GroupElement:
    """An element of a :class:`GroupModel`; immutable."""

    __slots__ = ("model", "data")

    def __init__(self, model: "GroupModel", data):
        self.model = model
        if isinstance(data, np.ndarray):
            data = np.array(data, dtype=float)
            data.setflags(write=False)
        else:
            data = tuple(data)
        self.data = data

    def __mul__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.model.multiply(self, other)

    def inverse(self) -> "GroupElement":
        return self.model.invert(self)

    def __eq__(self, other):
        if not isinstance(other, GroupElement) or other.model.name != self.model.name:
            return NotImplemented
        if isinstance(self.data, np.ndarray):
            return bool(np.array_equal(self.data, other.data))
        return self.data == other.data

    def __hash__(self):
        if isinstance(self.data, np.ndarray):
            return hash((self.model.name, self.data.tobytes()))
        return hash((self.model.name, self.data))

    def allclose(self, other: "GroupElement", tol: float = 1e-9) -> bool:
        a = np.asarray(self.model.float_coords(self))
        b = np.asarray(other.model.float_coords(other))
        return bool(np.max(np.abs(a - b)) <= tol)

    def to_json(self):
        if isinstance(self.data, np.ndarray):
            return {"model": self.model.name, "matrix": self.data.tolist()}
        return {"model": self.model.name, "coords": [x.to_string() for x in self.data]}

    def __repr__(self):
        if isinstance(self.data, np.ndarray):
            return f"GroupElement({self.model.name}, {self.data.tolist()})"
        return f"GroupElement({self.model.name}, ({', '.join(str(x) for x in self.data)}))"


def _exact(x):
    if isinstance(x, FieldElement):
        return x
    if isinstance(x, str):
        return FieldElement.parse(x)
    return FieldElement.from_rational(Fraction(x))


class GroupModel:
    name: str
    dim: int
    algebra: lie.LieAlgebraSpec
    exact: bool = True
    nilpotent: bool = True
    abelian: bool = False
    # largest exponential-chart radius on which log_chart is defined
    injectivity_radius: float = math.inf
    # minimal multiplicity of eigenvalue 1 of Ad(g), frozen from a 10^4-sample draw
    generic_multiplicity: int = 0

    # -- elements ---------------------------------------------------------

    def _check(self, *elems):
        for e in elems:
            if not isinstance(e, GroupElement) or e.model.name != self.name:
                got = e.model.name if isinstance(e, GroupElement) else type(e).__name__
                raise ModelMismatchError(f"expected an element of {self.name}, got {got}")

    def element(self, payload) -> GroupElement:
        raise NotImplementedError

    def identity(self) -> GroupElement:
        raise NotImplementedError

    def multiply(self, a: GroupElement, b: GroupElement) -> GroupElement:
        raise NotImplementedError

    def invert(self, a: GroupElement) -> GroupElement:
        raise NotImplementedError

    def exp_chart(self, v) -> GroupElement:
        raise NotImplementedError

    def log_chart(self, g: GroupElement) -> list:
        raise NotImplementedError

    def adjoint_matrix(self, g: GroupElement):
        raise NotImplementedError

    def distance(self, g: GroupElement) -> float:
        """Distance of g from the identity."""
        raise NotImplementedError

    def is_identity(self, g: GroupElement, tol: float = 0.0) -> bool:
        if self.exact:
            return g == self.identity()
        return self.distance(g) <= tol

    def float_coords(self, g: GroupElement) -> np.ndarray:
        if isinstance(g.data, np.ndarray):
            return g.data.ravel()
        return np.array([to_float(x) for x in g.data])

    def float_matrix(self, g: GroupElement) -> np.ndarray:
        """Faithful float matrix representation (used by word searches)."""
        raise NotImplementedError(f"{self.name} has no matrix representation")

    def log_from_matrix(self, m: np.ndarray) -> np.ndarray:
        raise NotImplementedError(f"{self.name} has no matrix representation")

    def default_neighbourhood(self) -> NeighbourhoodSpec:
        return NeighbourhoodSpec(self.name, "box", (Fraction(1),) * self.dim)

    def haar_sample(self, W: NeighbourhoodSpec, rng: np.random.Generator) -> GroupElement:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"

    def commutator(self, g: GroupElement, h: GroupElement) -> GroupElement:
        """zeta_g(h) = g h g^-1 h^-1."""
        self._check(g, h)
        return self.multiply(self.multiply(self.multiply(g, h), self.invert(g)), self.invert(h))

    def element_from_json(self, d: dict) -> GroupElement:
        if "matrix" in d:
            return self.element(np.array(d["matrix"], dtype=float))
        return self.element([FieldElement.parse(x) for x in d["coords"]])


def commutator_map(g: GroupElement, h: GroupElement) -> GroupElement:
    if g.model.name != h.model.name:
        raise ModelMismatchError(f"{g.model.name} vs {h.model.name}")
    return g.model.commutator(g, h)


def multiply(a: GroupElement, b: GroupElement) -> GroupElement:
    return a.model.multiply(a, b)


def invert(a: GroupElement) -> GroupElement:
    return a.model.invert(a)


def haar_sample(model: GroupModel, W: NeighbourhoodSpec, rng: np.random.Generator) -> GroupElement:
    if W.model != model.name:
        raise ModelMismatchError(f"neighbourhood for {W.model} used with {model.name}")
    return model.haar_sample(W, rng)


# -- exact sampling -----------------------------------------------------------


def exact_uniform(rng: np.random.Generator, lo, hi, budget: int = 1000) -> FieldElement:
    """Random q0 + q1 sqrt2 + q2 sqrt3 + q3 sqrt5, uniform on [lo, hi] up to a 2^-16 grid.

    The irrational part is a small perturbation of size below span/8.  q0 is
    drawn on [lo - span/8, hi + span/8], so after rejecting points outside
    [lo, hi] the law is flat there; every coordinate is irrational with
    overwhelming probability.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    span = hi - lo
    # integer numerators over the common denominator d_lo * d_span * GRID * 64
    p1, d1, p2, d2 = lo.numerator, lo.denominator, span.numerator, span.denominator
    scale = PERTURB.denominator
    den = d1 * d2 * GRID * scale
    flo, fhi = float(lo), float(hi)
    for _ in range(budget):
        k = rng.integers(0, GRID + 1, size=4)
        # lo - span/8 + k * (5/4) span / GRID
        num0 = p1 * d2 * GRID * scale - p2 * d1 * GRID * (scale // 8) + p2 * d1 * int(k[0]) * (scale * 5 // 4)
        # perturbation (2j - GRID)/GRID * span/64 per radical, uniform on [-span/64, span/64]
        pert = tuple(p2 * d1 * (2 * int(j) - GRID) for j in k[1:])
        x = FieldElement._raw((num0,) + pert + (0, 0, 0, 0), den)
        if flo <= to_float(x) <= fhi:
            return x
    raise SamplerError("exact uniform sampler exhausted its budget", budget, 0)


def _box_sample(model: GroupModel, W: NeighbourhoodSpec, rng) -> tuple:
    if W.chart != "box":
        raise ValueError(f"{model.name} samples from coordinate boxes")
    widths = W.radius if len(W.radius) == model.dim else W.radius * model.dim
    return tuple(exact_uniform(rng, -Fraction(w), Fraction(w)) for w in widths)


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


# -- coordinate models ---------------------------------------------------------


class CoordinateModel(GroupModel):
    exact = True

    def element(self, payload) -> GroupElement:
        coords = tuple(_exact(x) for x in payload)
        if len(coords) != self.dim:
            raise InvalidElementError(f"{self.name} elements have {self.dim} coordinates")
        return GroupElement(self, self._normalize(coords))

    def _normalize(self, coords):
        return coords

    def identity(self) -> GroupElement:
        return GroupElement(self, (ZERO,) * self.dim)

    def distance(self, g: GroupElement) -> float:
        return float(np.linalg.norm(self.float_coords(g)))

    def haar_sample(self, W, rng):
        coords = _box_sample(self, W, rng)
        return GroupElement(self, self._normalize(coords))

    # nilpotent reduction hooks: coordinates of G/G' and of the abelian group G'
    def abelianization(self, g: GroupElement) -> tuple:
        raise NotImplementedError

    def derived_coords(self, g: GroupElement) -> tuple:
        raise NotImplementedError

    def from_derived(self, v: Sequence) -> GroupElement:
        raise NotImplementedError

    @property
    def abelianization_dim(self) -> int:
        return len(self.abelianization(self.identity()))


class Euclidean(CoordinateModel):
    abelian = True

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("dimension must be positive")
        self.dim = n
        self.name = f"euclidean{n}"
        self.algebra = lie.abelian(n)
        self.generic_multiplicity = n

    def multiply(self, a, b):
        self._check(a, b)
        return GroupElement(self, tuple(x + y for x, y in zip(a.data, b.data)))

    def invert(self, a):
        self._check(a)
        return GroupElement(self, tuple(-x for x in a.data))

    def exp_chart(self, v):
        return self.element(v)

    def log_chart(self, g):
        self._check(g)
        return list(g.data)

    def adjoint_matrix(self, g):
        self._check(g)
        return _exact_identity(self.dim)

    def float_matrix(self, g):
        m = np.eye(self.dim + 1)
        m[:-1, -1] = self.float_coords(g)
        return m

    def log_from_matrix(self, m):
        return np.array(m[:-1, -1])

    def abelianization(self, g):
        return g.data

    def derived_coords(self, g):
        return ()

    def from_derived(self, v):
        return self.identity()


class Torus(CoordinateModel):
    """R^n / Z^n with coordinates in [0, 1)."""

    abelian = True
    injectivity_radius = 0.5

    def __init__(self, n: int):
        self.dim = n
        self.name = f"torus{n}"
        self.algebra = lie.abelian(n)
        self.generic_multiplicity = n

    def _normalize(self, coords):
        return tuple(_frac_part(x) for x in coords)

    def multiply(self, a, b):
        self._check(a, b)
        return GroupElement(self, self._normalize(tuple(x + y for x, y in zip(a.data, b.data))))

    def invert(self, a):
        self._check(a)
        return GroupElement(self, self._normalize(tuple(-x for x in a.data)))

    def exp_chart(self, v):
        return self.element(v)

    def log_chart(self, g):
        self._check(g)
        out = []
        for x in g.data:
            y = x - 1 if x > HALF else x
            if y == HALF or y == -HALF:
                raise ChartError("point on the cut locus of the torus chart")
            out.append(y)
        return out

    def distance(self, g):
        return float(np.linalg.norm([to_float(x) for x in self.log_chart(g)]))

    def adjoint_matrix(self, g):
        self._check(g)
        return _exact_identity(self.dim)

    def default_neighbourhood(self):
        return NeighbourhoodSpec(self.name, "box", (HALF,) * self.dim)

    def abelianization(self, g):
        return g.data

    def derived_coords(self, g):
        return ()

    def from_derived(self, v):
        return self.identity()


def _frac_part(x):
    if isinstance(x, FieldElement):
        return x - x.floor()
    return x - math.floor(x)


class UnipotentModel(CoordinateModel):
    """Simply connected nilpotent group embedded in unipotent upper triangular matrices."""

    def _group_matrix(self, c):
        raise NotImplementedError

    def _algebra_matrix(self, v):
        raise NotImplementedError

    def _read_algebra(self, m) -> list:
        raise NotImplementedError

    def adjoint_matrix(self, g):
        self._check(g)
        m = self._group_matrix(g.data)
        minv = self._group_matrix(self.invert(g).data)
        cols = []
        for k in range(self.dim):
            e = [ONE if i == k else ZERO for i in range(self.dim)]
            x = _mm(_mm(m, self._algebra_matrix(e)), minv)
            cols.append(self._read_algebra(x))
        return [[cols[j][i] for j in range(self.dim)] for i in range(self.dim)]

    def float_matrix(self, g):
        return np.array([[to_float(x) for x in row] for row in self._group_matrix(g.data)], dtype=float)


def _mm(a, b):
    return exact.matmul(a, b, ZERO)


def _exact_identity(n):
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


class Heisenberg(UnipotentModel):
    """(a1,b1,c1)(a2,b2,c2) = (a1+a2, b1+b2, c1+c2+a1 b2)."""

    def __init__(self):
        self.dim = 3
        self.name = "heisenberg"
        self.algebra = lie.fixture("heisenberg")
        self.generic_multiplicity = 3

    def multiply(self, x, y):
        self._check(x, y)
        a1, b1, c1 = x.data
        a2, b2, c2 = y.data
        return GroupElement(self, (a1 + a2, b1 + b2, c1 + c2 + a1 * b2))

    def invert(self, x):
        self._check(x)
        a, b, c = x.data
        return GroupElement(self, (-a, -b, a * b - c))

    def exp_chart(self, v):
        a, b, c = (_exact(x) for x in v)
        return GroupElement(self, (a, b, c + a * b * HALF))

    def log_chart(self, g):
        self._check(g)
        a, b, c = g.data
        return [a, b, c - a * b * HALF]

    def _group_matrix(self, c):
        a, b, cc = c
        return [[ONE, a, cc], [ZERO, ONE, b], [ZERO, ZERO, ONE]]

    def _algebra_matrix(self, v):
        a, b, c = v
        return [[ZERO, a, c], [ZERO, ZERO, b], [ZERO, ZERO, ZERO]]

    def _read_algebra(self, m):
        return [m[0][1], m[1][2], m[0][2]]

    def log_from_matrix(self, m):
        a, b, c = m[0, 1], m[1, 2], m[0, 2]
        return np.array([a, b, c - a * b / 2])

    def abelianization(self, g):
        return g.data[:2]

    def derived_coords(self, g):
        return g.data[2:]

    def from_derived(self, v):
        return GroupElement(self, (ZERO, ZERO, _exact(v[0])))


class Filiform4(UnipotentModel):
    """R^4 with (a1,b1,c1,d1)(a2,b2,c2,d2) =
    (a1+a2, b1+b2, c1+c2+a1 b2, d1+d2+a1 c2+a1^2 b2/2).

    Algebra <A,B,C,D> with [A,B] = C, [A,C] = D.
    """

    def __init__(self):
        self.dim = 4
        self.name = "filiform4"
        self.algebra = lie.fixture("filiform4")
        self.generic_multiplicity = 4

    def multiply(self, x, y):
        self._check(x, y)
        a1, b1, c1, d1 = x.data
        a2, b2, c2, d2 = y.data
        return GroupElement(
            self,
            (a1 + a2, b1 + b2, c1 + c2 + a1 * b2, d1 + d2 + a1 * c2 + a1 * a1 * b2 * HALF),
        )

    def invert(self, x):
        self._check(x)
        a, b, c, d = x.data
        return GroupElement(self, (-a, -b, a * b - c, -d + a * c - a * a * b * HALF))

    def exp_chart(self, v):
        a, b, c, d = (_exact(x) for x in v)
        return GroupElement(
            self, (a, b, c + a * b * HALF, d + a * c * HALF + a * a * b * Fraction(1, 6))
        )

    def log_chart(self, g):
        self._check(g)
        a, b, c1, d1 = g.data
        c = c1 - a * b * HALF
        return [a, b, c, d1 - a * c * HALF - a * a * b * Fraction(1, 6)]

    def _group_matrix(self, c):
        a, b, cc, d = c
        return [
            [ONE, a, a * a * HALF, d],
            [ZERO, ONE, a, cc],
            [ZERO, ZERO, ONE, b],
            [ZERO, ZERO, ZERO, ONE],
        ]

    def _algebra_matrix(self, v):
        a, b, c, d = v
        return [
            [ZERO, a, ZERO, d],
            [ZERO, ZERO, a, c],
            [ZERO, ZERO, ZERO, b],
            [ZERO, ZERO, ZERO, ZERO],
        ]

    def _read_algebra(self, m):
        return [m[0][1], m[2][3], m[1][3], m[0][3]]

    def log_from_matrix(self, m):
        a, b, c1, d1 = m[0, 1], m[2, 3], m[1, 3], m[0, 3]
        c = c1 - a * b / 2
        return np.array([a, b, c, d1 - a * c / 2 - a * a * b / 6])

    def abelianization(self, g):
        return g.data[:2]

    def derived_coords(self, g):
        return g.data[2:]

    def from_derived(self, v):
        return GroupElement(self, (ZERO, ZERO, _exact(v[0]), _exact(v[1])))

    def center_quotient(self, g: GroupElement) -> GroupElement:
        """Image under Filiform4 -> Filiform4 / center = Heisenberg."""
        self._check(g)
        return GroupElement(HEISENBERG, g.data[:3])


# -- matrix models ---------------------------------------------------------------


class MatrixModel(GroupModel):
    exact = False
    nilpotent = False
    size: int
    validity_tol = 1e-9

    def identity(self):
        return GroupElement(self, np.eye(self.size))

    def multiply(self, a, b):
        self._check(a, b)
        return GroupElement(self, a.data @ b.data)

    def distance(self, g):
        return float(np.linalg.norm(g.data - np.eye(self.size), 2))

    def float_matrix(self, g):
        return np.array(g.data)

    def log_from_matrix(self, m):
        return np.asarray(self.log_chart(GroupElement(self, m)), dtype=float)

    def adjoint_matrix(self, g):
        self._check(g)
        ginv = self.invert(g).data
        cols = [self._read(g.data @ self._hat(e) @ ginv) for e in np.eye(self.dim)]
        return np.array(cols).T

    z_radius: float

    @property
    def default_radius(self) -> float:
        # half the measured radius, so fresh spot checks stay clear of the boundary
        return self.z_radius / 2

    def default_neighbourhood(self):
        return NeighbourhoodSpec(self.name, "ball", (self.default_radius,))

    def commutator(self, g, h):
        # true inverses: transposes or adjugates of rounded matrices let the
        # off-group error double at every step of an iterated commutator
        self._check(g, h)
        a, b = g.data, h.data
        return GroupElement(self, a @ b @ np.linalg.inv(a) @ np.linalg.inv(b))


class SL2R(MatrixModel):
    """SL(2,R); algebra coordinates (e, h, f) for X = [[h, e], [f, -h]]."""

    size = 2
    injectivity_radius = 0.5  # operator-norm distance ||g - I|| on which log_chart is defined
    generic_multiplicity = 1
    # Z-neighbourhood radius measured by estimate_z_radius (budget 1000, seed 0), frozen
    z_radius = 0.4640625

    def __init__(self):
        self.dim = 3
        self.name = "sl2r"
        self.algebra = lie.fixture("sl2")

    def element(self, payload):
        m = np.asarray(payload, dtype=float)
        if m.shape != (2, 2):
            raise InvalidElementError("SL2R elements are 2x2 matrices")
        if abs(np.linalg.det(m) - 1.0) > self.validity_tol:
            raise InvalidElementError(f"determinant {np.linalg.det(m)} is not 1")
        return GroupElement(self, m)

    def invert(self, a):
        self._check(a)
        (p, q), (r, s) = a.data
        return GroupElement(self, np.array([[s, -q], [-r, p]]))

    @staticmethod
    def _hat(v):
        e, h, f = v
        return np.array([[h, e], [f, -h]], dtype=float)

    @staticmethod
    def _read(x):
        return np.array([x[0, 1], x[0, 0], x[1, 0]])

    def exp_chart(self, v):
        x = self._hat(np.asarray(v, dtype=float))
        return GroupElement(self, _sl2_exp(x))

    def log_chart(self, g):
        self._check(g)
        if self.distance(g) >= self.injectivity_radius:
            raise ChartError(f"||g - I|| = {self.distance(g):.4g} is outside the SL2R log chart")
        m = g.data
        t = (m[0, 0] + m[1, 1]) / 2
        x = m - t * np.eye(2)
        if t > 1:
            mu = math.acosh(t)
            scale = mu / math.sinh(mu) if mu > 1e-8 else 1.0
        else:
            nu = math.acos(min(t, 1.0))
            scale = nu / math.sin(nu) if nu > 1e-8 else 1.0
        return list(self._read(scale * x))

    def haar_sample(self, W, rng, budget: int = 100_000):
        if W.chart != "ball":
            raise ValueError("SL2R samples from exponential-chart balls")
        r = float(W.radius[0])
        wmax = _sl2_weight(r / math.sqrt(2)) if r > 0 else 1.0
        proposals = 0
        while proposals < budget:
            # uniform in {e^2 + 2h^2 + f^2 < r^2} via a uniform ball in scaled coordinates
            u = rng.normal(size=(64, 3))
            u /= np.linalg.norm(u, axis=1)[:, None]
            u *= rng.random(64)[:, None] ** (1 / 3)
            coords = r * np.column_stack([u[:, 0], u[:, 1] / math.sqrt(2), u[:, 2]])
            acc = rng.random(64)
            for v, a in zip(coords, acc):
                proposals += 1
                mu2 = v[1] ** 2 + v[0] * v[2]
                if a * wmax <= _sl2_weight_sq(mu2):
                    return self.exp_chart(v)
        raise SamplerError("SL2R rejection sampler exhausted its budget", proposals, 0)


def _sl2_weight(mu: float) -> float:
    return (math.sinh(mu) / mu) ** 2 if mu > 1e-12 else 1.0


def _sl2_weight_sq(mu2: float) -> float:
    """|det((1 - exp(-ad X)) / ad X)| for X with -det X = mu2."""
    if mu2 > 1e-24:
        mu = math.sqrt(mu2)
        return (math.sinh(mu) / mu) ** 2
    if mu2 < -1e-24:
        nu = math.sqrt(-mu2)
        return (math.sin(nu) / nu) ** 2
    return 1.0


def _sl2_exp(x: np.ndarray) -> np.ndarray:
    mu2 = -np.linalg.det(x)
    if mu2 > 1e-16:
        mu = math.sqrt(mu2)
        return math.cosh(mu) * np.eye(2) + (math.sinh(mu) / mu) * x
    if mu2 < -1e-16:
        nu = math.sqrt(-mu2)
        return math.cos(nu) * np.eye(2) + (math.sin(nu) / nu) * x
    return np.eye(2) + x + (mu2 / 2) * np.eye(2) + (mu2 / 6) * x


class SO3(MatrixModel):
    """SO(3); algebra coordinates are axis-angle vectors."""

    size = 3
    injectivity_radius = math.pi  # rotation angle
    generic_multiplicity = 1
    validity_tol = 1e-12
    z_radius = 0.712890625

    def __init__(self):
        self.dim = 3
        self.name = "so3"
        self.algebra = lie.fixture("so3")

    def element(self, payload):
        m = np.asarray(payload, dtype=float)
        if m.shape != (3, 3):
            raise InvalidElementError("SO3 elements are 3x3 matrices")
        if np.max(np.abs(m.T @ m - np.eye(3))) > self.validity_tol or np.linalg.det(m) < 0:
            raise InvalidElementError("matrix is not a rotation")
        return GroupElement(self, m)

    def invert(self, a):
        self._check(a)
        return GroupElement(self, a.data.T)

    @staticmethod
    def _hat(v):
        x, y, z = v
        return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])

    @staticmethod
    def _read(m):
        return np.array([m[2, 1], m[0, 2], m[1, 0]])

    def angle(self, g: GroupElement) -> float:
        c = (np.trace(g.data) - 1) / 2
        return math.acos(max(-1.0, min(1.0, c)))

    def exp_chart(self, v):
        v = np.asarray(v, dtype=float)
        th = float(np.linalg.norm(v))
        k = self._hat(v)
        if th < 1e-8:
            return GroupElement(self, np.eye(3) + k + k @ k / 2)
        return GroupElement(
            self, np.eye(3) + math.sin(th) / th * k + (1 - math.cos(th)) / th**2 * k @ k
        )

    def log_chart(self, g):
        self._check(g)
        th = self.angle(g)
        if th >= self.injectivity_radius - 1e-9:
            raise ChartError(f"rotation angle {th:.6g} is outside the SO3 log chart")
        skew = (g.data - g.data.T) / 2
        scale = th / math.sin(th) if th > 1e-8 else 1.0 + th * th / 6
        return list(self._read(skew) * scale)

    def haar_sample(self, W, rng, budget: int = 1_000_000):
        """Haar on the angle ball {theta < r}.

        In axis-angle coordinates Haar has density 2(1 - cos|v|)/|v|^2 relative to
        Lebesgue, at most 1, so uniform-ball proposals are accepted with that weight.
        """
        if W.chart != "ball":
            raise ValueError("SO3 samples from exponential-chart balls")
        r = min(float(W.radius[0]), math.pi)
        proposals = 0
        while proposals < budget:
            u = rng.normal(size=(64, 3))
            u /= np.linalg.norm(u, axis=1)[:, None]
            th = r * rng.random(64) ** (1 / 3)
            acc = rng.random(64)
            for axis, t, a in zip(u, th, acc):
                proposals += 1
                if a <= _so3_weight(t):
                    return self.exp_chart(axis * t)
        raise SamplerError("SO3 rejection sampler exhausted its budget", proposals, 0)


def _so3_weight(theta: float) -> float:
    if theta < 1e-4:
        return 1.0 - theta * theta / 12
    return 2 * (1 - math.cos(theta)) / theta**2


HEISENBERG = Heisenberg()
FILIFORM4 = Filiform4()
SL2 = SL2R()
ROTATIONS = SO3()


@lru_cache(maxsize=None)
def get_model(name: str) -> GroupModel:
    """Model by name: euclidean<n>, torus<n>, heisenberg, filiform4, sl2r, so3."""
    key = name.lower().replace("-", "").replace("_", "")
    fixed = {"heisenberg": HEISENBERG, "filiform4": FILIFORM4, "sl2r": SL2, "so3": ROTATIONS}
    if key in fixed:
        return fixed[key]
    m = re.fullmatch(r"(euclidean|torus)(\d+)", key)
    if m:
        n = int(m.group(2))
        return Euclidean(n) if m.group(1) == "euclidean" else Torus(n)
    raise KeyError(f"unknown model {name!r}")


MODEL_NAMES = ("euclidean2", "euclidean3", "torus2", "heisenberg", "filiform4", "sl2r", "so3")
