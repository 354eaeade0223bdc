"""Ping-pong families in SL(2,R): open sets where one-per-piece samples generate discrete groups.

SL(2,R) acts on the circle of lines through the origin; we parametrize it by
theta in [0, 2pi), theta being twice the angle of the line.  A hyperbolic
element with attracting line at theta+ and repelling line at theta- maps the
complement of any arc around theta- into any arc around theta+ once its
eigenvalue is large enough.  With 2n pairwise disjoint arcs this is the
classical ping-pong setup, so the generated group is free and discrete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .models import SL2, GroupElement, NeighbourhoodSpec

TWO_PI = 2 * math.pi
SAMPLES = 64
PIECE_SAMPLES = 256
GAP_TOL = 1e-12


class InfeasibleError(ValueError):
    pass


def act(m: np.ndarray, theta) -> np.ndarray:
    """Action of a 2x2 matrix on circle coordinates."""
    phi = np.asarray(theta, dtype=float) / 2
    v = np.stack([np.cos(phi), np.sin(phi)])
    w = m @ v.reshape(2, -1)
    out = 2 * np.mod(np.arctan2(w[1], w[0]), math.pi)
    return np.mod(out, TWO_PI).reshape(np.shape(theta))


@dataclass(frozen=True)
class Arc:
    """Closed arc running counterclockwise from ``start`` for ``length`` radians."""

    start: float
    length: float

    @property
    def end(self) -> float:
        return (self.start + self.length) % TWO_PI

    def offset(self, theta):
        return np.mod(np.asarray(theta, dtype=float) - self.start, TWO_PI)

    def contains(self, theta, margin: float = 0.0):
        off = self.offset(theta)
        return (off >= margin) & (off <= self.length - margin)

    def complement_points(self, k: int) -> np.ndarray:
        """k points on the complementary arc, both endpoints included."""
        return np.mod(self.start + self.length + np.linspace(0.0, TWO_PI - self.length, k), TWO_PI)

    def to_json(self) -> list:
        return [self.start, self.length]


@dataclass(frozen=True)
class PingPongCertificate:
    attracting: tuple
    repelling: tuple
    delta: float
    generators: tuple  # matrices of the constructed generators, as nested tuples

    @property
    def n(self) -> int:
        return len(self.attracting)

    def arcs(self) -> list:
        return list(self.attracting) + list(self.repelling)

    def gaps(self) -> list:
        arcs = sorted(self.arcs(), key=lambda a: a.start)
        return [
            (nxt.start - cur.start - cur.length) % TWO_PI
            for cur, nxt in zip(arcs, arcs[1:] + arcs[:1])
        ]

    def disjoint(self) -> bool:
        return all(g >= self.delta - GAP_TOL for g in self.gaps())

    def to_json(self) -> dict:
        return {
            "delta": self.delta,
            "attracting": [a.to_json() for a in self.attracting],
            "repelling": [a.to_json() for a in self.repelling],
            "generators": [[list(r) for r in g] for g in self.generators],
        }

    @classmethod
    def from_json(cls, d: dict) -> "PingPongCertificate":
        return cls(
            tuple(Arc(*a) for a in d["attracting"]),
            tuple(Arc(*a) for a in d["repelling"]),
            float(d["delta"]),
            tuple(tuple(tuple(r) for r in g) for g in d["generators"]),
        )


@dataclass(frozen=True)
class PieceFamily:
    ball: NeighbourhoodSpec
    centers: tuple  # matrices, as nested tuples

    @property
    def n(self) -> int:
        return len(self.centers)

    def center(self, i: int) -> GroupElement:
        return SL2.element(np.array(self.centers[i]))

    def sample(self, i: int, rng: np.random.Generator) -> GroupElement:
        """Haar sample of the piece V_i = c_i B."""
        return SL2.multiply(self.center(i), SL2.haar_sample(self.ball, rng))

    def diameter_bound(self) -> float:
        # ||c(exp X - exp Y)|| <= ||c|| * 2 (e^r - 1) for operator norms below r
        r = float(self.ball.radius[0])
        cmax = max(np.linalg.norm(np.array(c), 2) for c in self.centers)
        return 2 * cmax * math.expm1(r)

    def disjoint(self) -> bool:
        d = self.diameter_bound()
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if np.linalg.norm(np.array(self.centers[i]) - np.array(self.centers[j]), 2) <= 2 * d:
                    return False
        return True

    def to_json(self) -> dict:
        return {"ball": self.ball.to_json(), "centers": [[list(r) for r in c] for c in self.centers]}

    @classmethod
    def from_json(cls, d: dict) -> "PieceFamily":
        ball = NeighbourhoodSpec.from_json(d["ball"])
        ball = NeighbourhoodSpec(ball.model, ball.chart, tuple(float(r) for r in ball.radius))
        return cls(ball, tuple(tuple(tuple(r) for r in c) for c in d["centers"]))


def maps_into(m: np.ndarray, repelling: Arc, attracting: Arc, margin: float) -> bool:
    """Does m send the complement of ``repelling`` into ``attracting`` (with margin)?

    Orientation is preserved, so the image of the complementary arc is the arc
    from the image of its start to the image of its end; it lies in the target
    once both images do and appear in that order.  The interior samples are a
    further sanity check.
    """
    pts = act(m, repelling.complement_points(SAMPLES))
    if not np.all(attracting.contains(pts, margin)):
        return False
    off = attracting.offset(pts)
    return bool(off[0] <= off[-1])


def check_ping_pong(elements: Sequence[GroupElement], certificate: PingPongCertificate) -> bool:
    """True iff element i maps the complement of repelling arc i into attracting arc i.

    Since the 2n arcs are pairwise disjoint, this certifies that the elements
    freely generate a discrete subgroup.
    """
    if len(elements) != certificate.n or not certificate.disjoint():
        return False
    margin = certificate.delta / 2
    for g, rep, att in zip(elements, certificate.repelling, certificate.attracting):
        if not maps_into(np.asarray(g.data), rep, att, margin):
            return False
    return True


def hyperbolic(theta_plus: float, theta_minus: float, lam: float) -> np.ndarray:
    """Element of SL2 with eigenvalue lam on the line theta_plus and 1/lam on theta_minus."""
    p = np.array(
        [
            [math.cos(theta_plus / 2), math.cos(theta_minus / 2)],
            [math.sin(theta_plus / 2), math.sin(theta_minus / 2)],
        ]
    )
    return p @ np.diag([lam, 1 / lam]) @ np.linalg.inv(p)


def build_schottky_family(
    n: int, delta: float, seed=0, max_doublings: int = 60, max_halvings: int = 30
) -> tuple:
    """Generators, arcs and a ball B so that one element from each c_i B always plays ping-pong."""
    if n < 2:
        raise ValueError("need at least two generators")
    if not delta > 0:
        raise ValueError("delta must be positive")
    spacing = math.pi / n
    half = (spacing - delta) / 2
    if half <= delta / 2:
        raise InfeasibleError(
            f"{2 * n} arcs separated by gaps of {delta} leave arcs of length {2 * half:.4g}, "
            f"too short for the inclusion margin {delta / 2}"
        )
    attracting, repelling, gens = [], [], []
    for i in range(n):
        cp, cm = 2 * i * spacing, (2 * i + 1) * spacing
        att = Arc((cp - half) % TWO_PI, 2 * half)
        rep = Arc((cm - half) % TWO_PI, 2 * half)
        lam = 2.0
        for _ in range(max_doublings):
            m = hyperbolic(cp, cm, lam)
            if maps_into(m, rep, att, delta / 2):
                break
            lam *= 2
        else:
            raise InfeasibleError(f"no eigenvalue up to {lam} makes generator {i} play ping-pong")
        # one more doubling leaves room for the perturbation by the ball B
        m = hyperbolic(cp, cm, 2 * lam)
        attracting.append(att)
        repelling.append(rep)
        gens.append(tuple(tuple(float(x) for x in r) for r in m))
    cert = PingPongCertificate(tuple(attracting), tuple(repelling), float(delta), tuple(gens))

    rng = np.random.default_rng(seed)
    r = 0.25
    for _ in range(max_halvings):
        family = PieceFamily(NeighbourhoodSpec("sl2r", "ball", (r,)), cert.generators)
        if family.disjoint() and _pieces_play(family, cert, rng):
            return family, cert
        r /= 2
    raise InfeasibleError(f"no ball radius down to {r} keeps the pieces inside the ping-pong regime")


def _pieces_play(family: PieceFamily, cert: PingPongCertificate, rng) -> bool:
    margin = cert.delta / 2
    for i in range(family.n):
        for _ in range(PIECE_SAMPLES):
            g = family.sample(i, rng)
            if not maps_into(np.asarray(g.data), cert.repelling[i], cert.attracting[i], margin):
                return False
    return True


@dataclass
class OptimalityTrial:
    seed: object
    pattern: tuple
    permutation_event: bool
    discrete_certified: bool

    def record(self) -> dict:
        return {
            "seed": self.seed,
            "pattern": "-".join(str(p) for p in self.pattern),
            "permutation_event": self.permutation_event,
            "certified": self.discrete_certified,
        }


def optimality_trial(n: int, family: PieceFamily, certificate: PingPongCertificate, seed) -> OptimalityTrial:
    """Sample n Haar-uniform elements of U = union of the pieces and test the permutation event."""
    if family.n != n or certificate.n != n:
        raise ValueError("family, certificate and n disagree")
    rng = np.random.default_rng(seed)
    # equal volumes: a uniform piece index, then Haar inside the piece
    pattern = tuple(int(p) for p in rng.integers(0, n, size=n))
    elems = [family.sample(p, rng) for p in pattern]
    event = sorted(pattern) == list(range(n))
    certified = False
    if event:
        slots = [None] * n
        for p, g in zip(pattern, elems):
            slots[p] = g
        certified = check_ping_pong(slots, certificate)
    return OptimalityTrial(seed, pattern, event, certified)


def permutation_probability(n: int) -> float:
    return math.factorial(n) / n**n
