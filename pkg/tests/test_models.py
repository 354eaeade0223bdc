import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lielab.field import SQRT2, FieldElement, to_float
from lielab.models import (
    FILIFORM4,
    HEISENBERG,
    ROTATIONS,
    SL2,
    ChartError,
    Euclidean,
    ModelMismatchError,
    NeighbourhoodSpec,
    SamplerError,
    Torus,
    commutator_map,
    exact_uniform,
    get_model,
    haar_sample,
)

from .strategies import field_elements

EXACT = [Euclidean(2), Torus(2), HEISENBERG, FILIFORM4]


def elements(model):
    return st.lists(field_elements(terms=3), min_size=model.dim, max_size=model.dim).map(model.element)


def test_filiform_law_examples():
    a = FILIFORM4.element([1, 0, 0, 0])
    b = FILIFORM4.element([0, 1, 0, 0])
    assert (a * b).data == FILIFORM4.element([1, 1, 1, Fraction(1, 2)]).data
    assert a.inverse() == FILIFORM4.element([-1, 0, 0, 0])
    assert commutator_map(a, b) == FILIFORM4.element([0, 0, 1, Fraction(1, 2)])


@pytest.mark.parametrize("model", EXACT, ids=lambda m: m.name)
def test_group_axioms_exact(model):
    @given(elements(model), elements(model), elements(model))
    @settings(max_examples=25, deadline=None)
    def check(x, y, z):
        e = model.identity()
        assert (x * y) * z == x * (y * z)
        assert x * x.inverse() == e and x.inverse() * x == e
        assert e * x == x and x * e == x
        assert model.commutator(x, e) == e
        if model.abelian:
            assert model.commutator(x, y) == e

    check()


@pytest.mark.parametrize("name", ["sl2r", "so3"])
def test_group_axioms_float(name):
    m = get_model(name)
    rng = np.random.default_rng(0)
    W = NeighbourhoodSpec(m.name, "ball", (1.0,))
    for _ in range(100):
        x, y, z = (m.haar_sample(W, rng) for _ in range(3))
        assert ((x * y) * z).allclose(x * (y * z), 1e-9)
        assert (x * x.inverse()).allclose(m.identity(), 1e-9)
        assert m.commutator(x, m.identity()).allclose(m.identity(), 1e-12)


def test_model_mismatch():
    with pytest.raises(ModelMismatchError):
        FILIFORM4.multiply(FILIFORM4.identity(), HEISENBERG.identity())
    with pytest.raises(ModelMismatchError):
        commutator_map(SL2.identity(), ROTATIONS.identity())
    with pytest.raises(ModelMismatchError):
        haar_sample(SL2, ROTATIONS.default_neighbourhood(), np.random.default_rng(0))


def test_torus_reduction():
    t = Torus(2)
    x = t.element(["3/2+sqrt2", -1])
    assert all(0 <= c < 1 for c in x.data)
    assert x.data[0] == Fraction(3, 2) + SQRT2 - 2
    assert (x * x.inverse()) == t.identity()


@pytest.mark.parametrize("model", [HEISENBERG, FILIFORM4], ids=lambda m: m.name)
def test_nilpotent_charts_exact(model):
    rng = np.random.default_rng(1)
    for _ in range(30):
        g = model.haar_sample(model.default_neighbourhood(), rng)
        assert model.exp_chart(model.log_chart(g)) == g
        v = model.log_chart(g)
        assert model.log_chart(model.exp_chart(v)) == v
    assert model.exp_chart([0] * model.dim) == model.identity()


def test_filiform_log_matches_matrix_log():
    rng = np.random.default_rng(2)
    from scipy.linalg import logm

    for _ in range(10):
        g = FILIFORM4.haar_sample(FILIFORM4.default_neighbourhood(), rng)
        x = np.real(logm(FILIFORM4.float_matrix(g)))
        v = [to_float(c) for c in FILIFORM4.log_chart(g)]
        assert np.allclose(FILIFORM4._read_algebra(x), v, atol=1e-10)


def test_so3_rodrigues_round_trip():
    g = ROTATIONS.exp_chart([0.3, 0.0, 0.0])
    assert g.data == pytest.approx(
        np.array([[1, 0, 0], [0, math.cos(0.3), -math.sin(0.3)], [0, math.sin(0.3), math.cos(0.3)]])
    )
    assert ROTATIONS.log_chart(g) == pytest.approx([0.3, 0, 0], abs=1e-12)
    assert ROTATIONS.exp_chart([0, 0, 0]).allclose(ROTATIONS.identity(), 0)
    with pytest.raises(ChartError):
        ROTATIONS.log_chart(ROTATIONS.exp_chart([math.pi, 0, 0]))


@pytest.mark.parametrize("name", ["sl2r", "so3"])
def test_float_chart_round_trip(name):
    m = get_model(name)
    rng = np.random.default_rng(3)
    for _ in range(200):
        g = m.haar_sample(m.default_neighbourhood(), rng)
        assert m.exp_chart(m.log_chart(g)).allclose(g, 1e-10)
        v = np.array(m.log_chart(g))
        assert np.allclose(m.log_chart(m.exp_chart(v)), v, atol=1e-10)


def test_sl2_log_domain():
    g = SL2.element(np.diag([4.0, 0.25]))
    with pytest.raises(ChartError):
        SL2.log_chart(g)


def test_box_sampler_reproducible_and_uniform():
    e = Euclidean(2)
    W = NeighbourhoodSpec("euclidean2", "box", (Fraction(1), Fraction(1)))
    a = [e.haar_sample(W, np.random.default_rng(7)) for _ in range(3)]
    b = [e.haar_sample(W, np.random.default_rng(7)) for _ in range(3)]
    assert a == b
    rng = np.random.default_rng(8)
    xs = np.array([e.float_coords(e.haar_sample(W, rng)) for _ in range(20000)])
    assert np.all(np.abs(xs) <= 1)
    # uniform componentwise: mean 0, variance 1/3, within 4 sigma
    assert abs(xs.mean()) < 4 * math.sqrt(1 / 3 / xs.size)
    assert abs((xs**2).mean() - 1 / 3) < 4 * math.sqrt(4 / 45 / xs.size)


def test_exact_samples_irrational():
    rng = np.random.default_rng(9)
    xs = [exact_uniform(rng, -1, 1) for _ in range(200)]
    assert sum(not x.is_rational() for x in xs) == 200


def test_sampler_budget_error():
    with pytest.raises(SamplerError) as err:
        SL2.haar_sample(NeighbourhoodSpec("sl2r", "ball", (0.1,)), np.random.default_rng(0), budget=0)
    assert "proposals" in str(err.value)


def test_filiform_left_translation_jacobian():
    # finite differences of x -> g x: the Jacobian determinant is 1
    rng = np.random.default_rng(10)

    def law(p, q):
        a1, b1, c1, d1 = p
        a2, b2, c2, d2 = q
        return np.array([a1 + a2, b1 + b2, c1 + c2 + a1 * b2, d1 + d2 + a1 * c2 + a1 * a1 * b2 / 2])

    for _ in range(20):
        g = rng.uniform(-2, 2, 4)
        x = rng.uniform(-2, 2, 4)
        h = 1e-6
        jac = np.column_stack([(law(g, x + h * e) - law(g, x - h * e)) / (2 * h) for e in np.eye(4)])
        assert abs(np.linalg.det(jac) - 1) < 1e-8
        # the float law agrees with the exact one
        ge = FILIFORM4.element([Fraction(t).limit_denominator(10**6) for t in g])
        xe = FILIFORM4.element([Fraction(t).limit_denominator(10**6) for t in x])
        assert np.allclose(FILIFORM4.float_coords(ge * xe), law(FILIFORM4.float_coords(ge), FILIFORM4.float_coords(xe)))


def _box_fraction(points, lo, hi):
    inside = np.all((points >= lo) & (points <= hi), axis=1)
    return inside.mean(), inside.size


def test_filiform_haar_translation_invariance():
    # P(x in B) = P(x in g B) whenever both boxes sit inside W
    rng = np.random.default_rng(11)
    W = FILIFORM4.default_neighbourhood()
    n = 100_000
    pts = np.array([FILIFORM4.float_coords(FILIFORM4.haar_sample(W, rng)) for _ in range(n)])
    g = np.array([0.2, -0.1, 0.15, 0.05])
    ginv = np.array([-g[0], -g[1], g[0] * g[1] - g[2], -g[3] + g[0] * g[2] - g[0] ** 2 * g[1] / 2])
    a, b, c, d = ginv
    x = pts
    # coordinates of g^{-1} x under the filiform law
    back = np.column_stack([
        a + x[:, 0],
        b + x[:, 1],
        c + x[:, 2] + a * x[:, 1],
        d + x[:, 3] + a * x[:, 2] + a * a * x[:, 1] / 2,
    ])
    lo, hi = np.full(4, -0.3), np.full(4, 0.3)
    p1, _ = _box_fraction(pts, lo, hi)
    p2, _ = _box_fraction(back, lo, hi)
    sigma = math.sqrt(2 * p1 * (1 - p1) / n)
    assert abs(p1 - p2) < 3 * sigma + 1e-12


def test_sl2_haar_translation_invariance():
    rng = np.random.default_rng(12)
    W = NeighbourhoodSpec("sl2r", "ball", (0.5,))
    n = 100_000
    mats = np.array([SL2.haar_sample(W, rng).data for _ in range(n)])
    g = SL2.exp_chart([0.08, -0.05, 0.06]).data
    ginv = np.linalg.inv(g)

    def in_ball(ms, r=0.15):
        # small chart ball around e, well inside W and inside g^{-1} W
        d = np.linalg.norm(ms - np.eye(2), axis=(1, 2))
        return d < r

    p1 = in_ball(mats).mean()
    p2 = in_ball(ginv @ mats).mean()
    sigma = math.sqrt(2 * p1 * (1 - p1) / n)
    assert abs(p1 - p2) < 3 * sigma


def test_so3_mean_angle_matches_quadrature():
    rng = np.random.default_rng(13)
    r = 1.2
    W = NeighbourhoodSpec("so3", "ball", (r,))
    n = 100_000
    angles = np.array([ROTATIONS.angle(ROTATIONS.haar_sample(W, rng)) for _ in range(n)])
    # Haar density of the rotation angle is proportional to 1 - cos(theta)
    num, _ = integrate.quad(lambda t: t * (1 - math.cos(t)), 0, r)
    den, _ = integrate.quad(lambda t: 1 - math.cos(t), 0, r)
    assert np.all(angles < r + 1e-9)
    assert abs(angles.mean() - num / den) < 3 * angles.std() / math.sqrt(n)


def test_quotient_equivariance_exact():
    rng = np.random.default_rng(14)
    W = FILIFORM4.default_neighbourhood()
    for _ in range(100):
        g, h = FILIFORM4.haar_sample(W, rng), FILIFORM4.haar_sample(W, rng)
        phi = FILIFORM4.center_quotient
        assert phi(FILIFORM4.commutator(g, h)) == HEISENBERG.commutator(phi(g), phi(h))
        assert phi(g * h) == phi(g) * phi(h)


def test_json_round_trip():
    g = FILIFORM4.element(["sqrt2", "1/3", 0, "-sqrt30"])
    assert FILIFORM4.element_from_json(json.loads(json.dumps(g.to_json()))) == g
    r = ROTATIONS.exp_chart([0.1, 0.2, 0.3])
    assert ROTATIONS.element_from_json(json.loads(json.dumps(r.to_json()))) == r
    W = NeighbourhoodSpec("filiform4", "box", (Fraction(1, 2),) * 4)
    assert NeighbourhoodSpec.from_json(json.loads(json.dumps(W.to_json()))) == W


def test_neighbourhood_validation():
    with pytest.raises(ValueError):
        NeighbourhoodSpec("so3", "ball", (math.inf,))
    with pytest.raises(ValueError):
        NeighbourhoodSpec("so3", "cube", (1.0,))
    with pytest.raises(ValueError):
        NeighbourhoodSpec("so3", "ball", (0.0,))


def test_get_model():
    assert get_model("euclidean3").dim == 3
    assert get_model("SL2R") is SL2
    with pytest.raises(KeyError):
        get_model("e8")
