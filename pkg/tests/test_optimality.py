import json
import math

import numpy as np
import pytest

from lielab.models import SL2
from lielab.optimality import (
    Arc,
    InfeasibleError,
    PieceFamily,
    PingPongCertificate,
    act,
    build_schottky_family,
    check_ping_pong,
    hyperbolic,
    maps_into,
    optimality_trial,
    permutation_probability,
)


@pytest.fixture(scope="module")
def two():
    return build_schottky_family(2, 0.1)


@pytest.fixture(scope="module")
def three():
    return build_schottky_family(3, 0.05)


def test_act_is_an_action():
    rng = np.random.default_rng(0)
    a, b = (SL2.exp_chart(rng.normal(size=3)).data for _ in range(2))
    th = rng.uniform(0, 2 * math.pi, 50)
    assert np.allclose(act(a @ b, th), act(a, act(b, th)))
    assert np.allclose(act(np.eye(2), th), th)


def test_hyperbolic_fixed_points():
    m = hyperbolic(1.0, 3.0, 5.0)
    assert abs(np.linalg.det(m) - 1) < 1e-12
    assert np.allclose(act(m, np.array([1.0, 3.0])), [1.0, 3.0])
    assert sorted(np.abs(np.linalg.eigvals(m))) == pytest.approx([0.2, 5.0])


def test_arc_contains_wraps():
    arc = Arc(6.0, 1.0)
    assert arc.contains(np.array([6.2, 0.1, 0.7])).all()
    assert not arc.contains(np.array([1.0, 5.9])).any()
    pts = arc.complement_points(5)
    assert not arc.contains(pts, margin=1e-9).any()


@pytest.mark.parametrize("n,delta", [(2, 0.1), (3, 0.05)])
def test_certificate_structure(n, delta, request):
    family, cert = request.getfixturevalue("two" if n == 2 else "three")
    assert cert.n == n and family.n == n
    assert len(cert.arcs()) == 2 * n
    assert cert.disjoint()
    assert min(cert.gaps()) >= delta - 1e-9
    assert sum(a.length for a in cert.arcs()) + sum(cert.gaps()) == pytest.approx(2 * math.pi)
    assert family.disjoint()
    gens = [family.center(i) for i in range(n)]
    assert check_ping_pong(gens, cert)


def test_pieces_play(two, three):
    for family, cert in (two, three):
        rng = np.random.default_rng(1)
        for _ in range(200):
            elems = [family.sample(i, rng) for i in range(family.n)]
            assert check_ping_pong(elems, cert)


def test_wrong_slots_golden(two):
    family, cert = two
    g = family.sample(0, np.random.default_rng(123))
    assert not check_ping_pong([family.center(0), g], cert)
    assert np.allclose(g.data, [[7.625492445809, -8.172240688904], [0.004874437602, 0.125915136566]], atol=1e-9)


def test_infeasible():
    with pytest.raises(InfeasibleError) as err:
        build_schottky_family(2, 2.0)
    assert "2.0" in str(err.value)
    with pytest.raises(ValueError):
        build_schottky_family(1, 0.1)
    with pytest.raises(ValueError):
        build_schottky_family(2, 0.0)


def test_ping_pong_rejects_mismatch(two):
    family, cert = two
    assert not check_ping_pong([family.center(0)], cert)
    assert not check_ping_pong([SL2.identity(), SL2.identity()], cert)
    m = hyperbolic(0.0, math.pi / 2, 1.5)
    assert not maps_into(m, cert.repelling[0], cert.attracting[0], 0.05)


def test_json_round_trip(two):
    family, cert = two
    c2 = PingPongCertificate.from_json(json.loads(json.dumps(cert.to_json())))
    f2 = PieceFamily.from_json(json.loads(json.dumps(family.to_json())))
    assert c2 == cert and f2 == family


def test_trial_record(two):
    family, cert = two
    tr = optimality_trial(2, family, cert, [0, 3])
    rec = tr.record()
    assert set(rec) == {"seed", "pattern", "permutation_event", "certified"}
    assert rec["permutation_event"] == (sorted(tr.pattern) == [0, 1])
    assert optimality_trial(2, family, cert, [0, 3]).record() == rec
    with pytest.raises(ValueError):
        optimality_trial(3, family, cert, 0)


def test_permutation_probability():
    assert permutation_probability(2) == 0.5
    assert permutation_probability(3) == pytest.approx(6 / 27)


def test_frequency_small_run(two):
    family, cert = two
    recs = [optimality_trial(2, family, cert, [9, i]).record() for i in range(1000)]
    events = sum(r["permutation_event"] for r in recs)
    sigma = math.sqrt(0.25 / 1000)
    assert abs(events / 1000 - 0.5) <= 4 * sigma
    assert all(r["certified"] for r in recs if r["permutation_event"])
