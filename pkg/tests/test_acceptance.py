"""End-to-end acceptance suite; each test prints one PASS/FAIL line."""

import itertools
import os
import time

import numpy as np
from scipy.spatial import cKDTree

from lielab import lie
from lielab.abelian import DENSE, as_vectors, decide_density
from lielab.adjoint import adjoint, cartan_of_regular, is_regular
from lielab.closure import commutator_orbit, estimate_z_radius, theorem_trial
from lielab.experiments import ZR_HI, ZR_LO, ZR_STEPS, ExperimentConfig, run_experiment, zradius_step
from lielab.models import FILIFORM4, MODEL_NAMES, ROTATIONS, SL2, commutator_map, get_model

from .conftest import ACCEPTANCE_LINES
from .test_abelian import FIXTURES, ORACLE_FIXTURES, UNIMODULAR, _apply, orbit_points

JOBS = min(4, os.cpu_count() or 1)

def verdict(number: int, ok: bool, detail: str):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line

def test_criterion_1_abelian_certificates():
    details, ok = [], True
    for model in ("euclidean2", "euclidean3"):
        start = time.perf_counter()
        dense = run_experiment(ExperimentConfig("abelian", model=model, trials=1000, seed=1))
        elapsed = time.perf_counter() - start
        lattice = run_experiment(ExperimentConfig("abelian", model=model, trials=1000, seed=2,
                                                  gens=get_model(model).dim))
        a, b = dense.aggregate, lattice.aggregate
        ok &= (
            a["dense"]["fraction"] == 1.0 and a["inconclusive"] == 0 and a["errors"] == 0 and elapsed < 30
            and b["not_dense"]["fraction"] == 1.0 and b["witness_failures"] == 0
            and all(r["witness_ok"] for r in lattice.records)
        )
        details.append(f"{model}: dense {a['dense']['fraction']} in {elapsed:.1f}s, lattice {b['not_dense']['fraction']}")
    verdict(1, ok, "; ".join(details))

def test_criterion_2_nilpotent_reduction():
    rep = run_experiment(ExperimentConfig("nilpotent", model="filiform4", trials=1000, seed=3))
    agg = rep.aggregate
    ok = agg["dense_certified_fraction"] == 1.0 and agg["passed"]
    ok &= all(r["gens"] == 3 and r["verdict"] == DENSE for r in rep.records)
    verdict(2, ok, f"filiform4 dense_certified_fraction {agg['dense_certified_fraction']}")

def test_criterion_3_neither_dense_nor_discrete():
    rep = run_experiment(ExperimentConfig("example5", trials=100, seed=4))
    ok = all(r["dim"] == 1 and r["center"] and r["neither"] for r in rep.records)
    g1, g2 = FILIFORM4.element([1, 0, 0, 0]), FILIFORM4.element([0, 1, 0, 0])
    golden = commutator_map(g1, g2) == FILIFORM4.element([0, 0, 1, "1/2"])
    golden &= commutator_map(g2, g1) == FILIFORM4.element([0, 0, -1, "-1/2"])
    g3 = FILIFORM4.element(["sqrt2", 1, 0, 0])
    golden &= commutator_map(g3, g2) == FILIFORM4.element([0, 0, "sqrt2", 1])
    verdict(3, ok and golden, f"{sum(r['neither'] for r in rep.records)}/100 center-only closures, golden commutators {golden}")

def test_criterion_4_z_neighbourhoods():
    rng = np.random.default_rng(5)
    W = FILIFORM4.default_neighbourhood()
    worst = 0
    for _ in range(10_000):
        g, x = FILIFORM4.haar_sample(W, rng), FILIFORM4.haar_sample(W, rng)
        r = commutator_orbit(FILIFORM4, g, x, max_iter=3)
        worst = max(worst, r.iterates if r.converged else 99)
    radius = estimate_z_radius(SL2, 1000, lo=ZR_LO, hi=ZR_HI, steps=ZR_STEPS, seed=0)
    within = abs(radius - SL2.z_radius) <= zradius_step() + 1e-12
    phi = FILIFORM4.center_quotient
    eq_fail = 0
    for _ in range(1000):
        g, h = FILIFORM4.haar_sample(W, rng), FILIFORM4.haar_sample(W, rng)
        eq_fail += phi(commutator_map(g, h)) != commutator_map(phi(g), phi(h))
    ok = worst <= 3 and within and eq_fail == 0
    verdict(4, ok, f"filiform worst iterate {worst}, sl2r r*={radius:.6g} vs golden {SL2.z_radius}, equivariance failures {eq_fail}")

def test_criterion_5_regularity():
    details, ok = [], True
    for name in MODEL_NAMES:
        rep = run_experiment(ExperimentConfig("regularity", model=name, trials=10_000, seed=6, jobs=JOBS))
        agg = rep.aggregate
        ok &= agg["non_regular"] == 0 and agg["conjugation_failures"] == 0 and agg["errors"] == 0
        details.append(f"{name} {agg['non_regular']}/{agg['conjugation_failures']}")
    verdict(5, ok, "non-regular/conjugation failures: " + ", ".join(details))

def test_criterion_6_optimality():
    details, ok = [], True
    for n, delta in ((2, 0.1), (3, 0.05)):
        rep = run_experiment(ExperimentConfig("optimality", trials=10_000, seed=7, n=n, delta=delta))
        agg = rep.aggregate
        p = agg["expected"]
        freq = agg["permutation_event"]["fraction"]
        discrete = agg["discrete_fraction"]["fraction"]
        ok &= abs(freq - p) <= 4 * agg["sigma"] and agg["uncertified_events"] == 0
        ok &= discrete >= p - 4 * agg["sigma"]
        details.append(f"n={n} freq {freq:.4f} vs {p:.4f} (z {agg['z_score']:.2f}), uncertified {agg['uncertified_events']}")
    verdict(6, ok, "; ".join(details))

def test_criterion_7_float_models():
    details, ok = [], True
    for model in (SL2, ROTATIONS):
        W = model.default_neighbourhood()
        full = sum(theorem_trial(model, W, [8, s]).report.dimension == 3 for s in range(200))
        ok &= full >= 0.99 * 200
        details.append(f"{model.name} {full}/200")
    verdict(7, ok, "closure dimension 3 (statistical): " + ", ".join(details))

def test_criterion_8_property_suites():
    problems = []
    for name in lie.FIXTURES:
        if not lie.validate_algebra(lie.fixture(name)).ok:
            problems.append(f"jacobi {name}")
    rng = np.random.default_rng(9)
    for name in ("sl2r", "so3"):
        m = get_model(name)
        for _ in range(200):
            g, h = (m.haar_sample(m.default_neighbourhood(), rng) for _ in range(2))
            if np.max(np.abs(adjoint(m, g * h) - adjoint(m, g) @ adjoint(m, h))) > 1e-9:
                problems.append(f"Ad {name}")
    for name in MODEL_NAMES:
        m = get_model(name)
        for _ in range(10):
            g = m.haar_sample(m.default_neighbourhood(), rng)
            if not is_regular(m, g).regular:
                continue
            c = cartan_of_regular(m, g)
            if not (lie.is_nilpotent_subalgebra(m.algebra, c) and lie.normalizer(m.algebra, c) == c):
                problems.append(f"cartan {name}")
    for gens in FIXTURES:
        base = decide_density(gens).verdict
        for i, j in itertools.permutations(range(len(gens)), 2):
            moved = list(gens)
            moved[i] = tuple(a + b for a, b in zip(gens[i], gens[j]))
            if decide_density(moved).verdict != base:
                problems.append("nielsen")
        if decide_density([_apply(UNIMODULAR[len(gens[0])], v) for v in gens]).verdict != base:
            problems.append("unimodular")
    targets = {1: np.random.default_rng(5).uniform(0, 1, (100, 1)), 2: np.random.default_rng(5).uniform(0, 1, (100, 2))}
    oracle = 0
    for gens in ORACLE_FIXTURES:
        gens = as_vectors(gens)
        n = len(gens[0])
        if decide_density(gens).verdict != DENSE:
            continue
        d, _ = cKDTree(orbit_points(gens, 0.0, 1.0)).query(targets[n])
        oracle += 1
        if d.max() >= 1e-2:
            problems.append("orbit oracle")
    verdict(8, not problems, f"{oracle} dense verdicts checked by the orbit oracle; problems: {sorted(set(problems)) or 'none'}")
