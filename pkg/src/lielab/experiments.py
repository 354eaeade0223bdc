"""Seeded experiment batches: configuration, per-trial records, aggregates and report files.

Trial ``i`` of a run with master seed ``s`` draws from ``default_rng([s, i])``,
so records do not depend on how trials are spread over worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from . import __version__
from .abelian import DENSE, INCONCLUSIVE, NOT_DENSE, decide_density, witness_check
from .adjoint import is_regular
from .closure import (
    CERTIFIED,
    MAX_ITER,
    EPS_ID,
    CHART_RADIUS,
    WORD_LENGTH,
    closure_dimension,
    estimate_z_radius,
    nilpotent_density_check,
    theorem_trial,
)
from .exact import qrank
from .models import CoordinateModel, Filiform4, get_model
from .optimality import build_schottky_family, optimality_trial, permutation_probability

log = logging.getLogger(__name__)

EXPERIMENTS = ("theorem", "abelian", "nilpotent", "example5", "zradius", "regularity", "optimality", "densecheck")

DEFAULT_MODELS = {
    "theorem": "euclidean2",
    "abelian": "euclidean2",
    "nilpotent": "filiform4",
    "example5": "filiform4",
    "zradius": "sl2r",
    "regularity": "sl2r",
    "optimality": "sl2r",
    "densecheck": "euclidean2",
}

# stable CSV columns per experiment
COLUMNS = {
    "theorem": ("seed", "model", "all_regular", "dim", "dense", "discrete"),
    "abelian": ("seed", "model", "gens", "verdict", "branch", "witness_ok"),
    "nilpotent": ("seed", "model", "gens", "dense", "dim", "verdict"),
    "example5": ("seed", "model", "dim", "center", "dense", "discrete", "neither"),
    "zradius": ("seed", "model", "radius", "golden", "within_step"),
    "regularity": ("seed", "model", "multiplicity", "regular", "conjugate_regular"),
    "optimality": ("seed", "pattern", "permutation_event", "certified"),
    "densecheck": ("seed", "verdict", "branch", "witness_ok"),
}

# bisection grid used by zradius; one step is (hi - lo) / 2^steps
ZR_LO, ZR_HI, ZR_STEPS = 0.02, 1.0, 8


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    model: Optional[str] = None
    trials: int = 100
    seed: int = 0
    out: Optional[str] = None
    word_length: int = WORD_LENGTH
    chart_radius: float = CHART_RADIUS
    eps_id: float = EPS_ID
    max_iter: int = MAX_ITER
    delta: float = 0.1
    n: int = 2
    gens: Optional[int] = None  # generator count; defaults to dim + 1 (d + 1 for nilpotent)
    budget: int = 1000
    input: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if self.model is None:
            self.model = DEFAULT_MODELS.get(self.experiment)
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        try:
            model = get_model(self.model)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
        exp = self.experiment
        if exp == "optimality" and model.name != "sl2r":
            raise ConfigError("optimality runs on sl2r only")
        if exp in ("abelian", "densecheck") and not (isinstance(model, CoordinateModel) and model.abelian):
            raise ConfigError(f"{exp} needs a euclidean or torus model")
        if exp == "nilpotent" and not isinstance(model, CoordinateModel):
            raise ConfigError("nilpotent needs an exact nilpotent model")
        if exp == "example5" and not isinstance(model, Filiform4):
            raise ConfigError("example5 runs on filiform4 only")
        if exp == "densecheck" and not self.input:
            raise ConfigError("densecheck needs an input file")
        if exp == "optimality" and self.n < 2:
            raise ConfigError("optimality needs n >= 2")
        if self.gens is not None and self.gens < 1:
            raise ConfigError("gens must be positive")

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def trial_seed(config: ExperimentConfig, index: int) -> list:
    return [int(config.seed), int(index)]


def _seed_label(seed) -> str:
    return ":".join(str(s) for s in seed)


# -- per-trial workers --------------------------------------------------------------


def _theorem(cfg, model, seed):
    tr = theorem_trial(
        model, model.default_neighbourhood(), seed, cfg.word_length, cfg.chart_radius,
    )
    return tr.record()


def _exact_gens(model, k, rng):
    W = model.default_neighbourhood()
    return [model.haar_sample(W, rng) for _ in range(k)]


def _abelian(cfg, model, seed):
    rng = np.random.default_rng(seed)
    k = cfg.gens or model.dim + 1
    vecs = [model.abelianization(g) for g in _exact_gens(model, k, rng)]
    if model.name.startswith("torus"):
        vecs += [tuple(1 if i == j else 0 for j in range(model.dim)) for i in range(model.dim)]
    v = decide_density(vecs)
    ok = witness_check(v.witness, vecs) if v.verdict == NOT_DENSE else None
    return {"model": model.name, "gens": k, "verdict": v.verdict, "branch": v.branch, "witness_ok": ok}


def _nilpotent(cfg, model, seed):
    rng = np.random.default_rng(seed)
    k = cfg.gens or model.abelianization_dim + 1
    gens = _exact_gens(model, k, rng)
    check = nilpotent_density_check(model, gens)
    report = closure_dimension(model, gens, cfg.word_length, cfg.chart_radius)
    return {
        "model": model.name,
        "gens": k,
        "dense": report.dense,
        "dim": report.dimension,
        "verdict": check.certificate.verdict,
    }


def example5_generators(rng, model=None, attempts: int = 100):
    """Two exact filiform elements with (a_i, b_i) R-independent and a_1, a_2 Q-independent."""
    model = model or get_model("filiform4")
    for _ in range(attempts):
        g1, g2 = _exact_gens(model, 2, rng)
        if example5_hypotheses(g1, g2):
            return g1, g2
    raise RuntimeError("could not draw generators satisfying the example hypotheses")


def example5_hypotheses(g1, g2) -> bool:
    a1, b1 = g1.data[:2]
    a2, b2 = g2.data[:2]
    if (a1 * b2 - a2 * b1).is_zero():
        return False
    return qrank([list(a1.coeffs), list(a2.coeffs)]) == 2


def _example5(cfg, model, seed):
    rng = np.random.default_rng(seed)
    gens = example5_generators(rng, model)
    report = closure_dimension(model, gens, cfg.word_length, cfg.chart_radius)
    center = report.dimension == 1 and report.algebra.contains([0, 0, 0, 1])
    return {
        "model": model.name,
        "dim": report.dimension,
        "center": center,
        "dense": report.dense,
        "discrete": report.discrete,
        "neither": report.neither_dense_nor_discrete,
    }


def zradius_step() -> float:
    return (ZR_HI - ZR_LO) / 2**ZR_STEPS


def _zradius(cfg, model, seed):
    r = estimate_z_radius(model, cfg.budget, cfg.max_iter, cfg.eps_id, ZR_LO, ZR_HI, ZR_STEPS, seed)
    golden = getattr(model, "z_radius", None)
    within = None if golden is None else abs(r - golden) <= zradius_step() + 1e-12
    if golden is None and model.nilpotent:
        within = r == ZR_HI
    return {"model": model.name, "radius": r, "golden": golden, "within_step": within}


def _regularity(cfg, model, seed):
    rng = np.random.default_rng(seed)
    W = model.default_neighbourhood()
    g = model.haar_sample(W, rng)
    h = model.haar_sample(W, rng)
    reg = is_regular(model, g)
    conj = model.multiply(model.multiply(h, g), model.invert(h))
    return {
        "model": model.name,
        "multiplicity": reg.multiplicity,
        "regular": reg.regular,
        "conjugate_regular": is_regular(model, conj).regular,
    }


@lru_cache(maxsize=8)
def schottky(n: int, delta: float, seed: int):
    return build_schottky_family(n, delta, seed)


def _optimality(cfg, model, seed):
    family, cert = schottky(cfg.n, cfg.delta, cfg.seed)
    return optimality_trial(cfg.n, family, cert, seed).record()


def read_generators(path) -> list:
    """One vector per line; coordinates separated by whitespace or commas; '#' starts a comment."""
    vecs = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            vecs.append([tok for tok in line.replace(",", " ").split()])
    return vecs


def _densecheck(cfg, model, seed):
    vecs = read_generators(cfg.input)
    v = decide_density(vecs)
    ok = witness_check(v.witness, vecs) if v.verdict == NOT_DENSE else None
    return {"verdict": v.verdict, "branch": v.branch, "witness_ok": ok, "certificate": v.to_json()}


WORKERS = {
    "theorem": _theorem,
    "abelian": _abelian,
    "nilpotent": _nilpotent,
    "example5": _example5,
    "zradius": _zradius,
    "regularity": _regularity,
    "optimality": _optimality,
    "densecheck": _densecheck,
}


def run_trial(config: ExperimentConfig, index: int) -> dict:
    """One trial record; exceptions are captured into the record instead of aborting the batch."""
    seed = trial_seed(config, index)
    base = {"index": index, "seed": _seed_label(seed)}
    try:
        model = get_model(config.model)
        rec = WORKERS[config.experiment](config, model, seed)
        rec.pop("seed", None)
        base.update(rec)
    except Exception as exc:  # noqa: BLE001 - recorded, the batch continues
        log.warning("trial %d failed: %r", index, exc)
        base["error"] = f"{type(exc).__name__}: {exc}"
    return base


def _run_indexed(args):
    cfg, i = args
    return run_trial(cfg, i)


# -- aggregates -----------------------------------------------------------------------


def _round(x):
    if isinstance(x, float) and math.isfinite(x):
        return float(f"{x:.12g}")
    return x


def _fraction(k: int, n: int) -> dict:
    if n == 0:
        return {"count": 0, "total": 0, "fraction": None, "ci95": None}
    ci = stats.binomtest(k, n).proportion_ci(0.95, method="wilson")
    return {"count": k, "total": n, "fraction": _round(k / n), "ci95": [_round(ci.low), _round(ci.high)]}


def aggregate(config: ExperimentConfig, records: list) -> dict:
    """Aggregate statistics plus the pass/fail decision for the experiment's threshold."""
    ok = [r for r in records if "error" not in r]
    errors = len(records) - len(ok)
    n = len(ok)
    out = {"trials": len(records), "errors": errors}
    exp = config.experiment
    count = lambda pred: sum(1 for r in ok if pred(r))  # noqa: E731
    model = get_model(config.model)

    if exp == "theorem":
        out["dense_certified"] = _fraction(count(lambda r: r["dense"] == CERTIFIED), n)
        out["full_dimension"] = _fraction(count(lambda r: r["dim"] == model.dim), n)
        out["all_regular"] = _fraction(count(lambda r: r["all_regular"]), n)
        out["dense_certified_fraction"] = out["dense_certified"]["fraction"]
        if model.exact:
            passed = out["dense_certified"]["count"] == n
        else:
            passed = n > 0 and out["full_dimension"]["count"] >= 0.99 * n
    elif exp == "abelian":
        k = config.gens or model.dim + 1
        out["dense"] = _fraction(count(lambda r: r["verdict"] == DENSE), n)
        out["not_dense"] = _fraction(count(lambda r: r["verdict"] == NOT_DENSE), n)
        out["inconclusive"] = count(lambda r: r["verdict"] == INCONCLUSIVE)
        out["witness_failures"] = count(lambda r: r["witness_ok"] is False)
        out["dense_certified_fraction"] = out["dense"]["fraction"]
        target = "dense" if k > model.dim else "not_dense"
        passed = out[target]["count"] == n and out["witness_failures"] == 0 and out["inconclusive"] == 0
    elif exp == "nilpotent":
        out["dense_certified"] = _fraction(count(lambda r: r["dense"] == CERTIFIED), n)
        out["dense_certified_fraction"] = out["dense_certified"]["fraction"]
        if (config.gens or model.abelianization_dim + 1) > model.abelianization_dim:
            passed = count(lambda r: r["dense"] == CERTIFIED and r["verdict"] == DENSE) == n
        else:
            passed = count(lambda r: r["verdict"] == NOT_DENSE) == n
    elif exp == "example5":
        out["neither"] = _fraction(count(lambda r: r["neither"] and r["center"] and r["dim"] == 1), n)
        passed = out["neither"]["count"] == n
    elif exp == "zradius":
        radii = [r["radius"] for r in ok]
        out["radius_min"] = _round(min(radii)) if radii else None
        out["radius_max"] = _round(max(radii)) if radii else None
        out["within_step"] = _fraction(count(lambda r: r["within_step"]), n)
        passed = n > 0 and all(ZR_LO <= x <= ZR_HI for x in radii) and out["within_step"]["count"] == n
    elif exp == "regularity":
        out["non_regular"] = count(lambda r: not r["regular"])
        out["conjugation_failures"] = count(lambda r: r["regular"] != r["conjugate_regular"])
        passed = out["non_regular"] == 0 and out["conjugation_failures"] == 0
    elif exp == "optimality":
        p = permutation_probability(config.n)
        events = count(lambda r: r["permutation_event"])
        sigma = math.sqrt(p * (1 - p) / n) if n else math.inf
        freq = events / n if n else math.nan
        out["permutation_event"] = _fraction(events, n)
        out["expected"] = _round(p)
        out["sigma"] = _round(sigma)
        out["z_score"] = _round((freq - p) / sigma) if n else None
        out["uncertified_events"] = count(lambda r: r["permutation_event"] and not r["certified"])
        out["discrete_fraction"] = _fraction(count(lambda r: r["certified"]), n)
        passed = n > 0 and abs(freq - p) <= 4 * sigma and out["uncertified_events"] == 0
    else:  # densecheck
        verdicts = [r["verdict"] for r in ok]
        out["verdicts"] = verdicts
        out["witness_failures"] = count(lambda r: r["witness_ok"] is False)
        passed = n > 0 and INCONCLUSIVE not in verdicts and out["witness_failures"] == 0
    out["passed"] = bool(passed and errors == 0)
    return out


# -- reports --------------------------------------------------------------------------


@dataclass
class ReportFile:
    config: dict
    records: list
    aggregate: dict
    version: str = __version__
    wall_clock: float = 0.0
    paths: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.aggregate.get("passed"))

    def summary(self) -> dict:
        return {
            "config": self.config,
            "aggregate": self.aggregate,
            "version": self.version,
            "wall_clock": _round(self.wall_clock),
        }


def run_experiment(config: ExperimentConfig) -> ReportFile:
    """Run all trials (optionally in worker processes) and write the report files."""
    config.validate()
    start = time.perf_counter()
    tasks = [(config, i) for i in range(config.trials)]
    if config.jobs > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            # map keeps trial order, so the writer stays ordered by index
            records = list(pool.map(_run_indexed, tasks, chunksize=max(1, config.trials // (4 * config.jobs))))
    else:
        records = [_run_indexed(t) for t in tasks]
    report = ReportFile(config.to_json(), records, aggregate(config, records))
    report.wall_clock = time.perf_counter() - start
    if config.out:
        write_report(report, Path(config.out))
    return report


def _cell(x):
    if isinstance(x, float):
        return format(x, ".12g")
    if x is None:
        return ""
    return str(x)


def records_csv(experiment: str, records: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = COLUMNS[experiment]
    w.writerow(cols)
    for r in records:
        w.writerow([_cell(r.get(c)) for c in cols])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return _round(float(x))
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def records_jsonl(records: list) -> str:
    return "".join(json.dumps(_jsonable(r), sort_keys=True) + "\n" for r in records)


def emit_summary(report: ReportFile, fmt: str, path) -> Path:
    """Write the per-trial CSV or the summary JSON."""
    path = Path(path)
    if fmt == "csv":
        path.write_text(records_csv(report.config["experiment"], report.records))
    elif fmt == "json":
        path.write_text(json.dumps(_jsonable(report.summary()), indent=2, sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown summary format {fmt!r}")
    return path


def write_report(report: ReportFile, out: Path) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    name = report.config["experiment"]
    paths = {
        "jsonl": out / f"{name}.jsonl",
        "csv": out / f"{name}.csv",
        "summary": out / f"{name}_summary.json",
    }
    paths["jsonl"].write_text(records_jsonl(report.records))
    emit_summary(report, "csv", paths["csv"])
    emit_summary(report, "json", paths["summary"])
    report.paths = {k: str(v) for k, v in paths.items()}
    return report.paths


def load_report(path) -> ReportFile:
    """Load a report from its summary JSON (or the directory holding it) plus the JSON-lines file."""
    path = Path(path)
    if path.is_dir():
        found = sorted(path.glob("*_summary.json"))
        if not found:
            raise FileNotFoundError(f"no *_summary.json in {path}")
        path = found[0]
    if path.suffix == ".jsonl":
        path = path.with_name(path.stem + "_summary.json")
    summary = json.loads(path.read_text())
    name = summary["config"]["experiment"]
    lines = path.with_name(f"{name}.jsonl")
    records = [json.loads(l) for l in lines.read_text().splitlines() if l.strip()] if lines.exists() else []
    return ReportFile(summary["config"], records, summary["aggregate"], summary.get("version", ""),
                      summary.get("wall_clock", 0.0))
