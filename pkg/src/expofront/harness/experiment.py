"""Running front methods over datasets: CSV rows, timings, aggregation, benchmark."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from ..controller import ctrl_simulate
from ..core import QueryInstance, RankingDistribution, unfairness_of, utility_of
from ..decomposition import bvn_decompose, caratheodory_decompose, sample_deliveries
from ..errors import EmptyDataset, EmptyFront, ExpoError, InvalidGrid
from ..expohedron import max_utility_vertex
from ..convex import BirkhoffQP
from ..pareto import (ParetoFront, birkhoff_qp_front, evaluate, pexpo_front, qp_sweep_front,
                      sphere_expo_front)
from .data import gen_synthetic, load_instances

logger = logging.getLogger(__name__)

METHODS = ("pexpo", "sphere-expo", "qp-sweep", "birkhoff-qp", "ctrl")
FRONT_COLUMNS = ("queryId", "method", "param", "utility", "unfairness",
                 "normalizedUtility", "normalizedUnfairness", "exposure")


@dataclass
class ExperimentConfig:
    """What to run on which queries.

    ``dataset`` is a list of instances, a path to instance JSON, or a dict
    ``{"kind": "Ds" | "Dl", "count": int, "seed": int}``.
    """

    method: str
    dataset: object
    seed: int = 0
    k: int = 3
    n_sample: int = 5
    n_points: int = 20
    alphas: tuple = tuple(np.linspace(0.0, 1.0, 20))
    lambdas: tuple = (0.0, 1.0, 10.0, 100.0)
    T: int = 1000
    decompose: bool = True
    deliver: bool = True
    workers: int = 1
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.k < 0:
            raise ValueError("K must be non-negative")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.n_sample < 2 or self.n_points < 2:
            raise ValueError("need at least two samples / points")
        if not len(self.alphas) or not len(self.lambdas):
            raise ValueError("parameter grids must be non-empty")

    def instances(self) -> list:
        ds = self.dataset
        if isinstance(ds, (str, Path)):
            return load_instances(ds)
        if isinstance(ds, dict):
            return gen_synthetic(ds["kind"], ds["count"], ds.get("seed", self.seed))
        return list(ds)


class QueryOutcome(NamedTuple):
    query_id: str
    rows: list
    phases: dict
    solves: int
    error: Optional[str]


@dataclass
class ExperimentReport:
    method: str
    outcomes: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [o for o in self.outcomes if o.error is not None]

    @property
    def failed_fraction(self) -> float:
        return len(self.failures) / max(1, len(self.outcomes))

    @property
    def ok(self) -> bool:
        return self.failed_fraction <= 0.10

    @property
    def rows(self) -> list:
        return [r for o in self.outcomes for r in o.rows]

    def runtime(self) -> dict:
        done = [o for o in self.outcomes if o.error is None]
        phases = sorted({p for o in done for p in o.phases})
        per_phase = {p: float(np.mean([o.phases.get(p, 0.0) for o in done])) if done else 0.0
                     for p in phases}
        return {
            "method": self.method,
            "queries": len(self.outcomes),
            "failed": len(self.failures),
            "meanSecondsPerQuery": float(sum(per_phase.values())),
            "phases": per_phase,
            "meanSolvesPerQuery": float(np.mean([o.solves for o in done])) if done else 0.0,
        }

    def records(self) -> list:
        """Rows as dicts with numbers parsed (blank values become None)."""
        out = []
        for row in self.rows:
            rec = dict(zip(FRONT_COLUMNS, row))
            for key in FRONT_COLUMNS[2:7]:
                rec[key] = float(rec[key]) if rec[key] != "" else None
            rec["exposure"] = json.loads(rec["exposure"]) if rec["exposure"] else None
            out.append(rec)
        return out

    def fronts_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FRONT_COLUMNS)
        w.writerows(self.rows)
        return buf.getvalue()


def prp_reference(instance: QueryInstance) -> tuple:
    """Utility and unfairness of the relevance-sorted ranking."""
    v = max_utility_vertex(instance.relevance, instance.gamma)
    return utility_of(v, instance.relevance), unfairness_of(v, instance)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def front_rows(front: ParetoFront, instance: QueryInstance, method: str, param=None) -> list:
    u_prp, f_prp = prp_reference(instance)
    rows = []
    for i, p in enumerate(front.points):
        par = p.param if p.param is not None else (param if param is not None else i)
        nf = p.unfairness / f_prp if f_prp > 1e-12 else float("nan")
        rows.append([instance.query_id, method, _fmt(par), _fmt(p.utility), _fmt(p.unfairness),
                     _fmt(p.utility / u_prp), _fmt(nf), json.dumps(p.exposure.tolist())])
    return rows


def _ctrl_front(instance: QueryInstance, lambdas, T: int) -> ParetoFront:
    pts = []
    for lam in lambdas:
        res = ctrl_simulate(instance, lam, T)
        x = sum(p.exposure(instance.gamma) for p in res.deliveries) / T
        pts.append(evaluate(instance, x, lam))
    return ParetoFront(pts, "ctrl", info={"lambdas": list(lambdas), "T": T})


def _run_query(config: ExperimentConfig, instance: QueryInstance) -> QueryOutcome:
    phases = {}
    solves = 0
    try:
        t0 = time.perf_counter()
        matrices = None
        if config.method == "pexpo":
            front, param = pexpo_front(instance), None
        elif config.method == "sphere-expo":
            front, param = sphere_expo_front(instance, config.k, config.n_sample), config.k
            solves = front.info.get("markedSolves", 0)
        elif config.method == "qp-sweep":
            front, param = qp_sweep_front(instance, config.n_points), None
            solves = config.n_points - 2
        elif config.method == "birkhoff-qp":
            front, results = birkhoff_qp_front(instance, config.alphas)
            matrices = {float(a): r.B for a, r in zip(config.alphas, results)}
            param, solves = None, len(results)
        else:
            front, param = _ctrl_front(instance, config.lambdas, config.T), None
        phases["front"] = time.perf_counter() - t0
        if not front.points:
            raise EmptyFront("method returned no points")
        dists = []
        if config.decompose and config.method != "ctrl":
            t0 = time.perf_counter()
            for p in front.points:
                if matrices is not None:
                    dists.append(bvn_decompose(matrices[float(p.param)]))
                else:
                    dists.append(caratheodory_decompose(p.exposure, instance.gamma).atoms)
            phases["decomposition"] = time.perf_counter() - t0
        if config.deliver and dists:
            t0 = time.perf_counter()
            for atoms in dists:
                sample_deliveries(RankingDistribution.normalized(atoms), config.T)
            phases["delivery"] = time.perf_counter() - t0
        rows = front_rows(front, instance, config.method, param)
        return QueryOutcome(instance.query_id, rows, phases, solves, None)
    except ExpoError as exc:
        logger.warning("query %s failed: %s", instance.query_id, exc)
        return QueryOutcome(instance.query_id, [], phases, solves, f"{type(exc).__name__}: {exc}")


def _run_one(args):
    return _run_query(*args)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run the configured method on every query and collect rows and timings.

    Queries that raise a library error are recorded as failures and skipped.
    With ``out_dir`` set, writes ``fronts.csv`` and ``runtime.json`` there.
    """
    instances = config.instances()
    if not instances:
        raise EmptyDataset("the dataset has no queries")
    jobs = [(config, q) for q in instances]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            outcomes = list(pool.map(_run_one, jobs))
    else:
        outcomes = [_run_one(j) for j in jobs]
    report = ExperimentReport(config.method, outcomes)
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "fronts.csv").write_text(report.fronts_csv(), encoding="utf-8")
        (out / "runtime.json").write_text(json.dumps(report.runtime(), indent=1), encoding="utf-8")
    return report


# -- aggregation ------------------------------------------------------------------------

class AggregatedCurve(NamedTuple):
    grid: np.ndarray
    mean_utility: np.ndarray
    count: np.ndarray
    excluded: int = 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("grid", "meanUtility", "count"))
        for g, u, c in zip(self.grid, self.mean_utility, self.count):
            w.writerow((repr(float(g)), repr(float(u)), int(c)))
        return buf.getvalue()


def normalized_front(front: ParetoFront, instance: QueryInstance):
    """``(F / F_PRP, U / U_PRP)`` arrays, or None when the PRP point is already fair."""
    u_prp, f_prp = prp_reference(instance)
    if f_prp <= 1e-12:
        return None
    return front.unfairnesses / f_prp, front.utilities / u_prp


def aggregate_fronts(fronts, grid_size: int = 21) -> AggregatedCurve:
    """Mean normalized utility on a uniform grid of normalized unfairness in [0, 1].

    ``fronts`` holds ``(normalized_unfairness, normalized_utility)`` array
    pairs, or None for queries excluded from normalization.  Each front is
    interpolated linearly and clamped to its own range.
    """
    if grid_size < 2:
        raise InvalidGrid("grid needs at least two levels")
    grid = np.linspace(0.0, 1.0, grid_size)
    curves = []
    excluded = 0
    for fr in fronts:
        if fr is None:
            excluded += 1
            continue
        nf, nu = (np.asarray(a, dtype=float) for a in fr)
        if nf.size == 0:
            raise EmptyFront("a front has no points")
        order = np.argsort(nf, kind="stable")
        curves.append(np.interp(grid, nf[order], nu[order]))
    if not curves:
        raise EmptyFront("no front left to aggregate")
    mean = np.mean(curves, axis=0)
    return AggregatedCurve(grid, mean, np.full(grid_size, len(curves)), excluded)


def read_fronts_csv(path, method: Optional[str] = None) -> list:
    """Normalized fronts per query from a fronts CSV (rows with blank values skipped)."""
    per_query = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            if method is not None and row["method"] != method:
                continue
            key = (row["queryId"], row["method"])
            if not row["normalizedUnfairness"]:
                per_query.setdefault(key, None)
                continue
            cur = per_query.get(key) or ([], [])
            cur[0].append(float(row["normalizedUnfairness"]))
            cur[1].append(float(row["normalizedUtility"]))
            per_query[key] = cur
    return [None if v is None else (np.array(v[0]), np.array(v[1])) for v in per_query.values()]


# -- benchmark --------------------------------------------------------------------------

class BenchRow(NamedTuple):
    query_id: str
    n: int
    sphere_seconds: float
    sphere_points: int
    birkhoff_seconds: float
    birkhoff_points: int
    caratheodory_seconds: float
    bvn_seconds: float
    caratheodory_atoms: int
    bvn_atoms: int


def bench_query(instance: QueryInstance, k: int = 3, n_points: int = 20, n_alphas: int = 20,
                alpha_decompose: float = 0.5) -> BenchRow:
    """Time front construction and decomposition for one query.

    The geodesic method samples each final arc so that at least ``n_points``
    points come out; the bistochastic QP is solved on ``n_alphas`` trade-off
    weights.  Both decompositions are applied to the QP solution at
    ``alpha_decompose``: the matrix goes to Birkhoff-von Neumann, its
    exposure vector to Caratheodory.
    """
    arcs = 2 ** k
    n_sample = max(2, math.ceil((n_points - 1) / arcs) + 1)
    t0 = time.perf_counter()
    sphere = sphere_expo_front(instance, k, n_sample)
    t_sphere = time.perf_counter() - t0

    alphas = np.linspace(0.0, 1.0, n_alphas)
    t0 = time.perf_counter()
    qp_front, _ = birkhoff_qp_front(instance, alphas)
    t_qp = time.perf_counter() - t0

    B = BirkhoffQP(instance).solve(alpha_decompose).B
    t0 = time.perf_counter()
    bvn = bvn_decompose(B)
    t_bvn = time.perf_counter() - t0
    t0 = time.perf_counter()
    cara = caratheodory_decompose(B @ instance.gamma, instance.gamma)
    t_cara = time.perf_counter() - t0
    return BenchRow(instance.query_id, instance.n, t_sphere, len(sphere), t_qp, len(qp_front),
                    t_cara, t_bvn, len(cara), len(bvn))


def bench(instances, **kw) -> list:
    if not instances:
        raise EmptyDataset("the dataset has no queries")
    return [bench_query(q, **kw) for q in instances]


def bench_table(rows) -> dict:
    """Mean timings per method and the two speed ratios."""
    mean = {f: float(np.mean([getattr(r, f) for r in rows])) for f in BenchRow._fields[2:]}
    return {
        "queries": len(rows),
        "sphereExpoSeconds": mean["sphere_seconds"],
        "sphereExpoPoints": mean["sphere_points"],
        "birkhoffQpSeconds": mean["birkhoff_seconds"],
        "birkhoffQpPoints": mean["birkhoff_points"],
        "caratheodorySeconds": mean["caratheodory_seconds"],
        "bvnSeconds": mean["bvn_seconds"],
        "caratheodoryAtoms": mean["caratheodory_atoms"],
        "bvnAtoms": mean["bvn_atoms"],
        "bvnOverCaratheodory": mean["bvn_seconds"] / max(mean["caratheodory_seconds"], 1e-12),
        "birkhoffOverSphere": mean["birkhoff_seconds"] / max(mean["sphere_seconds"], 1e-12),
    }


def format_bench_table(table: dict) -> str:
    lines = [f"{'method':<28}{'mean seconds':>14}{'size':>10}",
             f"{'sphere-expo front':<28}{table['sphereExpoSeconds']:>14.4f}{table['sphereExpoPoints']:>10.1f}",
             f"{'birkhoff-qp front':<28}{table['birkhoffQpSeconds']:>14.4f}{table['birkhoffQpPoints']:>10.1f}",
             f"{'caratheodory decomposition':<28}{table['caratheodorySeconds']:>14.4f}{table['caratheodoryAtoms']:>10.1f}",
             f"{'bvn decomposition':<28}{table['bvnSeconds']:>14.4f}{table['bvnAtoms']:>10.1f}",
             f"bvn / caratheodory time: {table['bvnOverCaratheodory']:.1f}x",
             f"birkhoff-qp / sphere-expo time: {table['birkhoffOverSphere']:.1f}x"]
    return "\n".join(lines)
