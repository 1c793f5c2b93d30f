"""Synthetic data generation, recall/QPS measurement, sweeps, and the
invariant-verification suite.

Distance-computation counts are the primary cross-machine comparison
metric (deterministic); QPS is reported alongside, timed over the query
loop only and averaged over repetitions. All randomized paths take a seed
and produce bit-identical non-timing outputs regardless of worker count.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .construction import (_ndg_select_base, build_exact_ndg,
                           count_strong_components)
from .errors import FormatError, UsageError
from .index import MagIndex, build_mag, index_to_bytes, load_index, materialize
from .io import GroundTruth, compute_ground_truth
from .metrics import Dataset, MetricKind
from .search import (SearchGraph, SearchParams, SearchResult, anms_search,
                     greedy_search, verify_scaling_duality)
from .stats import dominator_probability, dominator_probability_mc, self_dominator_set

BENCH_CSV_HEADER = "ls,alpha,m,R,recall,qps,dist_comps,hops"
SCALE_CSV_HEADER = "n,ls,recall,dist_comps,flagged"


@dataclass(frozen=True)
class SyntheticSpec:
    """Deterministic synthetic dataset recipe.

    kinds: ``gaussian`` (element-wise standard normal), ``blobs``
    (separated clusters, low Euclidean DBI), ``heavytail`` (Gaussian
    directions scaled by log-normal radii, wide norm spread).
    """

    kind: str
    n: int
    dim: int
    seed: int = 0
    n_clusters: int = 8       # blobs
    center_scale: float = 10.0  # blobs
    spread: float = 1.0       # blobs
    sigma_log: float = 0.5    # heavytail

    def __post_init__(self):
        if self.kind not in ("gaussian", "blobs", "heavytail"):
            raise UsageError(f"unknown synthetic kind {self.kind!r}")
        if self.n < 1 or self.dim < 1:
            raise UsageError("need n >= 1 and dim >= 1")


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "gaussian":
        data = rng.standard_normal((spec.n, spec.dim))
    elif spec.kind == "blobs":
        centers = rng.standard_normal((spec.n_clusters, spec.dim)) * spec.center_scale
        labels = np.arange(spec.n) % spec.n_clusters
        data = centers[labels] + rng.standard_normal((spec.n, spec.dim)) * spec.spread
    else:  # heavytail
        dirs = rng.standard_normal((spec.n, spec.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = np.sqrt(spec.dim) * rng.lognormal(0.0, spec.sigma_log, spec.n)
        data = dirs * radii[:, None]
    return Dataset(np.ascontiguousarray(data, dtype=np.float32))


def recall_at_k(results: list[np.ndarray], gt: GroundTruth, k: int) -> float:
    """Mean over queries of |result ids within the first k true ids| / k."""
    if k > gt.k:
        raise UsageError(f"recall@{k} needs ground-truth rows of >= {k} ids, have {gt.k}")
    if len(results) != len(gt.rows):
        raise UsageError(f"{len(results)} result rows vs {len(gt.rows)} ground-truth rows")
    total = 0
    for res, row in zip(results, gt.rows):
        total += len(np.intersect1d(np.asarray(res), row[:k]))
    return total / (k * len(results))


def run_queries(graph: SearchGraph, dataset: Dataset, queries: Dataset,
                ls: int, k: int, m: int = 0, seed: int = 0,
                metric: MetricKind = MetricKind.INNER_PRODUCT,
                threads: int = 1) -> list[SearchResult]:
    """Search the whole panel; per-query seeds derive from (seed, query id).

    m > 0 uses the metric-switch search (IP target); m = 0 runs plain
    greedy search under ``metric``. Output order and content do not
    depend on the thread count.
    """
    if m > 0 and metric is not MetricKind.INNER_PRODUCT:
        raise UsageError("the metric switch targets inner product; use m=0 for l2")

    def one(qid: int) -> SearchResult:
        params = SearchParams(ls=ls, k=k, m=m, seed=(seed, qid))
        q = queries.vector(qid)
        if m > 0:
            return anms_search(graph, dataset, q, params)
        return greedy_search(graph, dataset, q, params, metric)

    if threads <= 1:
        return [one(i) for i in range(queries.n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(queries.n)))


@dataclass
class BenchRecord:
    ls: int
    alpha: float
    m: int
    R: int
    recall: float
    qps: float
    dist_comps: float
    hops: float

    def csv_row(self) -> str:
        return (f"{self.ls},{self.alpha},{self.m},{self.R},{self.recall:.6f},"
                f"{self.qps:.2f},{self.dist_comps:.2f},{self.hops:.2f}")


def bench_one(graph: SearchGraph, dataset: Dataset, queries: Dataset,
              gt: GroundTruth, ls: int, k: int, m: int, seed: int,
              threads: int = 1, reps: int = 3) -> BenchRecord:
    """One measured point: recall/counters from the first rep, QPS from all reps."""
    times = []
    results = None
    for _ in range(max(1, reps)):
        t0 = time.perf_counter()
        out = run_queries(graph, dataset, queries, ls=ls, k=k, m=m, seed=seed,
                          threads=threads)
        times.append(time.perf_counter() - t0)
        if results is None:
            results = out
    recall = recall_at_k([r.ids for r in results], gt, k)
    qps = queries.n / (sum(times) / len(times))
    return BenchRecord(
        ls=ls, alpha=graph.alpha, m=m, R=graph.R, recall=recall, qps=qps,
        dist_comps=float(np.mean([r.stats.dist_comps for r in results])),
        hops=float(np.mean([r.stats.hops for r in results])))


def run_benchmark(index: MagIndex, dataset: Dataset, queries: Dataset,
                  gt: GroundTruth, ls_list: list[int], R: int, alpha: float,
                  m: int = 0, k: int = 100, seed: int = 0, threads: int = 1,
                  reps: int = 3) -> list[BenchRecord]:
    """Recall/QPS sweep over pool sizes on one materialized graph."""
    if queries.dim != dataset.dim:
        raise UsageError("query dimension does not match the dataset")
    if gt.rows.shape[0] != queries.n:
        raise UsageError("ground truth does not cover the query panel")
    graph = materialize(index, R=R, alpha=alpha)
    return [bench_one(graph, dataset, queries, gt, ls=ls, k=k, m=m, seed=seed,
                      threads=threads, reps=reps)
            for ls in ls_list]


def records_to_csv(records: list[BenchRecord], config: dict | None = None) -> str:
    lines = []
    if config is not None:
        lines.append("# " + json.dumps(config, sort_keys=True))
    lines.append(BENCH_CSV_HEADER)
    lines.extend(r.csv_row() for r in records)
    return "\n".join(lines) + "\n"


DEFAULT_LS_SCHEDULE = (16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512, 768,
                       1024, 1536, 2048, 3072, 4096)


def find_ls_for_recall(graph: SearchGraph, dataset: Dataset, queries: Dataset,
                       gt: GroundTruth, target: float, k: int, m: int = 0,
                       seed: int = 0, schedule=DEFAULT_LS_SCHEDULE) -> BenchRecord | None:
    """Walk the pool-size schedule until panel recall reaches the target."""
    for ls in schedule:
        if ls < k:
            continue
        if ls > dataset.n:
            break
        rec = bench_one(graph, dataset, queries, gt, ls=ls, k=k, m=m, seed=seed,
                        reps=1)
        if rec.recall >= target:
            return rec
    return None


@dataclass
class ScaleRecord:
    n: int
    ls: int
    recall: float
    dist_comps: float
    flagged: bool  # recall target unreachable on the schedule

    def csv_row(self) -> str:
        return (f"{self.n},{self.ls},{self.recall:.6f},{self.dist_comps:.2f},"
                f"{int(self.flagged)}")


def run_scaling_study(sizes: list[int], dim: int, K: int, K1: int, K2: int,
                      build_ls: int, R: int, alpha: float, m: int = 0,
                      k: int = 10, n_queries: int = 100, target: float = 0.95,
                      seed: int = 0, workers: int = 1,
                      passes: int = 3) -> list[ScaleRecord]:
    """Distance computations at matched recall across dataset sizes."""
    out = []
    for idx, n in enumerate(sizes):
        data = generate_synthetic(SyntheticSpec("gaussian", n=n, dim=dim,
                                                seed=seed + idx))
        queries = generate_synthetic(SyntheticSpec("gaussian", n=n_queries, dim=dim,
                                                   seed=seed + 1000 + idx))
        gt = compute_ground_truth(data, queries, k, MetricKind.INNER_PRODUCT)
        index = build_mag(data, K=K, K1=K1, K2=K2, ls=build_ls, seed=seed,
                          workers=workers, passes=passes)
        graph = materialize(index, R=R, alpha=alpha)
        rec = find_ls_for_recall(graph, data, queries, gt, target=target, k=k,
                                 m=m, seed=seed)
        if rec is None:
            out.append(ScaleRecord(n=n, ls=0, recall=0.0, dist_comps=0.0,
                                   flagged=True))
        else:
            out.append(ScaleRecord(n=n, ls=rec.ls, recall=rec.recall,
                                   dist_comps=rec.dist_comps, flagged=False))
    return out


def scale_records_to_csv(records: list[ScaleRecord], config: dict | None = None) -> str:
    lines = []
    if config is not None:
        lines.append("# " + json.dumps(config, sort_keys=True))
    lines.append(SCALE_CSV_HEADER)
    lines.extend(r.csv_row() for r in records)
    return "\n".join(lines) + "\n"


@dataclass
class VerifyLimits:
    max_n_exact: int = 2000      # exact dominator-graph checks gate
    mc_samples: int = 20000
    mc_tolerance: float = 0.03
    duality_queries: int = 50


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class VerifyReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append(CheckResult(name, bool(passed), detail))

    def render(self) -> str:
        width = max((len(c.name) for c in self.checks), default=0)
        lines = [f"{c.name.ljust(width)}  {'PASS' if c.passed else 'FAIL'}  {c.detail}"
                 for c in self.checks]
        lines.append(f"{'overall'.ljust(width)}  {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def verify_suite(dataset: Dataset | None = None, spec: SyntheticSpec | None = None,
                 index: MagIndex | None = None,
                 limits: VerifyLimits = VerifyLimits()) -> VerifyReport:
    """Run the cross-module invariant checks and collect a pass/fail table."""
    report = VerifyReport()
    if dataset is None:
        spec = spec or SyntheticSpec("gaussian", n=1000, dim=8, seed=0)
        dataset = generate_synthetic(spec)
    rng = np.random.default_rng(12345)

    # dominator-graph structure (tie-tolerant so duplicated points pass)
    if dataset.n <= limits.max_n_exact:
        n = dataset.n
        ndg = build_exact_ndg(dataset)
        scc = count_strong_components(ndg.ip, n)
        report.add("ndg-strong-connectivity", scc == 1, f"components={scc}")

        base = dataset.data.astype(np.float64)
        gram = base @ base.T
        self_dots = np.diagonal(gram).copy()
        np.fill_diagonal(gram, -np.inf)
        weak_dom = self_dots >= gram.max(axis=1)

        ids = np.arange(n)
        sample = rng.choice(n, size=min(n, 100), replace=False)
        violations = 0
        mismatches = 0
        for i in sample:
            i = int(i)
            others = ids[ids != i]
            order = others[np.lexsort((others, -gram[i, others]))]
            accepted = _ndg_select_base(i, order, base, None)
            violations += int((~weak_dom[accepted[1:]]).sum())
            expected = order[(np.arange(len(order)) == 0) | weak_dom[order]]
            mismatches += int(not np.array_equal(accepted, expected.astype(np.int32)))
        report.add("ndg-dominator-structure", violations == 0,
                   f"violations={violations} over {len(sample)} nodes")
        report.add("ndg-select-census-agreement", mismatches == 0,
                   f"mismatching nodes={mismatches}")
    else:
        report.add("ndg-checks-skipped", True,
                   f"n={dataset.n} above exact gate {limits.max_n_exact}")

    # per-pair dominator probability, Monte Carlo vs the closed form
    worst = 0.0
    for j, r in enumerate((0.5, 1.0, 2.0, 3.0)):
        est = dominator_probability_mc(r, d=32, n_samples=limits.mc_samples,
                                       seed=777 + j)
        worst = max(worst, abs(est - dominator_probability(r)))
    report.add("dominator-probability-mc", worst <= limits.mc_tolerance,
               f"max |mc - phi| = {worst:.4f} (tol {limits.mc_tolerance})")
    report.add("dominator-probability-tail", dominator_probability(4.0) >= 0.9999,
               f"phi(4) = {dominator_probability(4.0):.6f}")

    # scaling duality on a query subsample
    nq = min(limits.duality_queries, 50)
    qdata = Dataset(np.ascontiguousarray(
        rng.standard_normal((nq, dataset.dim)), dtype=np.float32))
    duality = verify_scaling_duality(dataset, qdata)
    report.add("scaling-duality-bruteforce", duality.nn_agreement == 1.0,
               f"agreement={duality.nn_agreement:.3f} over {nq} queries "
               f"({duality.n_tied} tied excluded)")

    # index invariants, either the provided index or a freshly built one
    if index is None and dataset.n >= 32:
        index = build_mag(dataset, K=min(16, dataset.n - 1),
                          K1=min(8, dataset.n - 1), K2=8,
                          ls=max(16, min(32, dataset.n)), seed=7)
    if index is not None:
        try:
            index.validate(dataset if index.n == dataset.n else None)
            report.add("index-invariants", True,
                       f"n={index.n}, K1={index.K1}, K2={index.K2}")
        except UsageError as exc:
            report.add("index-invariants", False, str(exc))
        try:
            blob = index_to_bytes(index)
            with tempfile.NamedTemporaryFile(delete=False, suffix=".mag") as f:
                f.write(blob)
                tmp = f.name
            try:
                again = index_to_bytes(load_index(tmp))
            finally:
                os.unlink(tmp)
            report.add("index-roundtrip", blob == again, f"{len(blob)} bytes")
        except (UsageError, FormatError, OSError) as exc:
            report.add("index-roundtrip", False, str(exc))

    # pool invariants exercised through an instrumented search
    if index is not None and index.n == dataset.n:
        graph = materialize(index, R=max(8, index.K1), alpha=0.5)
        q = rng.standard_normal(dataset.dim).astype(np.float32)
        params = SearchParams(ls=min(64, dataset.n), k=min(10, dataset.n), seed=3)
        try:
            greedy_search(graph, dataset, q, params, MetricKind.INNER_PRODUCT,
                          debug=True)
            anms_search(graph, dataset, q,
                        SearchParams(ls=min(64, dataset.n), k=min(10, dataset.n),
                                     m=8, seed=3), debug=True)
            report.add("pool-invariants", True, "instrumented searches clean")
        except AssertionError as exc:
            report.add("pool-invariants", False, str(exc))

    return report
