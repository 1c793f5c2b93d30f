"""Greedy beam search over a materialized graph, with optional metric switch.

The traversal loop: seed a bounded candidate pool, repeatedly expand the
best unvisited entry, score its unseen neighbors, insert them, truncate
to the pool bound, and stop when every pool entry has been expanded.

The two-stage variant runs that loop under squared Euclidean distance for
m expansions (pulling the pool toward the query direction), then re-scores
the surviving pool under inner product — visited flags intact — and runs
to termination. m=0 is exactly the plain inner-product search.

Scores are float32 by default; ``high_precision=True`` switches the
scoring to float64 for oracle-grade verification runs.
"""

from __future__ import annotations

import enum
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .metrics import Dataset, MetricKind, score_batch, sort_key


class EntryPolicy(enum.Enum):
    RANDOM_SEEDED = "random"
    FIXED_MEDOID = "medoid"


@dataclass(frozen=True)
class SearchGraph:
    """Immutable runtime adjacency under a fixed out-degree cap and IP-edge ratio."""

    R: int
    alpha: float
    adjacency: np.ndarray  # (n, <=R) int32, padded with -1
    counts: np.ndarray     # (n,) int32 valid neighbors per row

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return self.adjacency[i, :self.counts[i]]

    def max_out_degree(self) -> int:
        return int(self.counts.max()) if self.n else 0


@dataclass(frozen=True)
class SearchParams:
    ls: int                      # candidate pool bound
    k: int                       # results to return
    m: int = 0                   # Euclidean expansions before the IP switch
    seed: int | tuple[int, ...] = 0
    entry: EntryPolicy = EntryPolicy.RANDOM_SEEDED
    entry_ids: tuple[int, ...] | None = None  # explicit seeds override the policy

    def __post_init__(self):
        if not 1 <= self.k <= self.ls:
            raise UsageError(f"need 1 <= k <= ls, got k={self.k}, ls={self.ls}")
        if self.m < 0:
            raise UsageError(f"m must be >= 0, got {self.m}")


@dataclass
class SearchStats:
    dist_comps: int = 0
    hops: int = 0


@dataclass
class SearchResult:
    ids: np.ndarray  # (k,) int32 best-first
    stats: SearchStats
    trace: list[int] | None = None  # expansion order, when recorded


class CandidatePool:
    """Bounded pool of (id, score, visited) kept sorted best-first.

    Keys are orientation-adjusted (score, id) tuples so ascending order is
    best-first under either metric, with ties broken by lower id. A scan
    hint makes repeated first-unvisited lookups cheap: every index below
    the hint is known to be visited.
    """

    def __init__(self, capacity: int, metric: MetricKind):
        if capacity < 1:
            raise UsageError(f"pool capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.metric = metric
        self._keys: list[tuple[float, int]] = []
        self._visited: list[bool] = []
        self._hint = 0

    def __len__(self) -> int:
        return len(self._keys)

    def insert(self, vid: int, raw_score: float) -> bool:
        """Insert unless the pool is full and the entry is no better than the worst.

        Callers must not offer the same id twice per query (the traversal's
        seen-table guarantees that); an id evicted from a full pool can
        never re-qualify because the pool only ever improves.
        """
        return self._insert_key(sort_key(self.metric, raw_score, vid))

    def _insert_key(self, key: tuple[float, int]) -> bool:
        """Hot path: key is the already orientation-adjusted (score, id)."""
        keys = self._keys
        visited = self._visited
        if len(keys) >= self.capacity:
            if key >= keys[-1]:
                return False
            keys.pop()
            visited.pop()
        pos = bisect_left(keys, key)
        keys.insert(pos, key)
        visited.insert(pos, False)
        if pos < self._hint:
            self._hint = pos
        return True

    def pop_best_unvisited(self) -> int:
        """Mark and return the best unvisited id, or -1 when none remain."""
        keys, visited = self._keys, self._visited
        i = self._hint
        while i < len(keys) and visited[i]:
            i += 1
        if i >= len(keys):
            self._hint = len(keys)
            return -1
        visited[i] = True
        self._hint = i + 1
        return keys[i][1]

    def ids_best_first(self) -> np.ndarray:
        return np.fromiter((k[1] for k in self._keys), dtype=np.int32,
                           count=len(self._keys))

    def resort(self, metric: MetricKind, raw_scores: dict[int, float]) -> None:
        """Re-key every entry under a new metric, preserving visited flags."""
        flags = {key[1]: vis for key, vis in zip(self._keys, self._visited)}
        rekeyed = sorted(sort_key(metric, raw_scores[vid], vid) for vid in flags)
        self.metric = metric
        self._keys = rekeyed
        self._visited = [flags[key[1]] for key in rekeyed]
        self._hint = 0

    def check_invariants(self) -> None:
        if len(self._keys) > self.capacity:
            raise AssertionError("pool exceeded its capacity bound")
        if any(self._keys[i] >= self._keys[i + 1] for i in range(len(self._keys) - 1)):
            raise AssertionError("pool keys not strictly sorted best-first")
        ids = [k[1] for k in self._keys]
        if len(set(ids)) != len(ids):
            raise AssertionError("pool contains duplicate ids")


def euclidean_medoid(dataset: Dataset) -> int:
    """Id of the point nearest the dataset mean (ties to the lower id)."""
    base = dataset.data.astype(np.float64)
    mean = base.mean(axis=0)
    diff = base - mean
    return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def _entry_ids(graph: SearchGraph, dataset: Dataset, params: SearchParams,
               rng: np.random.Generator) -> np.ndarray:
    n = graph.n
    want = min(params.ls, n)
    if params.entry_ids is not None:
        # explicit seeds are not truncated; the pool keeps the best ls
        seen: set[int] = set()
        ids = []
        for vid in params.entry_ids:
            vid = int(vid)
            if not 0 <= vid < n:
                raise UsageError(f"entry id {vid} out of range [0, {n})")
            if vid not in seen:
                seen.add(vid)
                ids.append(vid)
        return np.asarray(ids, dtype=np.int64)
    if params.entry is EntryPolicy.FIXED_MEDOID:
        mid = euclidean_medoid(dataset)
        ids = [mid]
        seen = {mid}
        for nbr in graph.neighbors(mid).tolist():
            if nbr not in seen:
                seen.add(nbr)
                ids.append(nbr)
            if len(ids) == want:
                break
        return np.asarray(ids, dtype=np.int64)
    return rng.choice(n, size=want, replace=False)


def _init_state(graph: SearchGraph, dataset: Dataset, q: np.ndarray,
                params: SearchParams, metric: MetricKind, high_precision: bool):
    rng = np.random.default_rng(params.seed)
    entries = _entry_ids(graph, dataset, params, rng)
    pool = CandidatePool(params.ls, metric)
    seen = np.zeros(graph.n, dtype=bool)
    seen[entries] = True
    scores = score_batch(metric, q, dataset.data[entries], high_precision)
    stats = SearchStats(dist_comps=len(entries))
    if metric.larger_is_better:
        scores = -scores
    insert = pool._insert_key
    for key in zip(scores.tolist(), entries.tolist()):
        insert(key)
    return pool, seen, stats


def _expand_loop(pool: CandidatePool, graph: SearchGraph, dataset: Dataset,
                 q: np.ndarray, metric: MetricKind, seen: np.ndarray,
                 stats: SearchStats, max_expansions: int | None = None,
                 high_precision: bool = False, trace: list[int] | None = None,
                 debug: bool = False) -> None:
    data = dataset.data
    flip = metric.larger_is_better
    insert = pool._insert_key
    pop = pool.pop_best_unvisited
    done = 0
    while max_expansions is None or done < max_expansions:
        vid = pop()
        if vid < 0:
            break
        stats.hops += 1
        done += 1
        if trace is not None:
            trace.append(vid)
        nbrs = graph.neighbors(vid)
        fresh = nbrs[~seen[nbrs]]
        if fresh.size:
            seen[fresh] = True
            scores = score_batch(metric, q, data[fresh], high_precision)
            stats.dist_comps += fresh.size
            if flip:
                scores = -scores
            for key in zip(scores.tolist(), fresh.tolist()):
                insert(key)
        if debug:
            pool.check_invariants()


def _check_query(graph: SearchGraph, dataset: Dataset, q, params: SearchParams) -> np.ndarray:
    if graph.n == 0:
        raise UsageError("empty graph")
    if graph.n != dataset.n:
        raise UsageError(f"graph has {graph.n} nodes but dataset has {dataset.n}")
    qv = np.asarray(q, dtype=np.float32)
    if qv.ndim != 1 or qv.shape[0] != dataset.dim:
        raise UsageError(f"query shape {qv.shape} does not match dim {dataset.dim}")
    if params.k > dataset.n:
        raise UsageError(f"k={params.k} exceeds n={dataset.n}")
    return qv


def greedy_search(graph: SearchGraph, dataset: Dataset, q, params: SearchParams,
                  metric: MetricKind, high_precision: bool = False,
                  record_trace: bool = False, debug: bool = False) -> SearchResult:
    """Single-metric beam search: expand best-unvisited until pool exhaustion."""
    qv = _check_query(graph, dataset, q, params)
    pool, seen, stats = _init_state(graph, dataset, qv, params, metric, high_precision)
    trace: list[int] | None = [] if record_trace else None
    _expand_loop(pool, graph, dataset, qv, metric, seen, stats,
                 high_precision=high_precision, trace=trace, debug=debug)
    ids = pool.ids_best_first()[:params.k]
    return SearchResult(ids=ids, stats=stats, trace=trace)


def anms_search(graph: SearchGraph, dataset: Dataset, q, params: SearchParams,
                high_precision: bool = False, record_trace: bool = False,
                debug: bool = False) -> SearchResult:
    """Euclidean navigation for m expansions, then switch the metric to IP.

    The switch re-scores the surviving pool under inner product (counted
    as distance computations), keeps visited flags, and resumes the loop.
    Returns the top k by inner product.
    """
    if params.m == 0:
        return greedy_search(graph, dataset, q, params, MetricKind.INNER_PRODUCT,
                             high_precision=high_precision,
                             record_trace=record_trace, debug=debug)
    qv = _check_query(graph, dataset, q, params)
    pool, seen, stats = _init_state(graph, dataset, qv, params,
                                    MetricKind.EUCLIDEAN, high_precision)
    trace: list[int] | None = [] if record_trace else None
    _expand_loop(pool, graph, dataset, qv, MetricKind.EUCLIDEAN, seen, stats,
                 max_expansions=params.m, high_precision=high_precision,
                 trace=trace, debug=debug)

    ids = pool.ids_best_first()
    ip_scores = score_batch(MetricKind.INNER_PRODUCT, qv, dataset.data[ids],
                            high_precision)
    stats.dist_comps += len(ids)
    pool.resort(MetricKind.INNER_PRODUCT,
                dict(zip(ids.tolist(), ip_scores.tolist())))

    _expand_loop(pool, graph, dataset, qv, MetricKind.INNER_PRODUCT, seen, stats,
                 high_precision=high_precision, trace=trace, debug=debug)
    out = pool.ids_best_first()[:params.k]
    return SearchResult(ids=out, stats=stats, trace=trace)


@dataclass
class DualityReport:
    """Agreement between plain MIPS and Euclidean search on the scaled query."""

    nn_agreement: float          # brute-force: NN of mu*q equals the MIPS argmax
    trace_agreement: float | None  # identical expansion sequences on the graph
    n_queries: int = 0
    n_tied: int = 0              # queries excluded for a tied MIPS top-1


def verify_scaling_duality(dataset: Dataset, queries: Dataset,
                           mu: float | None = None,
                           graph: SearchGraph | None = None,
                           params: SearchParams | None = None) -> DualityReport:
    """Check that scaling a query by a large mu turns MIPS into Euclidean NNS.

    mu=None picks 1e6 * (max vector norm / query norm) per query. When a
    graph is given, also replays the greedy traversal for q under IP and
    for mu*q under Euclidean (float64 scoring) and reports the fraction of
    queries whose expansion sequences match exactly.
    """
    from .io import brute_force_topk  # local import keeps io free of search deps

    if mu is not None and mu <= 0:
        raise UsageError(f"mu must be positive, got {mu}")
    base64 = dataset.data.astype(np.float64)
    max_norm = float(np.linalg.norm(base64, axis=1).max())

    agree = 0
    tied = 0
    trace_agree = 0
    for i in range(queries.n):
        q = queries.vector(i).astype(np.float64)
        qn = float(np.linalg.norm(q))
        if qn == 0:
            raise UsageError("zero query vector has no scaling direction")
        factor = mu if mu is not None else 1e6 * max_norm / qn

        ips = base64 @ q
        top2 = np.sort(ips)[-2:] if dataset.n >= 2 else None
        if top2 is not None and top2[0] == top2[1]:
            tied += 1
            continue
        mips_id = int(brute_force_topk(dataset, q, 1, MetricKind.INNER_PRODUCT)[0])
        nn_id = int(brute_force_topk(dataset, factor * q, 1, MetricKind.EUCLIDEAN)[0])
        if mips_id == nn_id:
            agree += 1

        if graph is not None:
            p = params or SearchParams(ls=min(64, dataset.n), k=1, seed=0)
            r_ip = greedy_search(graph, dataset, q.astype(np.float32), p,
                                 MetricKind.INNER_PRODUCT, high_precision=True,
                                 record_trace=True)
            r_nn = greedy_search(graph, dataset, (factor * q).astype(np.float32), p,
                                 MetricKind.EUCLIDEAN, high_precision=True,
                                 record_trace=True)
            if r_ip.trace == r_nn.trace:
                trace_agree += 1

    considered = queries.n - tied
    return DualityReport(
        nn_agreement=agree / considered if considered else 1.0,
        trace_agreement=(trace_agree / queries.n if graph is not None else None),
        n_queries=queries.n,
        n_tied=tied,
    )
