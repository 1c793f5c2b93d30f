"""K-NN graph builders and the two edge-selection rules.

Edge selection is what turns a raw K-NN graph into a navigable index:

* Euclidean pruning keeps candidate p only when p is closer to the node
  than to every already-kept neighbor, which removes detour edges while
  preserving monotone search paths.
* Dominator selection scans candidates in descending inner-product order.
  The first candidate (the potential out-dominator) is always accepted;
  every later candidate y is accepted iff nothing in the candidate set or
  the list owner dominates it: <y,y> >= <y,z> for every other z. Accepted
  points beyond the first are therefore exactly the self-dominators of
  the scanned set, which also guarantees the pairwise non-domination
  conditions among accepted points (no accepted point beyond the first
  can be dominated by, or dominate, another accepted non-first point).

Graph-side arithmetic runs in float64: these are construction-time
decisions, so order stability against the float64 oracle matters more
than kernel speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import UsageError
from .metrics import Dataset

EXACT_NDG_MAX_N = 20000  # quadratic; exists to verify dominator structure, not to index
_GRAM_PATH_MAX = 512     # candidate counts up to this use one gram matrix per node


@dataclass
class KnnGraph:
    """Per-node K nearest Euclidean neighbors, rows sorted by (distance, id)."""

    k: int
    neighbors: np.ndarray  # (n, k) int32
    dists: np.ndarray      # (n, k) float64 squared distances

    @property
    def n(self) -> int:
        return self.neighbors.shape[0]

    def validate(self) -> None:
        n = self.n
        for i in range(n):
            row = self.neighbors[i]
            if (row == i).any():
                raise UsageError(f"node {i} has a self-loop")
            if len(np.unique(row)) != self.k:
                raise UsageError(f"node {i} has duplicate neighbors")
            keys = list(zip(self.dists[i], row))
            if keys != sorted(keys):
                raise UsageError(f"node {i} row not sorted by (distance, id)")


@dataclass
class EdgeList:
    """Per-node neighbor ids split by edge kind."""

    euclid: list[np.ndarray]  # ascending distance, ties by id
    ip: list[np.ndarray]      # descending inner product with the node, ties by id

    @property
    def n(self) -> int:
        return len(self.euclid)


def _pairwise_sq(block: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (len(block), len(base)) float64."""
    bb = np.einsum("ij,ij->i", block, block)
    aa = np.einsum("ij,ij->i", base, base)
    d2 = bb[:, None] - 2.0 * block @ base.T + aa[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def _topk_row(d2_row: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k smallest by (distance, id), handling ties at the boundary."""
    part = np.argpartition(d2_row, k - 1)[:k]
    theta = d2_row[part].max()
    cand = np.nonzero(d2_row <= theta)[0]
    order = np.lexsort((cand, d2_row[cand]))
    sel = cand[order[:k]]
    return sel.astype(np.int32), d2_row[sel]


def build_exact_knn(dataset: Dataset, K: int, chunk: int = 512) -> KnnGraph:
    """Exact K nearest others per node by brute force, O(n^2)."""
    n = dataset.n
    if not 1 <= K < n:
        raise UsageError(f"K={K} out of range [1, {n})")
    base = dataset.data.astype(np.float64)
    neighbors = np.empty((n, K), dtype=np.int32)
    dists = np.empty((n, K), dtype=np.float64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = _pairwise_sq(base[start:stop], base)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        for local in range(stop - start):
            ids, dd = _topk_row(d2[local], K)
            neighbors[start + local] = ids
            dists[start + local] = dd
    return KnnGraph(k=K, neighbors=neighbors, dists=dists)


def build_nndescent_knn(dataset: Dataset, K: int, seed: int = 0,
                        iters: int = 10) -> KnnGraph:
    """Approximate K-NN graph by neighbor-of-neighbor descent.

    Deterministic given the seed. iters=0 returns the random initial
    graph. Converges early when an iteration changes no row.
    """
    n = dataset.n
    if not 1 <= K < n:
        raise UsageError(f"K={K} out of range [1, {n})")
    base = dataset.data.astype(np.float64)
    rng = np.random.default_rng(seed)

    neighbors = np.empty((n, K), dtype=np.int32)
    dists = np.empty((n, K), dtype=np.float64)
    for i in range(n):
        ids = rng.choice(n - 1, size=K, replace=False).astype(np.int32)
        ids[ids >= i] += 1  # skip self
        diff = base[ids] - base[i]
        d2 = np.einsum("ij,ij->i", diff, diff)
        order = np.lexsort((ids, d2))
        neighbors[i], dists[i] = ids[order], d2[order]

    for _ in range(iters):
        # reverse edges, capped at K per target in (source-sorted) order
        src = np.repeat(np.arange(n, dtype=np.int32), K)
        dst = neighbors.ravel()
        rev_order = np.lexsort((src, dst))
        rev_dst, rev_src = dst[rev_order], src[rev_order]
        starts = np.searchsorted(rev_dst, np.arange(n))
        stops = np.searchsorted(rev_dst, np.arange(n) + 1)

        changed = 0
        for i in range(n):
            rev = rev_src[starts[i]:min(stops[i], starts[i] + K)]
            two_hop = neighbors[neighbors[i]].ravel()
            cand = np.unique(np.concatenate((neighbors[i], rev, two_hop)))
            cand = cand[cand != i]
            diff = base[cand] - base[i]
            d2 = np.einsum("ij,ij->i", diff, diff)
            merged_ids = np.concatenate((neighbors[i], cand))
            merged_d2 = np.concatenate((dists[i], d2))
            order = np.lexsort((merged_ids, merged_d2))
            ids_sorted = merged_ids[order]
            _, first = np.unique(ids_sorted, return_index=True)
            keep = order[np.sort(first)[:K]]
            new_ids = merged_ids[keep].astype(np.int32)
            if not np.array_equal(new_ids, neighbors[i]):
                changed += 1
            neighbors[i], dists[i] = new_ids, merged_d2[keep]
        if changed == 0:
            break

    return KnnGraph(k=K, neighbors=neighbors, dists=dists)


def knn_recall(approx: KnnGraph, exact: KnnGraph) -> float:
    """Mean per-node fraction of exact neighbors present in the approximate graph."""
    if approx.n != exact.n or approx.k != exact.k:
        raise UsageError("graphs must share n and k")
    hits = sum(len(np.intersect1d(approx.neighbors[i], exact.neighbors[i]))
               for i in range(approx.n))
    return hits / (approx.n * approx.k)


def _mrng_prune_base(node: int, candidate_ids, candidate_d2,
                     base: np.ndarray, K1: int | None) -> np.ndarray:
    limit = len(candidate_ids) if K1 is None else min(K1, len(candidate_ids))
    kept_ids = np.empty(limit, dtype=np.int32)
    kept_vecs = np.empty((limit, base.shape[1]))
    m = 0
    for cid, cd2 in zip(candidate_ids, candidate_d2):
        cid = int(cid)
        if cid == node:
            continue
        v = base[cid]
        if m:
            diff = kept_vecs[:m] - v
            if (cd2 >= np.einsum("ij,ij->i", diff, diff)).any():
                continue
        kept_ids[m] = cid
        kept_vecs[m] = v
        m += 1
        if m == limit:
            break
    return kept_ids[:m].copy()


def mrng_prune(node: int, candidate_ids: np.ndarray, candidate_d2: np.ndarray,
               dataset: Dataset, K1: int | None) -> np.ndarray:
    """Euclidean occlusion pruning over candidates sorted ascending by distance.

    Keep candidate p iff d2(node, p) < d2(p, r) for every already-kept r;
    stop after K1 keeps. The nearest candidate is always kept.
    """
    return _mrng_prune_base(node, candidate_ids, candidate_d2,
                            dataset.data.astype(np.float64), K1)


def _ndg_select_base(node: int, candidate_ids, base: np.ndarray,
                     K2: int | None) -> np.ndarray:
    cand = np.asarray(candidate_ids, dtype=np.int64)
    cand = cand[cand != node]
    if len(cand) == 0:
        return np.empty(0, dtype=np.int32)
    if K2 is not None and K2 == 0:
        return np.empty(0, dtype=np.int32)

    # best cross inner product per candidate over candidates + the owner
    group = np.concatenate((cand, [node]))
    vecs = base[group]
    self_dots = np.einsum("ij,ij->i", vecs, vecs)
    ncand = len(cand)
    best_cross = np.full(ncand, -np.inf)
    for start in range(0, ncand, _GRAM_PATH_MAX):
        stop = min(start + _GRAM_PATH_MAX, ncand)
        cross = vecs[start:stop] @ vecs.T
        cross[np.arange(stop - start), np.arange(start, stop)] = -np.inf
        best_cross[start:stop] = cross.max(axis=1)

    dominated = self_dots[:ncand] < best_cross
    accepted = [0] + [j for j in range(1, ncand) if not dominated[j]]
    if K2 is not None:
        accepted = accepted[:K2]
    return cand[accepted].astype(np.int32)


def ndg_select(node: int, candidate_ids: np.ndarray, dataset: Dataset,
               K2: int | None) -> np.ndarray:
    """Dominator edge selection over candidates sorted by descending <node, .>.

    The first candidate is always accepted (the potential out-dominator);
    each later one is accepted iff it is a self-dominator of the scanned
    set: <y,y> >= <y,z> for every other candidate z and for the owner.
    Returns at most K2 ids in acceptance (= list) order.
    """
    return _ndg_select_base(node, candidate_ids, dataset.data.astype(np.float64), K2)


def build_exact_ndg(dataset: Dataset) -> EdgeList:
    """Full dominator graph with unbounded acceptance, symmetrized.

    Quadratic scan; gated to small n because it exists to verify the
    dominator-structure and connectivity properties, not to serve queries.
    """
    n = dataset.n
    if n < 2:
        raise UsageError("exact dominator graph needs n >= 2")
    if n > EXACT_NDG_MAX_N:
        raise UsageError(f"exact dominator graph gated to n <= {EXACT_NDG_MAX_N}")
    base = dataset.data.astype(np.float64)

    # every node's candidate set plus itself is the whole dataset, so the
    # acceptance test reduces to one global weak self-domination census
    self_dots = np.einsum("ij,ij->i", base, base)
    best_cross = np.full(n, -np.inf)
    for start in range(0, n, _GRAM_PATH_MAX):
        stop = min(start + _GRAM_PATH_MAX, n)
        cross = base[start:stop] @ base.T
        cross[np.arange(stop - start), np.arange(start, stop)] = -np.inf
        best_cross[start:stop] = cross.max(axis=1)
    weak_dominator = self_dots >= best_cross

    adj: list[set[int]] = [set() for _ in range(n)]
    ids = np.arange(n)
    for i in range(n):
        ips = base @ base[i]
        others = ids[ids != i]
        order = others[np.lexsort((others, -ips[others]))]
        accepted = order[(np.arange(len(order)) == 0) | weak_dominator[order]]
        for j in accepted:
            adj[i].add(int(j))
            adj[int(j)].add(i)

    ip_lists = []
    for i in range(n):
        nbrs = np.asarray(sorted(adj[i]), dtype=np.int64)
        if len(nbrs):
            ips = base[nbrs] @ base[i]
            nbrs = nbrs[np.lexsort((nbrs, -ips))]
        ip_lists.append(nbrs.astype(np.int32))
    return EdgeList(euclid=[np.empty(0, dtype=np.int32) for _ in range(n)],
                    ip=ip_lists)


def count_strong_components(neighbor_lists: list[np.ndarray], n: int) -> int:
    """Number of strongly connected components of a directed adjacency."""
    src = np.concatenate([np.full(len(row), i, dtype=np.int64)
                          for i, row in enumerate(neighbor_lists)] or
                         [np.empty(0, dtype=np.int64)])
    dst = np.concatenate([row.astype(np.int64) for row in neighbor_lists] or
                         [np.empty(0, dtype=np.int64)])
    mat = coo_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    count, _ = connected_components(mat, directed=True, connection="strong")
    return int(count)
