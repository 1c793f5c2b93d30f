"""Data-topology indicators and analytic dominator estimators.

These quantities drive index tuning: the coefficient of variation of the
norm distribution (high CV favors inner-product-oriented settings), the
Davies-Bouldin index under Euclidean and cosine distance (low DBI means
strong clustering, favoring Euclidean-oriented settings), and a census of
self-dominators — points x with <x,x> strictly greater than <x,y> for
every other y, which are exact search answers for queries in their own
inner-product Voronoi cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import UsageError
from .metrics import Dataset

CV_IP_THRESHOLD = 0.1   # norm spread at or above this favors IP-oriented tuning
DBI_CLUSTERED_THRESHOLD = 2.0  # DBI at or below this favors Euclidean-oriented tuning
DEFAULT_DBI_CLUSTERS = 16


@dataclass
class Clustering:
    n_clusters: int
    assignment: np.ndarray  # (n,) int32 cluster ids
    centroids: np.ndarray   # (n_clusters, dim) float64

    def validate(self) -> None:
        if self.assignment.min() < 0 or self.assignment.max() >= self.n_clusters:
            raise UsageError("cluster assignment ids out of range")
        counts = np.bincount(self.assignment, minlength=self.n_clusters)
        if (counts == 0).any():
            raise UsageError("clustering has an empty cluster")


@dataclass
class StatsReport:
    cv: float
    dbi_euclidean: float
    dbi_cosine: float
    self_dominator_fraction: float
    n_clusters: int


def coefficient_of_variation(dataset: Dataset) -> float:
    """Population std of vector norms divided by the mean norm."""
    if dataset.n < 2:
        raise UsageError("CV needs at least 2 vectors")
    norms = np.linalg.norm(dataset.data.astype(np.float64), axis=1)
    mean = norms.mean()
    if mean == 0.0:
        raise UsageError("CV undefined: all vectors have zero norm")
    return float(norms.std() / mean)  # np.std is the population std


def _normalize_rows(data: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(data, axis=1, keepdims=True)
    if (norms == 0).any():
        raise UsageError("cosine mode rejects zero vectors")
    return data / norms


def _check_cluster_metric(metric: str) -> None:
    if metric not in ("euclidean", "cosine"):
        raise UsageError(f"clustering metric must be 'euclidean' or 'cosine', got {metric!r}")


def kmeans(dataset: Dataset, n_clusters: int, metric: str = "euclidean",
           seed: int = 0, max_iter: int = 100) -> Clustering:
    """Lloyd's iteration with k-means++ seeding, deterministic given seed.

    Cosine mode clusters direction: points are norm-normalized and each
    centroid is the renormalized mean of its members.
    """
    _check_cluster_metric(metric)
    if not 1 <= n_clusters <= dataset.n:
        raise UsageError(f"n_clusters={n_clusters} out of range [1, {dataset.n}]")
    pts = dataset.data.astype(np.float64)
    if metric == "cosine":
        pts = _normalize_rows(pts)
    n_distinct = np.unique(pts, axis=0).shape[0]
    if n_clusters > n_distinct:
        raise UsageError(f"n_clusters={n_clusters} exceeds {n_distinct} distinct points "
                         "(degenerate clustering)")

    rng = np.random.default_rng(seed)
    n = pts.shape[0]

    def dist_to(center: np.ndarray) -> np.ndarray:
        if metric == "cosine":
            c = center / np.linalg.norm(center)
            return 1.0 - pts @ c
        diff = pts - center
        return np.einsum("ij,ij->i", diff, diff)

    # k-means++ seeding
    centroids = np.empty((n_clusters, pts.shape[1]))
    centroids[0] = pts[rng.integers(n)]
    closest = dist_to(centroids[0])
    for c in range(1, n_clusters):
        weights = np.maximum(closest, 0.0)
        total = weights.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=weights / total))
        centroids[c] = pts[idx]
        closest = np.minimum(closest, dist_to(centroids[c]))

    assignment = np.zeros(n, dtype=np.int32)
    for _ in range(max_iter):
        if metric == "cosine":
            cnorm = centroids / np.linalg.norm(centroids, axis=1, keepdims=True)
            sims = pts @ cnorm.T
            new_assignment = np.argmax(sims, axis=1).astype(np.int32)
        else:
            d2 = (np.einsum("ij,ij->i", pts, pts)[:, None]
                  - 2.0 * pts @ centroids.T
                  + np.einsum("ij,ij->i", centroids, centroids)[None, :])
            new_assignment = np.argmin(d2, axis=1).astype(np.int32)

        # keep every cluster non-empty: steal the point worst-served by its
        # current centroid (deterministic: max distance, ties by lower id)
        for c in range(n_clusters):
            if (new_assignment == c).any():
                continue
            if metric == "cosine":
                cn = centroids[c] / np.linalg.norm(centroids[c])
                gap = 1.0 - pts @ cn
            else:
                diff = pts - centroids[c]
                gap = np.einsum("ij,ij->i", diff, diff)
            counts = np.bincount(new_assignment, minlength=n_clusters)
            movable = counts[new_assignment] > 1
            gap[~movable] = -np.inf
            new_assignment[int(np.argmax(gap))] = c

        converged = (new_assignment == assignment).all()
        assignment = new_assignment
        for c in range(n_clusters):
            members = pts[assignment == c]
            mean = members.mean(axis=0)
            if metric == "cosine":
                m = np.linalg.norm(mean)
                centroids[c] = mean / m if m > 0 else mean
            else:
                centroids[c] = mean
        if converged:
            break

    out = Clustering(n_clusters=n_clusters, assignment=assignment, centroids=centroids.copy())
    out.validate()
    return out


def davies_bouldin(dataset: Dataset, clustering: Clustering,
                   metric: str = "euclidean") -> float:
    """DBI = (1/N) sum_i max_{j != i} (sigma_i + sigma_j) / d(c_i, c_j).

    sigma_i is the mean distance of cluster-i members to their centroid.
    Cosine mode uses distance 1 - cosine similarity.
    """
    _check_cluster_metric(metric)
    nclus = clustering.n_clusters
    if nclus < 2:
        raise UsageError("DBI needs at least 2 clusters")
    pts = dataset.data.astype(np.float64)
    cents = clustering.centroids
    if metric == "cosine":
        pts = _normalize_rows(pts)
        cents = _normalize_rows(cents)

    sigma = np.empty(nclus)
    for c in range(nclus):
        members = pts[clustering.assignment == c]
        if metric == "cosine":
            sigma[c] = float(np.mean(1.0 - members @ cents[c]))
        else:
            sigma[c] = float(np.mean(np.linalg.norm(members - cents[c], axis=1)))

    if metric == "cosine":
        sep = 1.0 - cents @ cents.T
    else:
        diff = cents[:, None, :] - cents[None, :, :]
        sep = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    off_diag = ~np.eye(nclus, dtype=bool)
    if (np.abs(sep[off_diag]) < 1e-300).any():
        raise ZeroDivisionError("coincident centroids make DBI undefined")

    ratios = (sigma[:, None] + sigma[None, :]) / np.where(off_diag, sep, np.inf)
    return float(np.mean(ratios.max(axis=1)))


def self_dominator_set(dataset: Dataset, chunk: int = 1024) -> np.ndarray:
    """Exact census: ids i with <x_i, x_i> > <x_i, x_j> for every j != i."""
    base = dataset.data.astype(np.float64)
    n = dataset.n
    out = []
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        gram = base[start:stop] @ base.T
        rows = np.arange(start, stop)
        self_dots = gram[np.arange(stop - start), rows]
        gram[np.arange(stop - start), rows] = -np.inf
        best_other = gram.max(axis=1)
        out.append(rows[self_dots > best_other])
    return np.concatenate(out).astype(np.int32)


def dominator_probability(r: float) -> float:
    """P(a norm-r point beats a standard Gaussian point on its own query) = Phi(r)."""
    if r < 0:
        raise UsageError(f"norm value must be >= 0, got {r}")
    return 0.5 * math.erfc(-r / math.sqrt(2.0))


def dominator_probability_mc(r: float, d: int = 32, n_samples: int = 20000,
                             seed: int = 0) -> float:
    """Monte-Carlo estimate of P(<x, y> < r^2) for ||x|| = r, y ~ N(0, I_d)."""
    if r < 0:
        raise UsageError(f"norm value must be >= 0, got {r}")
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(d)
    x = r * direction / np.linalg.norm(direction)
    ys = rng.standard_normal((n_samples, d))
    return float(np.mean(ys @ x < r * r))


def expected_self_dominators(n: int, d: int, r: float) -> float:
    """n * P(||x|| > r) for element-wise standard Gaussian vectors.

    The norm follows a Chi distribution, so the tail is the regularized
    upper incomplete gamma Q(d/2, r^2/2).
    """
    if n < 1 or d < 1 or r < 0:
        raise UsageError(f"need n >= 1, d >= 1, r >= 0; got n={n}, d={d}, r={r}")
    return float(n * gammaincc(d / 2.0, r * r / 2.0))


def estimate_nn_angle(n: int, d: int, t: float) -> float:
    """Estimated angle (radians) between a point and its nearest neighbor.

    arccos(min((1/(t d)) (log n + (d/2) log 1/(1 - t^2)), 1)) for Gaussian
    i.i.d. data; t in (0, 1) tunes the tightness of the bound.
    """
    if not 0.0 < t < 1.0:
        raise UsageError(f"t must lie strictly in (0, 1), got {t}")
    if n < 2 or d < 1:
        raise UsageError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    arg = (math.log(n) + (d / 2.0) * math.log(1.0 / (1.0 - t * t))) / (t * d)
    arg = min(max(arg, -1.0), 1.0)
    return math.acos(arg)


def compute_stats(dataset: Dataset, n_clusters: int = DEFAULT_DBI_CLUSTERS,
                  seed: int = 0) -> StatsReport:
    """One-stop indicator report used by the stats CLI and the tuning guide."""
    cv = coefficient_of_variation(dataset)
    clus_e = kmeans(dataset, n_clusters, metric="euclidean", seed=seed)
    dbi_e = davies_bouldin(dataset, clus_e, metric="euclidean")
    clus_c = kmeans(dataset, n_clusters, metric="cosine", seed=seed)
    dbi_c = davies_bouldin(dataset, clus_c, metric="cosine")
    frac = len(self_dominator_set(dataset)) / dataset.n
    return StatsReport(cv=cv, dbi_euclidean=dbi_e, dbi_cosine=dbi_c,
                       self_dominator_fraction=frac, n_clusters=n_clusters)


def tuning_hint(report: StatsReport) -> str:
    """Turn indicator values into an alpha/m tuning suggestion."""
    parts = []
    if report.cv >= CV_IP_THRESHOLD:
        parts.append(f"cv={report.cv:.3f} >= {CV_IP_THRESHOLD}: wide norm spread, "
                     "favor IP-oriented tuning (raise alpha, lower m)")
    else:
        parts.append(f"cv={report.cv:.3f} < {CV_IP_THRESHOLD}: tight norm spread, "
                     "favor Euclidean-oriented tuning (lower alpha, raise m)")
    min_dbi = min(report.dbi_euclidean, report.dbi_cosine)
    if min_dbi <= DBI_CLUSTERED_THRESHOLD:
        parts.append(f"min dbi={min_dbi:.3f} <= {DBI_CLUSTERED_THRESHOLD}: strongly "
                     "clustered, favor Euclidean-oriented tuning (lower alpha, raise m)")
    else:
        parts.append(f"min dbi={min_dbi:.3f} > {DBI_CLUSTERED_THRESHOLD}: evenly spread, "
                     "favor IP-oriented tuning (raise alpha, lower m)")
    return "; ".join(parts)
