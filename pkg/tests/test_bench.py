"""Synthetic generators, recall measurement, benchmark records, verify suite."""

import numpy as np
import pytest

from magsearch import (Dataset, GroundTruth, MetricKind, UsageError,
                       build_mag, coefficient_of_variation,
                       compute_ground_truth, davies_bouldin,
                       generate_synthetic, kmeans, materialize, recall_at_k,
                       run_benchmark, verify_suite)
from magsearch.bench import (BENCH_CSV_HEADER, SyntheticSpec, VerifyLimits,
                             records_to_csv, run_queries)


class TestRecallAtK:
    def test_hand_fraction(self):
        gt = GroundTruth(k=3, rows=np.array([[1, 2, 4]], dtype=np.int32))
        assert recall_at_k([np.array([1, 2, 3])], gt, 3) == pytest.approx(2 / 3)

    def test_identity(self):
        gt = GroundTruth(k=3, rows=np.array([[5, 6, 7]], dtype=np.int32))
        assert recall_at_k([np.array([7, 5, 6])], gt, 3) == 1.0

    def test_disjoint(self):
        gt = GroundTruth(k=2, rows=np.array([[1, 2]], dtype=np.int32))
        assert recall_at_k([np.array([8, 9])], gt, 2) == 0.0

    def test_short_rows_rejected(self):
        gt = GroundTruth(k=2, rows=np.array([[1, 2]], dtype=np.int32))
        with pytest.raises(UsageError):
            recall_at_k([np.array([1, 2, 3])], gt, 3)


class TestSynthetic:
    def test_gaussian_low_cv(self):
        ds = generate_synthetic(SyntheticSpec("gaussian", n=10000, dim=32, seed=0))
        assert coefficient_of_variation(ds) < 0.15

    def test_heavytail_high_cv(self):
        ds = generate_synthetic(SyntheticSpec("heavytail", n=10000, dim=32,
                                              seed=0, sigma_log=0.5))
        assert coefficient_of_variation(ds) >= 0.2

    def test_blobs_low_dbi(self):
        ds = generate_synthetic(SyntheticSpec("blobs", n=2000, dim=16, seed=0,
                                              n_clusters=8))
        clus = kmeans(ds, 8, seed=0)
        assert davies_bouldin(ds, clus) <= 2.0

    def test_deterministic(self):
        spec = SyntheticSpec("heavytail", n=500, dim=8, seed=42)
        a = generate_synthetic(spec)
        b = generate_synthetic(spec)
        assert a.data.tobytes() == b.data.tobytes()

    def test_unknown_kind_rejected(self):
        with pytest.raises(UsageError):
            SyntheticSpec("uniform", n=10, dim=2)


@pytest.fixture(scope="module")
def bench_setup():
    data = generate_synthetic(SyntheticSpec("gaussian", n=800, dim=8, seed=5))
    queries = generate_synthetic(SyntheticSpec("gaussian", n=40, dim=8, seed=6))
    gt = compute_ground_truth(data, queries, 10, MetricKind.INNER_PRODUCT)
    index = build_mag(data, K=16, K1=8, K2=8, ls=32, seed=5, passes=2)
    return data, queries, gt, index


class TestBenchmark:
    def test_csv_schema(self, bench_setup):
        data, queries, gt, index = bench_setup
        records = run_benchmark(index, data, queries, gt, ls_list=[16, 32],
                                R=12, alpha=0.5, m=0, k=10, seed=1, reps=1)
        text = records_to_csv(records, {"note": "test"})
        lines = text.strip().split("\n")
        assert lines[0].startswith("# {")
        assert lines[1] == BENCH_CSV_HEADER
        assert len(lines) == 4
        first = lines[2].split(",")
        assert first[0] == "16" and first[3] == "12"

    def test_recall_non_decreasing_in_ls(self, bench_setup):
        data, queries, gt, index = bench_setup
        records = run_benchmark(index, data, queries, gt,
                                ls_list=[16, 32, 64, 128], R=12, alpha=0.5,
                                m=0, k=10, seed=1, reps=1)
        recalls = [r.recall for r in records]
        for lo, hi in zip(recalls, recalls[1:]):
            assert hi >= lo - 0.005

    def test_thread_count_does_not_change_results(self, bench_setup):
        data, queries, gt, index = bench_setup
        graph = materialize(index, R=12, alpha=0.5)
        a = run_queries(graph, data, queries, ls=32, k=10, seed=9, threads=1)
        b = run_queries(graph, data, queries, ls=32, k=10, seed=9, threads=4)
        assert [r.ids.tolist() for r in a] == [r.ids.tolist() for r in b]
        assert [r.stats.dist_comps for r in a] == [r.stats.dist_comps for r in b]

    def test_qps_positive_and_counters_exact(self, bench_setup):
        data, queries, gt, index = bench_setup
        records = run_benchmark(index, data, queries, gt, ls_list=[16],
                                R=12, alpha=0.5, m=0, k=10, seed=1, reps=3)
        rec = records[0]
        assert rec.qps > 0
        assert rec.dist_comps > 0 and rec.hops > 0


class TestVerifySuite:
    def test_passes_on_gaussian(self):
        report = verify_suite(spec=SyntheticSpec("gaussian", n=400, dim=8, seed=0),
                              limits=VerifyLimits(max_n_exact=500))
        assert report.passed, report.render()
        names = {c.name for c in report.checks}
        assert "ndg-strong-connectivity" in names
        assert "dominator-probability-mc" in names

    def test_detects_injected_self_loop(self):
        data = generate_synthetic(SyntheticSpec("gaussian", n=300, dim=8, seed=1))
        index = build_mag(data, K=12, K1=6, K2=6, ls=24, seed=1, passes=1)
        index.euclid[5] = np.array([5], dtype=np.int32)
        report = verify_suite(dataset=data, index=index,
                              limits=VerifyLimits(max_n_exact=0))
        failing = [c for c in report.checks if not c.passed]
        assert any(c.name == "index-invariants" for c in failing)

    def test_duplicated_points_pass(self):
        # census is empty under strict domination; the suite's tie-tolerant
        # checks must still pass
        base = np.random.default_rng(3).standard_normal((40, 4))
        pts = np.vstack([base, base]).astype(np.float32)
        report = verify_suite(dataset=Dataset(np.ascontiguousarray(pts)),
                              limits=VerifyLimits(max_n_exact=100))
        ndg_checks = [c for c in report.checks if c.name.startswith("ndg")]
        assert ndg_checks and all(c.passed for c in ndg_checks)
