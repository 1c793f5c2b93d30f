"""File-format round-trips, format errors, and the brute-force oracle."""

import struct

import numpy as np
import pytest

from magsearch import (Dataset, FormatError, GroundTruth, MetricKind,
                       UsageError, brute_force_topk, compute_ground_truth,
                       load_ground_truth, read_fvecs, read_ivecs,
                       save_ground_truth, write_fvecs, write_ivecs)


class TestFvecs:
    def test_single_record(self, tmp_path):
        path = tmp_path / "one.fvecs"
        path.write_bytes(struct.pack("<i2f", 2, 1.0, 2.0))
        ds = read_fvecs(str(path))
        assert (ds.n, ds.dim) == (1, 2)
        assert ds.data.tolist() == [[1.0, 2.0]]

    def test_roundtrip_bit_exact(self, tmp_path, rng):
        ds = Dataset(rng.standard_normal((100, 8)).astype(np.float32))
        path = str(tmp_path / "d.fvecs")
        write_fvecs(ds, path)
        back = read_fvecs(path)
        assert back.data.tobytes() == ds.data.tobytes()

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.fvecs"
        path.write_bytes(b"")
        with pytest.raises(FormatError):
            read_fvecs(str(path))

    def test_truncated_record_rejected(self, tmp_path):
        path = tmp_path / "trunc.fvecs"
        path.write_bytes(struct.pack("<i2f", 3, 1.0, 2.0))  # claims dim=3
        with pytest.raises(FormatError):
            read_fvecs(str(path))

    def test_inconsistent_dim_rejected(self, tmp_path):
        path = tmp_path / "mixed.fvecs"
        # two dim-2 records worth of bytes, second claims dim=1
        path.write_bytes(struct.pack("<i2f", 2, 1.0, 2.0) +
                         struct.pack("<ifif", 1, 3.0, 1, 4.0))
        with pytest.raises(FormatError):
            read_fvecs(str(path))

    def test_nonpositive_dim_rejected(self, tmp_path):
        path = tmp_path / "bad.fvecs"
        path.write_bytes(struct.pack("<i2f", -2, 1.0, 2.0))
        with pytest.raises(FormatError):
            read_fvecs(str(path))

    def test_unwritable_path(self, tmp_path, rng):
        ds = Dataset(rng.standard_normal((2, 2)).astype(np.float32))
        with pytest.raises(OSError):
            write_fvecs(ds, str(tmp_path / "no_dir" / "x.fvecs"))


class TestIvecs:
    def test_roundtrip(self, tmp_path, rng):
        rows = rng.integers(0, 1000, size=(50, 10)).astype(np.int32)
        path = str(tmp_path / "r.ivecs")
        write_ivecs(rows, path)
        assert np.array_equal(read_ivecs(path), rows)

    def test_ground_truth_roundtrip(self, tmp_path, rng):
        rows = np.stack([rng.permutation(100)[:10] for _ in range(20)]).astype(np.int32)
        gt = GroundTruth(k=10, rows=rows, metric=MetricKind.INNER_PRODUCT)
        path = str(tmp_path / "gt.ivecs")
        save_ground_truth(gt, path)
        back = load_ground_truth(path)
        assert np.array_equal(back.rows, rows)
        assert back.k == 10


class TestBruteForceOracle:
    def test_ip_hand_example(self):
        ds = Dataset.from_array([[2, 0], [0, 1]])
        assert brute_force_topk(ds, [1, 1], 1, MetricKind.INNER_PRODUCT).tolist() == [0]

    def test_euclid_hand_example(self):
        ds = Dataset.from_array([[2, 0], [0, 1]])
        # d2((0,2),(0,1)) = 1 < d2((0,2),(2,0)) = 8
        assert brute_force_topk(ds, [0, 2], 1, MetricKind.EUCLIDEAN).tolist() == [1]

    def test_k_equals_n_is_full_ranking(self, small_gaussian, rng):
        q = rng.standard_normal(8).astype(np.float32)
        out = brute_force_topk(small_gaussian, q, small_gaussian.n,
                               MetricKind.INNER_PRODUCT)
        assert sorted(out.tolist()) == list(range(small_gaussian.n))
        ips = small_gaussian.data.astype(np.float64) @ q.astype(np.float64)
        assert all(ips[out[i]] >= ips[out[i + 1]] for i in range(len(out) - 1))

    def test_prefix_consistency(self, small_gaussian, rng):
        q = rng.standard_normal(8).astype(np.float32)
        for metric in MetricKind:
            full = brute_force_topk(small_gaussian, q, 50, metric)
            for k in (1, 5, 20, 50):
                assert np.array_equal(
                    brute_force_topk(small_gaussian, q, k, metric), full[:k])

    def test_tie_break_by_id(self):
        ds = Dataset.from_array([[1, 0], [1, 0], [0, 1]])
        out = brute_force_topk(ds, [1, 0], 2, MetricKind.INNER_PRODUCT)
        assert out.tolist() == [0, 1]

    def test_k_out_of_range(self, small_gaussian):
        with pytest.raises(UsageError):
            brute_force_topk(small_gaussian, np.zeros(8, np.float32), 201,
                             MetricKind.INNER_PRODUCT)
        with pytest.raises(UsageError):
            brute_force_topk(small_gaussian, np.zeros(8, np.float32), 0,
                             MetricKind.INNER_PRODUCT)


class TestComputeGroundTruth:
    def test_rows_match_single_queries(self, rng):
        data = Dataset(rng.standard_normal((500, 16)).astype(np.float32))
        queries = Dataset(rng.standard_normal((20, 16)).astype(np.float32))
        gt = compute_ground_truth(data, queries, 7, MetricKind.EUCLIDEAN)
        for i in range(queries.n):
            assert np.array_equal(
                gt.rows[i],
                brute_force_topk(data, queries.vector(i), 7, MetricKind.EUCLIDEAN))
        gt.validate(n=data.n)

    def test_duplicate_queries_identical_rows(self, small_gaussian):
        q = small_gaussian.data[:1]
        queries = Dataset(np.vstack([q, q]).astype(np.float32))
        gt = compute_ground_truth(small_gaussian, queries, 5,
                                  MetricKind.INNER_PRODUCT)
        assert np.array_equal(gt.rows[0], gt.rows[1])

    def test_dim_mismatch(self, small_gaussian, rng):
        queries = Dataset(rng.standard_normal((2, 9)).astype(np.float32))
        with pytest.raises(UsageError):
            compute_ground_truth(small_gaussian, queries, 3,
                                 MetricKind.INNER_PRODUCT)

    def test_scaling_turns_mips_into_nns(self, rng):
        # with mu at 1e6 * max|x|/|q|, the Euclidean NN of mu*q is the MIPS
        # answer for q on tie-free random data
        data = Dataset(rng.standard_normal((400, 12)).astype(np.float32))
        max_norm = float(np.linalg.norm(data.data, axis=1).max())
        for _ in range(25):
            q = rng.standard_normal(12)
            mu = 1e6 * max_norm / np.linalg.norm(q)
            a = brute_force_topk(data, q, 1, MetricKind.INNER_PRODUCT)
            b = brute_force_topk(data, mu * q, 1, MetricKind.EUCLIDEAN)
            assert a.tolist() == b.tolist()
