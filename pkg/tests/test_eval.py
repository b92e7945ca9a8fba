"""Ground-truth oracle, metrics, and the benchmark runner."""

import heapq

import numpy as np
import pytest

from dblsh import (
    Dataset,
    ParameterError,
    brute_force_knn,
    generate_synthetic,
    ground_truth,
    overall_ratio,
    recall,
    run_benchmark,
)


def heap_knn(ds, q, k):
    """Second, independent exact-kNN route: max-heap instead of a sort."""
    q = np.asarray(q, dtype=np.float64)
    heap = []
    for pid in range(ds.n):
        d = float(np.linalg.norm(ds.coords[pid] - q))
        heapq.heappush(heap, (-d, -pid))
        if len(heap) > k:
            heapq.heappop(heap)
    out = sorted((-d, -pid) for d, pid in heap)
    return [pid for _, pid in out], [d for d, _ in out]


class TestBruteForce:
    def test_query_on_a_point(self):
        ds = generate_synthetic(50, 3, "uniform-cube", seed=2)
        ids, dists = brute_force_knn(ds, ds.point(13), 3)
        assert ids[0] == 13
        assert dists[0] == 0.0

    def test_k_equals_n_sorted(self):
        ds = generate_synthetic(30, 2, "uniform-cube", seed=3)
        ids, dists = brute_force_knn(ds, np.zeros(2), 30)
        assert sorted(ids.tolist()) == list(range(30))
        assert np.all(np.diff(dists) >= 0)

    def test_against_heap_implementation(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            ds = generate_synthetic(120, 5, "uniform-cube", seed=trial)
            q = rng.random(5)
            ids, dists = brute_force_knn(ds, q, 11)
            hids, hdists = heap_knn(ds, q, 11)
            assert ids.tolist() == hids
            assert np.allclose(dists, hdists)

    def test_tie_break_by_id(self):
        coords = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
        ds = Dataset(2, coords)
        ids, dists = brute_force_knn(ds, np.zeros(2), 4)
        assert ids.tolist() == [0, 1, 2, 3]

    def test_order_invariance(self):
        ds = generate_synthetic(80, 4, "uniform-cube", seed=6)
        perm = np.random.default_rng(7).permutation(80)
        shuffled = Dataset(4, ds.coords[perm])
        q = np.full(4, 0.3)
        _, dists_a = brute_force_knn(ds, q, 9)
        _, dists_b = brute_force_knn(shuffled, q, 9)
        assert np.allclose(dists_a, dists_b)

    def test_k_out_of_range(self):
        ds = generate_synthetic(5, 2, "uniform-cube", seed=0)
        with pytest.raises(ParameterError):
            brute_force_knn(ds, np.zeros(2), 6)


class TestOverallRatio:
    def test_exact_result_is_one(self):
        result = [(1, 2.0), (2, 3.0)]
        assert overall_ratio(result, [2.0, 3.0]) == 1.0

    def test_hand_arithmetic(self):
        result = [(5, 2.0), (6, 4.0)]
        assert overall_ratio(result, [1.0, 4.0]) == pytest.approx(1.5)

    def test_at_least_one_on_random_instances(self):
        rng = np.random.default_rng(8)
        ds = generate_synthetic(60, 3, "uniform-cube", seed=9)
        q = rng.random(3)
        ids, dists = brute_force_knn(ds, q, 10)
        for _ in range(20):
            picks = rng.choice(60, size=10, replace=False)
            got = np.sort(np.linalg.norm(ds.coords[picks] - q, axis=1))
            ratio = overall_ratio(list(zip(picks, got)), dists)
            assert ratio >= 1.0 - 1e-9

    def test_zero_over_zero_is_one(self):
        assert overall_ratio([(0, 0.0), (1, 2.0)], [0.0, 2.0]) == 1.0

    def test_zero_truth_warns_infinite(self):
        with pytest.warns(UserWarning):
            ratio = overall_ratio([(0, 1.0)], [0.0])
        assert ratio == np.inf

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            overall_ratio([(0, 1.0)], [1.0, 2.0])


class TestRecall:
    def test_full(self):
        assert recall([1, 2, 3], [1, 2, 3]) == 1.0

    def test_disjoint(self):
        assert recall([4, 5], [1, 2]) == 0.0

    def test_half(self):
        assert recall([1, 2], [1, 2, 3, 4]) == 0.5

    def test_short_result_counts_against_k(self):
        assert recall([1], [1, 2, 3, 4]) == 0.25


class TestScaling:
    def test_metrics_are_scale_free(self):
        ds = generate_synthetic(100, 4, "uniform-cube", seed=10)
        scaled = Dataset(4, ds.coords * 37.0)
        q = np.full(4, 0.5)
        ids, dists = brute_force_knn(ds, q, 8)
        sids, sdists = brute_force_knn(scaled, q * 37.0, 8)
        assert ids.tolist() == sids.tolist()
        assert recall(sids, ids) == 1.0
        # a fixed id-set keeps its ratio under scaling
        picks = list(range(8))
        got = np.sort(np.linalg.norm(ds.coords[picks] - q, axis=1))
        r1 = overall_ratio(list(zip(picks, got)), dists)
        r2 = overall_ratio(list(zip(picks, got * 37.0)), sdists)
        assert r1 == pytest.approx(r2)


class TestGroundTruthCache:
    def test_cache_round_trip(self, tmp_path):
        ds = generate_synthetic(200, 4, "uniform-cube", seed=11)
        qs = generate_synthetic(10, 4, "uniform-cube", seed=12)
        gt1 = ground_truth(ds, qs, 5, cache_dir=tmp_path)
        files = list(tmp_path.glob("gt_*.npz"))
        assert len(files) == 1
        gt2 = ground_truth(ds, qs, 5, cache_dir=tmp_path)
        assert np.array_equal(gt1.ids, gt2.ids)
        assert np.array_equal(gt1.dists, gt2.dists)


@pytest.fixture(scope="module")
def small_world():
    ds = generate_synthetic(
        800, 8, "gaussian-clusters", seed=13, n_clusters=5, spread=0.05
    )
    qs = generate_synthetic(
        8, 8, "gaussian-clusters", seed=14, n_clusters=5, spread=0.05
    )
    return ds, qs


class TestRunBenchmark:
    def test_oracle_cell_is_perfect(self, small_world):
        ds, qs = small_world
        grid = [{"c": 1.5, "w0": 9.0, "t": 10, "K": 4, "L": 3, "seed": 0}]
        report = run_benchmark(ds, qs, ["oracle"], grid, k=5)
        row = report.rows[0]
        assert row.recall == 1.0
        assert row.overall_ratio == 1.0
        assert not row.error

    def test_quality_identical_across_repetitions(self, small_world):
        ds, qs = small_world
        grid = [{"c": 1.5, "w0": 4.0, "t": 20, "K": 4, "L": 3, "seed": 1}]
        r1 = run_benchmark(ds, qs, ["db-lsh"], grid, k=5, repetitions=1)
        r2 = run_benchmark(ds, qs, ["db-lsh"], grid, k=5, repetitions=2)
        assert r1.rows[0].recall == r2.rows[0].recall
        assert r1.rows[0].overall_ratio == r2.rows[0].overall_ratio
        assert r1.rows[0].mean_candidates == r2.rows[0].mean_candidates

    def test_both_algorithms_reported(self, small_world):
        ds, qs = small_world
        grid = [{"c": 1.5, "w0": 4.0, "t": 20, "K": 4, "L": 3, "seed": 1}]
        report = run_benchmark(ds, qs, ["db-lsh", "fb-lsh"], grid, k=5)
        assert {r.alg for r in report.rows} == {"db-lsh", "fb-lsh"}
        assert all(not r.error for r in report.rows)

    def test_cell_failure_is_recorded_not_raised(self, small_world):
        ds, qs = small_world
        bad = [{"c": 1.5, "w0": 4.0, "t": 20, "K": 4, "L": 3, "seed": 1, "mode": "theoretical"}]
        report = run_benchmark(ds, qs, ["db-lsh"], bad, k=5)
        assert report.rows[0].error
        assert report.ok_rows() == []

    def test_threads_do_not_change_results(self, small_world):
        ds, qs = small_world
        grid = [{"c": 1.5, "w0": 4.0, "t": 20, "K": 4, "L": 3, "seed": 1}]
        a = run_benchmark(ds, qs, ["db-lsh"], grid, k=5, threads=1)
        b = run_benchmark(ds, qs, ["db-lsh"], grid, k=5, threads=4)
        assert a.rows[0].recall == b.rows[0].recall
        assert a.rows[0].overall_ratio == b.rows[0].overall_ratio

    def test_report_files(self, small_world, tmp_path):
        ds, qs = small_world
        grid = [{"c": 1.5, "w0": 4.0, "t": 20, "K": 4, "L": 3, "seed": 1}]
        report = run_benchmark(ds, qs, ["db-lsh"], grid, k=5)
        report.write_csv(tmp_path / "report.csv")
        report.write_json(tmp_path / "report.json")
        report.write_curves_csv(tmp_path / "curves.csv")
        header = (tmp_path / "report.csv").read_text().splitlines()[0]
        assert "recall" in header and "overall_ratio" in header
        assert (tmp_path / "curves.csv").read_text().count("\n") >= 2
