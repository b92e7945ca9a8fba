"""Exact ground truth, quality metrics, and the benchmark runner.

The overall ratio compares the i-th returned distance to the i-th exact
distance, averaged over the k positions; recall is the fraction of the
exact k-neighbor ids that the result recovered. Ground truth is a full
scan, cached on disk keyed by the dataset and query checksums so repeated
benchmark runs pay for it once.
"""

from __future__ import annotations

import csv
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import Dataset
from .engine import build, ck_ann, fb_ck_ann
from .errors import ParameterError
from .hashing import IndexParams

__all__ = [
    "GroundTruth",
    "BenchReport",
    "BenchRow",
    "brute_force_knn",
    "ground_truth",
    "overall_ratio",
    "recall",
    "run_benchmark",
]


@dataclass(frozen=True)
class GroundTruth:
    """Exact k-NN ids and distances per query, ascending, ties by id."""

    ids: np.ndarray    # (nq, k) int64
    dists: np.ndarray  # (nq, k) float64
    k: int

    @property
    def n_queries(self) -> int:
        return self.ids.shape[0]

    def row(self, qi: int) -> tuple[np.ndarray, np.ndarray]:
        return self.ids[qi], self.dists[qi]


def brute_force_knn(ds: Dataset, q, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbors by full scan; ties broken by ascending id."""
    if k < 1 or k > ds.n:
        raise ParameterError(f"k must be in [1, {ds.n}], got {k}")
    q = np.asarray(q, dtype=np.float64)
    diff = ds.coords - q
    dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    order = np.lexsort((np.arange(ds.n), dists))[:k]
    return order.astype(np.int64), dists[order]


def ground_truth(
    ds: Dataset, queries: Dataset, k: int, cache_dir=None
) -> GroundTruth:
    """Exact k-NN for every query, optionally cached on disk."""
    cache_path = None
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        key = f"gt_{ds.checksum()[:16]}_{queries.checksum()[:16]}_k{k}.npz"
        cache_path = cache_dir / key
        if cache_path.exists():
            with np.load(cache_path) as z:
                return GroundTruth(ids=z["ids"], dists=z["dists"], k=k)

    ids = np.empty((queries.n, k), dtype=np.int64)
    dists = np.empty((queries.n, k), dtype=np.float64)
    for qi in range(queries.n):
        ids[qi], dists[qi] = brute_force_knn(ds, queries.point(qi), k)
    gt = GroundTruth(ids=ids, dists=dists, k=k)
    if cache_path is not None:
        np.savez(cache_path, ids=ids, dists=dists)
    return gt


def overall_ratio(result, truth_dists) -> float:
    """Mean positionwise ratio of returned to exact distances, at least 1.

    ``result`` is a sequence of (point_id, distance) pairs of the same
    length as ``truth_dists``. Positions where both distances are zero
    contribute ratio 1; a zero exact distance against a nonzero returned
    one makes the ratio infinite (reported with a warning).
    """
    truth_dists = np.asarray(truth_dists, dtype=np.float64)
    res_dists = np.asarray([d for _, d in result], dtype=np.float64)
    if res_dists.shape != truth_dists.shape:
        raise ParameterError(
            f"result has {res_dists.size} entries, truth has {truth_dists.size}"
        )
    ratios = np.empty_like(truth_dists)
    zero = truth_dists == 0.0
    both_zero = zero & (res_dists == 0.0)
    bad = zero & ~both_zero
    ratios[~zero] = res_dists[~zero] / truth_dists[~zero]
    ratios[both_zero] = 1.0
    if bad.any():
        warnings.warn(
            "exact distance is zero where the returned distance is not; "
            "overall ratio is infinite",
            stacklevel=2,
        )
        ratios[bad] = np.inf
    return float(np.mean(ratios))


def recall(result_ids, truth_ids) -> float:
    """|result ids intersected with exact ids| / k."""
    truth = set(int(i) for i in truth_ids)
    if not truth:
        raise ParameterError("truth row is empty")
    got = set(int(i) for i in result_ids)
    if len(got) > len(truth):
        raise ParameterError(f"result has {len(got)} ids, truth only {len(truth)}")
    return len(got & truth) / len(truth)


@dataclass
class BenchRow:
    """One (algorithm, parameter point) cell of a benchmark run."""

    alg: str
    mode: str
    c: float
    w0: float
    K: int
    L: int
    t: int
    seed: int
    k: int
    n: int
    dim: int
    repetitions: int
    mean_query_time_ms: float = float("nan")
    overall_ratio: float = float("nan")
    recall: float = float("nan")
    mean_candidates: float = float("nan")
    build_seconds: float = float("nan")
    index_bytes: int = 0
    error: str = ""


@dataclass
class BenchReport:
    rows: list[BenchRow]

    def ok_rows(self) -> list[BenchRow]:
        return [r for r in self.rows if not r.error]

    def to_dicts(self) -> list[dict]:
        return [asdict(r) for r in self.rows]

    def write_csv(self, path) -> None:
        rows = self.to_dicts()
        with Path(path).open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()) if rows else [])
            writer.writeheader()
            writer.writerows(rows)

    def write_json(self, path) -> None:
        # failed cells carry NaN metrics; emit null so the file stays valid JSON
        rows = [
            {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}
            for r in self.to_dicts()
        ]
        Path(path).write_text(json.dumps(rows, indent=2) + "\n")

    def curve_points(self) -> list[dict]:
        """(time, recall, ratio) per successful cell, per algorithm, by time."""
        pts = [
            {
                "alg": r.alg,
                "c": r.c,
                "mean_query_time_ms": r.mean_query_time_ms,
                "recall": r.recall,
                "overall_ratio": r.overall_ratio,
            }
            for r in self.ok_rows()
        ]
        return sorted(pts, key=lambda p: (p["alg"], p["mean_query_time_ms"]))

    def write_curves_csv(self, path) -> None:
        pts = self.curve_points()
        fields = ["alg", "c", "mean_query_time_ms", "recall", "overall_ratio"]
        with Path(path).open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            writer.writerows(pts)


_QUERY_FNS = {
    "db-lsh": ck_ann,
    "fb-lsh": fb_ck_ann,
}


def _run_oracle_cell(ds, queries, gt, k, repetitions, row):
    times = []
    for _rep in range(repetitions):
        for qi in range(queries.n):
            t0 = time.perf_counter()
            brute_force_knn(ds, queries.point(qi), k)
            times.append(time.perf_counter() - t0)
    row.mean_query_time_ms = 1e3 * float(np.mean(times))
    row.overall_ratio = 1.0
    row.recall = 1.0
    row.mean_candidates = float(ds.n)
    row.build_seconds = 0.0
    return row


def _run_index_cell(ds, queries, gt, alg, params, k, repetitions, fanout, threads, row):
    index = build(ds, params, fanout=fanout)
    row.build_seconds = index.build_meta.build_seconds
    row.index_bytes = index.size_bytes()
    query_fn = _QUERY_FNS[alg]

    def one_query(qi: int):
        t0 = time.perf_counter()
        outcome = query_fn(index, queries.point(qi), k)
        elapsed = time.perf_counter() - t0
        tids, tdists = gt.row(qi)
        return (
            elapsed,
            recall([pid for pid, _ in outcome.neighbors], tids),
            overall_ratio(outcome.neighbors, tdists),
            outcome.candidates_verified,
        )

    times, recalls, ratios, cands = [], [], [], []
    for rep in range(repetitions):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(one_query, range(queries.n)))
        else:
            results = [one_query(qi) for qi in range(queries.n)]
        times.extend(r[0] for r in results)
        if rep == 0:
            recalls = [r[1] for r in results]
            ratios = [r[2] for r in results]
            cands = [r[3] for r in results]

    row.mean_query_time_ms = 1e3 * float(np.mean(times))
    row.recall = float(np.mean(recalls))
    row.overall_ratio = float(np.mean(ratios))
    row.mean_candidates = float(np.mean(cands))
    return row


def run_benchmark(
    ds: Dataset,
    queries: Dataset,
    algs,
    grid,
    k: int,
    repetitions: int = 1,
    *,
    fanout: int = 32,
    threads: int = 1,
    cache_dir=None,
) -> BenchReport:
    """Run every (algorithm, grid cell) pair and collect quality metrics.

    ``grid`` is a list of dicts with IndexParams fields (c, w0, t, K, L,
    mode, seed). Quality metrics are averaged over queries; timings over
    repetitions as well (the query path is deterministic, so repetitions
    only stabilize timing). A failing cell is recorded with its error and
    the run continues. The ``oracle`` algorithm is the exact scan plugged
    into the same pipeline, useful as a self-test.
    """
    if repetitions < 1:
        raise ParameterError(f"repetitions must be >= 1, got {repetitions}")
    gt = ground_truth(ds, queries, k, cache_dir=cache_dir)
    rows: list[BenchRow] = []
    for alg in algs:
        if alg not in ("db-lsh", "fb-lsh", "oracle"):
            raise ParameterError(f"unknown algorithm {alg!r}")
        for cell in grid:
            params = IndexParams(
                c=cell["c"],
                w0=cell["w0"],
                t=cell["t"],
                K=cell["K"],
                L=cell["L"],
                mode=cell.get("mode", "practical"),
                seed=cell.get("seed", 0),
            )
            row = BenchRow(
                alg=alg,
                mode=params.mode,
                c=params.c,
                w0=params.w0,
                K=params.K,
                L=params.L,
                t=params.t,
                seed=params.seed,
                k=k,
                n=ds.n,
                dim=ds.dim,
                repetitions=repetitions,
            )
            try:
                if alg == "oracle":
                    row = _run_oracle_cell(ds, queries, gt, k, repetitions, row)
                else:
                    row = _run_index_cell(
                        ds, queries, gt, alg, params, k, repetitions, fanout, threads, row
                    )
            except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                row.error = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return BenchReport(rows=rows)
