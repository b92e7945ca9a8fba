"""Index construction and query processing.

An index projects every point into L separate K-dimensional spaces and
packs each projected copy into a window-queryable tree. A query walks a
geometric schedule of radii r = 1, c, c**2, ...; at radius r it streams,
table by table, the points whose projections fall in the hypercube of
width w0*r centered on the query's projection, verifies each new point's
exact distance, and stops as soon as either the k-th best verified point
is within c*r or the candidate budget 2*t*L + k is spent. The budget and
the visited set are cumulative across radii by default: a point is never
verified twice, and a point verified at an earlier radius can satisfy the
distance test of a later one without being re-streamed.

The fixed-bucket variants share the tables but draw candidates from
pre-quantized cells instead of query-centered windows, which is exactly
what makes them miss near neighbors that land across a cell boundary.
"""

from __future__ import annotations

import heapq
import struct
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator

import numpy as np

from .data import Dataset
from .errors import (
    BuildError,
    ChecksumError,
    DimensionMismatchError,
    IndexFormatError,
    ParameterError,
)
from .hashing import HashFamily, IndexParams, project, project_many
from .strtree import ProjectedTable, WindowRegion, _Level, bulk_build, window_query

__all__ = [
    "DbLshIndex",
    "QueryOutcome",
    "RcStatus",
    "RcResult",
    "build",
    "rc_nn",
    "c_ann",
    "ck_ann",
    "fb_rc_nn",
    "fb_c_ann",
    "fb_ck_ann",
    "save_index",
    "load_index",
]

_MAGIC = b"DBLSHIX\x01"
_VERSION = 1


@dataclass
class BuildMeta:
    seed: int
    build_seconds: float = 0.0
    project_seconds: float = 0.0
    tree_seconds: float = 0.0


@dataclass
class DbLshIndex:
    """L projected tables over one dataset, plus the family that made them."""

    params: IndexParams
    family: HashFamily
    tables: list[ProjectedTable]
    dataset: Dataset
    fanout: int
    scale: float
    build_meta: BuildMeta
    _coords: np.ndarray = field(repr=False)  # dataset coords times scale

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def dim(self) -> int:
        return self.dataset.dim

    def size_bytes(self) -> int:
        total = self.family.directions.nbytes + self.family.offsets.nbytes
        total += sum(t.nbytes() for t in self.tables)
        return total

    def audit(self, samples: int = 8) -> None:
        """Spot-check that stored projections match the family.

        Tolerance covers the last-ulp differences between the batched and
        single-vector BLAS paths.
        """
        ids = np.linspace(0, self.n - 1, min(samples, self.n)).astype(int)
        for pid in ids:
            expected = project(self.family, self._coords[pid])
            for tbl in self.tables:
                row = tbl.row_of(int(pid))
                if not np.allclose(
                    tbl.coords[row], expected[tbl.table_id], rtol=1e-10, atol=1e-12
                ):
                    raise BuildError(
                        f"stored projection of point {pid} in table "
                        f"{tbl.table_id} disagrees with the hash family"
                    )


class RcStatus(Enum):
    FOUND = "found"
    BUDGET_EXHAUSTED = "budget_exhausted"
    NOT_FOUND = "not_found"


@dataclass(frozen=True)
class RcResult:
    """Outcome of one fixed-radius decision query."""

    status: RcStatus
    point_id: int | None = None
    distance: float | None = None


@dataclass
class QueryOutcome:
    """Result of a c-ANN / (c,k)-ANN query.

    ``neighbors`` holds (point_id, exact distance) pairs sorted by
    ascending distance, ties broken by ascending id. ``rounds`` is the
    number of radii tried; ``terminating_radius`` is the radius in force
    when the query stopped.
    """

    neighbors: list[tuple[int, float]]
    terminating_radius: float
    candidates_verified: int
    rounds: int
    timings: dict[str, float]
    explain: list[dict] | None = None


def build(ds: Dataset, params: IndexParams, *, fanout: int = 32, scale: float = 1.0) -> DbLshIndex:
    """Project the dataset under a fresh seeded family and pack all L tables.

    ``scale`` multiplies every coordinate before projection so the radius
    schedule's starting value of 1 matches the data's distance scale;
    reported distances are always mapped back to the original space.
    """
    if ds.n < 1:
        raise BuildError("cannot index an empty dataset")
    if scale <= 0:
        raise ParameterError(f"scale must be > 0, got {scale}")
    params.validate_for(ds.n)

    t0 = time.perf_counter()
    family = HashFamily.from_seed(params.seed, params.L, params.K, ds.dim)
    coords = ds.coords if scale == 1.0 else ds.coords * scale
    ids = np.arange(ds.n, dtype=np.int64)

    project_s = 0.0
    tree_s = 0.0
    tables = []
    for i in range(params.L):
        tp = time.perf_counter()
        proj = project_many(family, coords, i)
        tt = time.perf_counter()
        tables.append(bulk_build(ids, proj, max_fanout=fanout, table_id=i))
        done = time.perf_counter()
        project_s += tt - tp
        tree_s += done - tt

    meta = BuildMeta(
        seed=params.seed,
        build_seconds=time.perf_counter() - t0,
        project_seconds=project_s,
        tree_seconds=tree_s,
    )
    index = DbLshIndex(
        params=params,
        family=family,
        tables=tables,
        dataset=ds,
        fanout=fanout,
        scale=scale,
        build_meta=meta,
        _coords=coords,
    )
    index.audit()
    return index


def _check_query(index: DbLshIndex, q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (index.dim,):
        raise DimensionMismatchError(
            f"query has shape {q.shape}, index expects ({index.dim},)"
        )
    return q if index.scale == 1.0 else q * index.scale


def _table_stream(
    index: DbLshIndex, centers: np.ndarray, table_i: int, w: float, dynamic: bool
) -> Iterator[int]:
    """Candidate point ids of one table at width w, in traversal order."""
    tbl = index.tables[table_i]
    if dynamic:
        win = WindowRegion(centers[table_i], w)
        for pid, _vec in window_query(tbl, win):
            yield pid
    else:
        offs = index.family.offsets[table_i]
        cells = np.floor(centers[table_i] / w + offs)
        # Cells quantize the raw projections at width w with offset b = offs*w;
        # the enclosing window over-covers its closed right face, so filter
        # back to exact cell equality.
        win = WindowRegion((cells - offs + 0.5) * w, w)
        for pid, vec in window_query(tbl, win):
            if np.array_equal(np.floor(vec / w + offs), cells):
                yield pid


def _distance(index: DbLshIndex, qs: np.ndarray, pid: int) -> float:
    diff = index._coords[pid] - qs
    return float(np.sqrt(np.dot(diff, diff)))


def _rc_scan(
    index: DbLshIndex, q, r: float, budget: int, visited: set, dynamic: bool
) -> RcResult:
    if r <= 0:
        raise ParameterError(f"r must be > 0, got {r}")
    if budget < 0:
        raise ParameterError(f"budget must be >= 0, got {budget}")
    if budget == 0:
        return RcResult(RcStatus.BUDGET_EXHAUSTED)
    qs = _check_query(index, q)
    centers = project(index.family, qs)
    w = index.params.w0 * r
    cr = index.params.c * r
    best_id, best_dist = -1, float("inf")
    verified = 0
    for i in range(index.params.L):
        for pid in _table_stream(index, centers, i, w, dynamic):
            if pid in visited:
                continue
            visited.add(pid)
            sdist = _distance(index, qs, pid)
            verified += 1
            if sdist < best_dist or (sdist == best_dist and pid < best_id):
                best_id, best_dist = pid, sdist
            if sdist <= cr:
                return RcResult(RcStatus.FOUND, pid, sdist / index.scale)
            if verified >= budget:
                return RcResult(
                    RcStatus.BUDGET_EXHAUSTED, best_id, best_dist / index.scale
                )
    return RcResult(RcStatus.NOT_FOUND)


def rc_nn(index: DbLshIndex, q, r: float, budget: int, visited: set) -> RcResult:
    """Fixed-radius decision query.

    Streams the L windows of width w0*r in table order, verifying each
    point not yet in ``visited``. Returns FOUND with the first point whose
    exact distance is at most c*r, BUDGET_EXHAUSTED with the best point
    this call verified once ``budget`` new points have been checked, and
    NOT_FOUND if all L streams drain first.
    """
    return _rc_scan(index, q, r, budget, visited, dynamic=True)


def fb_rc_nn(index: DbLshIndex, q, r: float, budget: int, visited: set) -> RcResult:
    """rc_nn with candidates drawn from fixed quantized cells at width w0*r."""
    return _rc_scan(index, q, r, budget, visited, dynamic=False)


def _ann_search(
    index: DbLshIndex,
    q,
    k: int,
    dynamic: bool,
    budget_mode: str,
    explain: bool,
) -> QueryOutcome:
    if k < 1 or k > index.n:
        raise ParameterError(f"k must be in [1, {index.n}], got {k}")
    if budget_mode not in ("cumulative", "per-round"):
        raise ParameterError(f"unknown budget mode {budget_mode!r}")

    t_start = time.perf_counter()
    qs = _check_query(index, q)
    params = index.params
    centers = project(index.family, qs)
    t_project = time.perf_counter() - t_start

    budget = 2 * params.t * params.L + k
    visited: set[int] = set()
    # Min-heap of negated keys keeps the k best (distance, id) pairs; the
    # root is the current k-th best.
    heap: list[tuple[float, int]] = []
    trace: list[dict] | None = [] if explain else None
    total_verified = 0
    exhausted = False
    rounds = 0

    while True:
        radius = params.c**rounds
        rounds += 1
        cr = params.c * radius
        w = params.w0 * radius
        per_table = [0] * params.L if explain else None
        if trace is not None:
            trace.append(
                {"r": radius, "w": w, "per_table_new": per_table, "verified_total": 0}
            )

        # A point verified at an earlier radius may already satisfy this
        # round's distance test; it will not stream again, so check first.
        if len(heap) == k and -heap[0][0] <= cr:
            if trace is not None:
                trace[-1]["verified_total"] = total_verified
            break

        round_verified = 0
        done = False
        for i in range(params.L):
            for pid in _table_stream(index, centers, i, w, dynamic):
                if pid in visited:
                    continue
                visited.add(pid)
                sdist = _distance(index, qs, pid)
                total_verified += 1
                round_verified += 1
                if per_table is not None:
                    per_table[i] += 1
                heapq.heappush(heap, (-sdist, -pid))
                if len(heap) > k:
                    heapq.heappop(heap)
                if len(heap) == k and -heap[0][0] <= cr:
                    done = True
                    break
                used = total_verified if budget_mode == "cumulative" else round_verified
                if used >= budget:
                    done = True
                    exhausted = True
                    break
            if done:
                break
        if trace is not None:
            trace[-1]["verified_total"] = total_verified
        if done:
            break

    neighbors = sorted((-d, -nid) for d, nid in heap)
    scale = index.scale
    result = [(nid, d / scale) for d, nid in neighbors]
    timings = {
        "project": t_project,
        "search": time.perf_counter() - t_start - t_project,
        "total": time.perf_counter() - t_start,
    }
    if trace is not None:
        trace.append({"exhausted": exhausted})
    return QueryOutcome(
        neighbors=result,
        terminating_radius=radius,
        candidates_verified=total_verified,
        rounds=rounds,
        timings=timings,
        explain=trace,
    )


def c_ann(
    index: DbLshIndex,
    q,
    *,
    budget_mode: str = "cumulative",
    explain: bool = False,
) -> QueryOutcome:
    """Approximate nearest neighbor by radius expansion, budget 2tL + 1."""
    return _ann_search(index, q, 1, True, budget_mode, explain)


def ck_ann(
    index: DbLshIndex,
    q,
    k: int,
    *,
    budget_mode: str = "cumulative",
    explain: bool = False,
) -> QueryOutcome:
    """Approximate k nearest neighbors, budget 2tL + k."""
    return _ann_search(index, q, k, True, budget_mode, explain)


def fb_c_ann(
    index: DbLshIndex,
    q,
    *,
    budget_mode: str = "cumulative",
    explain: bool = False,
) -> QueryOutcome:
    """c_ann over fixed quantized buckets instead of query-centered windows."""
    return _ann_search(index, q, 1, False, budget_mode, explain)


def fb_ck_ann(
    index: DbLshIndex,
    q,
    k: int,
    *,
    budget_mode: str = "cumulative",
    explain: bool = False,
) -> QueryOutcome:
    """ck_ann over fixed quantized buckets instead of query-centered windows."""
    return _ann_search(index, q, k, False, budget_mode, explain)


# ---------------------------------------------------------------------------
# Persistence: little-endian binary, one canonical byte layout per index.


class _Reader:
    def __init__(self, buf: bytes, path: Path):
        self.buf = buf
        self.path = path
        self.offset = 0

    def take(self, nbytes: int) -> bytes:
        if self.offset + nbytes > len(self.buf):
            raise IndexFormatError(
                f"{self.path}: truncated index file at byte offset {self.offset}"
            )
        out = self.buf[self.offset : self.offset + nbytes]
        self.offset += nbytes
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: str, count: int) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(itemsize * count), dtype=dtype).copy()


def _pack_array(a: np.ndarray, dtype: str) -> bytes:
    return np.ascontiguousarray(a, dtype=dtype).tobytes()


def save_index(index: DbLshIndex, path) -> None:
    """Write the index in its canonical binary form.

    The hash family is not stored; it regenerates bit-identically from the
    recorded seed. Rebuilding the same dataset with the same parameters
    yields a byte-identical file.
    """
    p = index.params
    parts = [
        _MAGIC,
        struct.pack(
            "<HBBIIIIII",
            _VERSION,
            1 if p.mode == "theoretical" else 0,
            0,
            p.K,
            p.L,
            index.dim,
            index.fanout,
            p.t,
            0,
        ),
        struct.pack("<QQ", index.n, p.seed),
        struct.pack("<ddd", p.c, p.w0, index.scale),
        index.dataset.checksum().encode("ascii"),
    ]
    for tbl in index.tables:
        parts.append(struct.pack("<IIQ", tbl.table_id, len(tbl.levels), tbl.n))
        parts.append(_pack_array(tbl.ids, "<i8"))
        parts.append(_pack_array(tbl.coords, "<f8"))
        for lvl in tbl.levels:
            parts.append(struct.pack("<Q", len(lvl)))
            parts.append(_pack_array(lvl.bmin, "<f8"))
            parts.append(_pack_array(lvl.bmax, "<f8"))
            for arr in (lvl.start, lvl.end, lvl.entry_start, lvl.entry_end):
                parts.append(_pack_array(arr, "<i8"))
    Path(path).write_bytes(b"".join(parts))


def load_index(path, ds: Dataset) -> DbLshIndex:
    """Read an index back; ``ds`` must be the dataset it was built from."""
    path = Path(path)
    rd = _Reader(path.read_bytes(), path)
    magic = rd.take(len(_MAGIC))
    if magic != _MAGIC:
        raise IndexFormatError(f"{path}: bad magic {magic!r}")
    (version, mode_flag, _res, K, L, dim, fanout, t, _pad) = rd.unpack("<HBBIIIIII")
    if version != _VERSION:
        raise IndexFormatError(f"{path}: unsupported format version {version}")
    n, seed = rd.unpack("<QQ")
    c, w0, scale = rd.unpack("<ddd")
    checksum = rd.take(64).decode("ascii")

    if ds.n != n or ds.dim != dim:
        raise ChecksumError(
            f"{path}: index built for n={n}, dim={dim}; dataset has "
            f"n={ds.n}, dim={ds.dim}"
        )
    if ds.checksum() != checksum:
        raise ChecksumError(f"{path}: dataset checksum does not match the index")

    params = IndexParams(
        c=c,
        w0=w0,
        t=t,
        K=K,
        L=L,
        mode="theoretical" if mode_flag else "practical",
        seed=seed,
    )
    tables = []
    for _ in range(L):
        table_id, n_levels, tn = rd.unpack("<IIQ")
        ids = rd.array("<i8", tn)
        coords = rd.array("<f8", tn * K).reshape(tn, K)
        levels = []
        for _lvl in range(n_levels):
            (m,) = rd.unpack("<Q")
            bmin = rd.array("<f8", m * K).reshape(m, K)
            bmax = rd.array("<f8", m * K).reshape(m, K)
            start = rd.array("<i8", m)
            end = rd.array("<i8", m)
            estart = rd.array("<i8", m)
            eend = rd.array("<i8", m)
            levels.append(_Level(bmin, bmax, start, end, estart, eend))
        tables.append(
            ProjectedTable(table_id=table_id, dim=K, ids=ids, coords=coords, levels=levels)
        )
    if rd.offset != len(rd.buf):
        raise IndexFormatError(
            f"{path}: {len(rd.buf) - rd.offset} trailing bytes at offset {rd.offset}"
        )

    family = HashFamily.from_seed(seed, L, K, dim)
    coords = ds.coords if scale == 1.0 else ds.coords * scale
    index = DbLshIndex(
        params=params,
        family=family,
        tables=tables,
        dataset=ds,
        fanout=fanout,
        scale=scale,
        build_meta=BuildMeta(seed=seed),
        _coords=coords,
    )
    index.audit()
    return index
