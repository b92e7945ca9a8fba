"""Packed K-dimensional point trees with exact, lazily enumerated window queries.

Trees are bulk-loaded with sort-tile-recursive packing: entries are sorted
along dimension 0, partitioned into slabs sized to hold a whole number of
leaves, and each slab recurses on the next dimension until the last
dimension is chopped into leaves. Upper levels group consecutive nodes, so
the whole structure lives in a handful of flat arrays per level and a build
from the same entries is always byte-identical.

Window queries use closed intervals on every face: a point exactly on the
boundary is inside. The query is a generator; consumers that stop early
never pay for the rest of the traversal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import BuildError, DimensionMismatchError, ParameterError

__all__ = [
    "ProjectedTable",
    "WindowRegion",
    "QueryStats",
    "bulk_build",
    "window_query",
    "count_in_window",
]


@dataclass(frozen=True)
class WindowRegion:
    """Axis-aligned hypercube: all points within width/2 of center per axis."""

    center: np.ndarray
    width: float

    def __post_init__(self) -> None:
        center = np.asarray(self.center, dtype=np.float64)
        if center.ndim != 1:
            raise ParameterError(f"center must be 1-D, got shape {center.shape}")
        if self.width <= 0:
            raise ParameterError(f"width must be > 0, got {self.width}")
        object.__setattr__(self, "center", center)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        half = 0.5 * self.width
        return self.center - half, self.center + half


@dataclass
class QueryStats:
    """Traversal instrumentation; only nodes whose box meets the window count."""

    nodes_visited: int = 0


@dataclass(frozen=True)
class _Level:
    # Children of node i live at [start[i], end[i]) in the level below
    # (entry rows for leaves). entry_start/end give the contiguous entry
    # range each subtree covers; packing keeps subtrees contiguous.
    bmin: np.ndarray
    bmax: np.ndarray
    start: np.ndarray
    end: np.ndarray
    entry_start: np.ndarray
    entry_end: np.ndarray

    def __len__(self) -> int:
        return self.bmin.shape[0]


@dataclass(frozen=True)
class ProjectedTable:
    """One projected copy of the dataset plus its packed tree.

    ``ids`` and ``coords`` are permuted into leaf order; ``levels[0]`` is
    the leaf level and ``levels[-1]`` holds the single root. Immutable
    after construction; concurrent queries are safe.
    """

    table_id: int
    dim: int
    ids: np.ndarray
    coords: np.ndarray
    levels: list[_Level] = field(repr=False)

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    @property
    def height(self) -> int:
        return len(self.levels)

    def nbytes(self) -> int:
        total = self.ids.nbytes + self.coords.nbytes
        for lvl in self.levels:
            total += sum(
                a.nbytes
                for a in (lvl.bmin, lvl.bmax, lvl.start, lvl.end, lvl.entry_start, lvl.entry_end)
            )
        return total

    def row_of(self, point_id: int) -> int:
        """Permuted row index of a point id (linear scan; diagnostics only)."""
        rows = np.nonzero(self.ids == point_id)[0]
        if rows.size == 0:
            raise ParameterError(f"point id {point_id} not in table {self.table_id}")
        return int(rows[0])


def _even_chunks(m: int, groups: int) -> list[tuple[int, int]]:
    """Split range(m) into `groups` consecutive chunks of near-equal size."""
    base, extra = divmod(m, groups)
    bounds = []
    pos = 0
    for g in range(groups):
        size = base + (1 if g < extra else 0)
        bounds.append((pos, pos + size))
        pos += size
    return bounds


def _tile(coords: np.ndarray, ids: np.ndarray, idx: np.ndarray, axis: int,
          n_leaves: int, fanout: int, K: int, out: list[np.ndarray]) -> None:
    order = idx[np.lexsort((ids[idx], coords[idx, axis]))]
    if axis == K - 1 or n_leaves == 1:
        for lo, hi in _even_chunks(order.size, n_leaves):
            out.append(order[lo:hi])
        return
    slabs = math.ceil(n_leaves ** (1.0 / (K - axis)))
    leaves_per_slab = math.ceil(n_leaves / slabs)
    capacity = leaves_per_slab * fanout
    pos = 0
    while pos < order.size:
        slab = order[pos:pos + capacity]
        _tile(coords, ids, slab, axis + 1, math.ceil(slab.size / fanout), fanout, K, out)
        pos += capacity


def bulk_build(ids, coords, *, max_fanout: int = 32, table_id: int = 0) -> ProjectedTable:
    """Pack (id, vector) entries into a balanced tree.

    Produces exactly ceil(n / max_fanout) leaves. Sorting ties are broken
    by ascending point id, so the tree shape is a pure function of the
    entry set and the fanout.
    """
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    if ids.size == 0:
        raise BuildError("cannot build a table from zero entries")
    if coords.ndim != 2 or coords.shape[0] != ids.size:
        raise BuildError(
            f"coords shape {coords.shape} does not match {ids.size} ids"
        )
    if max_fanout < 2:
        raise ParameterError(f"max_fanout must be >= 2, got {max_fanout}")

    n, K = coords.shape
    n_leaves = math.ceil(n / max_fanout)
    leaves: list[np.ndarray] = []
    _tile(coords, ids, np.arange(n), 0, n_leaves, max_fanout, K, leaves)

    perm = np.concatenate(leaves)
    ids = ids[perm]
    coords = coords[perm]

    sizes = np.array([leaf.size for leaf in leaves], dtype=np.int64)
    end = np.cumsum(sizes)
    start = end - sizes
    bmin = np.stack([coords[s:e].min(axis=0) for s, e in zip(start, end)])
    bmax = np.stack([coords[s:e].max(axis=0) for s, e in zip(start, end)])
    levels = [_Level(bmin, bmax, start, end, start.copy(), end.copy())]

    while len(levels[-1]) > 1:
        below = levels[-1]
        m = len(below)
        chunks = _even_chunks(m, math.ceil(m / max_fanout))
        bmin = np.stack([below.bmin[s:e].min(axis=0) for s, e in chunks])
        bmax = np.stack([below.bmax[s:e].max(axis=0) for s, e in chunks])
        start = np.array([s for s, _ in chunks], dtype=np.int64)
        end = np.array([e for _, e in chunks], dtype=np.int64)
        estart = below.entry_start[start]
        eend = below.entry_end[end - 1]
        levels.append(_Level(bmin, bmax, start, end, estart, eend))

    return ProjectedTable(table_id=table_id, dim=K, ids=ids, coords=coords, levels=levels)


def window_query(
    tbl: ProjectedTable,
    win: WindowRegion,
    stats: QueryStats | None = None,
) -> Iterator[tuple[int, np.ndarray]]:
    """Enumerate entries inside the window, lazily, in depth-first tree order.

    Yields (point_id, projected vector). Boundaries are closed. The order
    is deterministic for a fixed tree. Only nodes whose box intersects the
    window are ever descended into (and counted in ``stats``).
    """
    if win.dim != tbl.dim:
        raise DimensionMismatchError(
            f"window has dim {win.dim}, table has dim {tbl.dim}"
        )
    lo, hi = win.bounds()
    root_lvl = tbl.height - 1
    root = tbl.levels[root_lvl]
    if not (np.all(root.bmin[0] <= hi) and np.all(root.bmax[0] >= lo)):
        return
    stack: list[tuple[int, int]] = [(root_lvl, 0)]
    while stack:
        depth, node = stack.pop()
        if stats is not None:
            stats.nodes_visited += 1
        lvl = tbl.levels[depth]
        s, e = int(lvl.start[node]), int(lvl.end[node])
        if depth == 0:
            block = tbl.coords[s:e]
            inside = np.nonzero(
                np.all(block >= lo, axis=1) & np.all(block <= hi, axis=1)
            )[0]
            for r in inside:
                row = s + int(r)
                yield int(tbl.ids[row]), tbl.coords[row]
        else:
            child = tbl.levels[depth - 1]
            hit = np.nonzero(
                np.all(child.bmin[s:e] <= hi, axis=1)
                & np.all(child.bmax[s:e] >= lo, axis=1)
            )[0]
            # reversed so the leftmost child is processed first
            for r in hit[::-1]:
                stack.append((depth - 1, s + int(r)))


def count_in_window(tbl: ProjectedTable, win: WindowRegion) -> int:
    """Number of entries a window query would yield, without yielding them.

    Subtrees whose box lies fully inside the window contribute their entry
    count directly.
    """
    if win.dim != tbl.dim:
        raise DimensionMismatchError(
            f"window has dim {win.dim}, table has dim {tbl.dim}"
        )
    lo, hi = win.bounds()
    root_lvl = tbl.height - 1
    root = tbl.levels[root_lvl]
    if not (np.all(root.bmin[0] <= hi) and np.all(root.bmax[0] >= lo)):
        return 0
    total = 0
    stack: list[tuple[int, int]] = [(root_lvl, 0)]
    while stack:
        depth, node = stack.pop()
        lvl = tbl.levels[depth]
        if np.all(lvl.bmin[node] >= lo) and np.all(lvl.bmax[node] <= hi):
            total += int(lvl.entry_end[node] - lvl.entry_start[node])
            continue
        s, e = int(lvl.start[node]), int(lvl.end[node])
        if depth == 0:
            block = tbl.coords[s:e]
            total += int(
                (np.all(block >= lo, axis=1) & np.all(block <= hi, axis=1)).sum()
            )
        else:
            child = tbl.levels[depth - 1]
            hit = np.nonzero(
                np.all(child.bmin[s:e] <= hi, axis=1)
                & np.all(child.bmax[s:e] >= lo, axis=1)
            )[0]
            for r in hit:
                stack.append((depth - 1, s + int(r)))
    return total
