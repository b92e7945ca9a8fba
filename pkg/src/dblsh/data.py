"""Point datasets: fvecs I/O, synthetic generation, validation.

The on-disk format is the classic fvecs layout: each record is a 4-byte
little-endian int32 dimension followed by that many little-endian float32
values, and every record in a file must declare the same dimension.
Coordinates are widened to float64 in memory so downstream geometry and
probability checks are not polluted by storage precision; writing narrows
back to float32.

Point ids are implicit: the i-th record of a file (or the i-th generated
point) has id i. Ids are never stored on disk.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, FvecsFormatError, ParameterError

__all__ = [
    "Dataset",
    "load_fvecs",
    "write_fvecs",
    "generate_synthetic",
]


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of n points in d dimensions.

    ``coords`` has shape (n, dim) and dtype float64; row i is the point with
    id i. Instances are validated on construction and safe to share across
    threads.
    """

    dim: int
    coords: np.ndarray
    name: str = "dataset"

    def __post_init__(self) -> None:
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2:
            raise ParameterError(f"coords must be 2-D, got shape {coords.shape}")
        if coords.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"coords have {coords.shape[1]} columns, expected dim={self.dim}"
            )
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        self.validate()

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def point(self, point_id: int) -> np.ndarray:
        return self.coords[point_id]

    def validate(self) -> None:
        """Check structural invariants; raises on the first violation."""
        bad = ~np.isfinite(self.coords)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ParameterError(
                f"non-finite coordinate at point {int(i)}, component {int(j)}"
            )

    def checksum(self) -> str:
        """Content hash of (dim, n, coordinates); the name is a label only."""
        h = hashlib.sha256()
        h.update(b"dblsh-dataset-v1")
        h.update(np.int64(self.dim).tobytes())
        h.update(np.int64(self.n).tobytes())
        h.update(np.ascontiguousarray(self.coords, dtype="<f8").tobytes())
        return h.hexdigest()

    def take(self, indices, name: str | None = None) -> "Dataset":
        """New dataset from a subset of rows (ids are renumbered 0..m-1)."""
        return Dataset(self.dim, self.coords[np.asarray(indices)], name or self.name)


def load_fvecs(path) -> Dataset:
    """Read an fvecs file into a Dataset.

    Raises FvecsFormatError naming the byte offset for truncated records
    and DimensionMismatchError naming the record index when a record
    declares a different dimension than the first one.
    """
    path = Path(path)
    buf = path.read_bytes()
    if len(buf) == 0:
        return Dataset(0, np.empty((0, 0)), name=path.stem)
    if len(buf) < 4:
        raise FvecsFormatError(f"{path}: truncated header at byte offset 0")

    dim = int(np.frombuffer(buf, dtype="<i4", count=1)[0])
    if dim <= 0:
        raise FvecsFormatError(f"{path}: invalid dimension {dim} at byte offset 0")

    record_size = 4 + 4 * dim
    if len(buf) % record_size != 0:
        _scan_for_error(path, buf, dim)

    raw = np.frombuffer(buf, dtype="<f4").reshape(-1, 1 + dim)
    headers = np.ascontiguousarray(raw[:, 0]).view("<i4")
    mismatched = np.nonzero(headers != dim)[0]
    if mismatched.size:
        rec = int(mismatched[0])
        raise DimensionMismatchError(
            f"{path}: record {rec} declares dimension {int(headers[rec])}, expected {dim}"
        )
    ds = Dataset(dim, raw[:, 1:].astype(np.float64), name=path.stem)
    return ds


def _scan_for_error(path: Path, buf: bytes, dim: int) -> None:
    """Walk records one by one to locate the precise failure."""
    offset = 0
    rec = 0
    n = len(buf)
    while offset < n:
        if n - offset < 4:
            raise FvecsFormatError(f"{path}: truncated header at byte offset {offset}")
        d = int(np.frombuffer(buf, dtype="<i4", count=1, offset=offset)[0])
        if d != dim:
            raise DimensionMismatchError(
                f"{path}: record {rec} declares dimension {d}, expected {dim}"
            )
        if n - offset - 4 < 4 * d:
            raise FvecsFormatError(
                f"{path}: truncated record {rec} at byte offset {offset}"
            )
        offset += 4 + 4 * d
        rec += 1
    # Walk completed cleanly, so the length mismatch came from somewhere else.
    raise FvecsFormatError(f"{path}: inconsistent file length {n}")


def write_fvecs(ds: Dataset, path) -> None:
    """Write a Dataset in fvecs layout (coordinates narrowed to float32)."""
    path = Path(path)
    n, dim = ds.coords.shape
    out = np.empty((n, 1 + dim), dtype="<f4")
    out[:, 0] = np.full(n, dim, dtype="<i4").view("<f4")
    out[:, 1:] = ds.coords.astype("<f4")
    try:
        path.write_bytes(out.tobytes() if n else b"")
    except OSError as exc:
        raise FvecsFormatError(f"cannot write {path}: {exc}") from exc


def generate_synthetic(
    n: int,
    d: int,
    distribution: str = "uniform-cube",
    seed: int = 0,
    *,
    n_clusters: int = 10,
    spread: float = 0.05,
    name: str | None = None,
) -> Dataset:
    """Deterministically generate a synthetic dataset.

    ``uniform-cube`` draws points uniformly from [0, 1)^d.
    ``gaussian-clusters`` draws ``n_clusters`` centers uniformly from the
    unit cube, assigns each point to a uniformly random center, and adds
    isotropic Gaussian noise with standard deviation ``spread``.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")

    rng = np.random.default_rng(seed)
    if distribution == "uniform-cube":
        coords = rng.random((n, d))
    elif distribution == "gaussian-clusters":
        if n_clusters < 1:
            raise ParameterError(f"n_clusters must be >= 1, got {n_clusters}")
        if spread < 0:
            raise ParameterError(f"spread must be >= 0, got {spread}")
        centers = rng.random((n_clusters, d))
        assignment = rng.integers(0, n_clusters, size=n)
        coords = centers[assignment] + spread * rng.standard_normal((n, d))
    else:
        raise ParameterError(f"unknown distribution {distribution!r}")

    label = name or f"{distribution}-n{n}-d{d}-s{seed}"
    return Dataset(d, coords, name=label)
