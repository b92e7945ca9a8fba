"""Dynamic-bucketing LSH for c-approximate nearest-neighbor search.

The library projects points into L low-dimensional spaces with Gaussian
compound hashes, bulk-loads a window-queryable tree per space, and answers
queries by growing query-centered hypercubic buckets until the candidate
budget or the distance guarantee stops the search. A fixed-bucket baseline,
an exact brute-force oracle, and a benchmark harness round out the package.
"""

__version__ = "0.1.0"

from .data import Dataset, generate_synthetic, load_fvecs, write_fvecs
from .engine import (
    DbLshIndex,
    QueryOutcome,
    RcResult,
    RcStatus,
    build,
    c_ann,
    ck_ann,
    fb_c_ann,
    fb_ck_ann,
    fb_rc_nn,
    load_index,
    rc_nn,
    save_index,
)
from .errors import (
    BuildError,
    ChecksumError,
    DbLshError,
    DimensionMismatchError,
    FvecsFormatError,
    IndexFormatError,
    ParameterError,
)
from .evaluation import (
    BenchReport,
    BenchRow,
    GroundTruth,
    brute_force_knn,
    ground_truth,
    overall_ratio,
    recall,
    run_benchmark,
)
from .hashing import (
    CollisionProfile,
    HashFamily,
    IndexParams,
    derive_alpha,
    derive_params,
    dynamic_collision_probability,
    project,
    project_many,
    quantize,
    radius_schedule,
    static_collision_probability,
)
from .strtree import (
    ProjectedTable,
    QueryStats,
    WindowRegion,
    bulk_build,
    count_in_window,
    window_query,
)

__all__ = [
    "__version__",
    "Dataset",
    "generate_synthetic",
    "load_fvecs",
    "write_fvecs",
    "DbLshIndex",
    "QueryOutcome",
    "RcResult",
    "RcStatus",
    "build",
    "c_ann",
    "ck_ann",
    "fb_c_ann",
    "fb_ck_ann",
    "fb_rc_nn",
    "rc_nn",
    "save_index",
    "load_index",
    "BuildError",
    "ChecksumError",
    "DbLshError",
    "DimensionMismatchError",
    "FvecsFormatError",
    "IndexFormatError",
    "ParameterError",
    "BenchReport",
    "BenchRow",
    "GroundTruth",
    "brute_force_knn",
    "ground_truth",
    "overall_ratio",
    "recall",
    "run_benchmark",
    "CollisionProfile",
    "HashFamily",
    "IndexParams",
    "derive_alpha",
    "derive_params",
    "dynamic_collision_probability",
    "project",
    "project_many",
    "quantize",
    "radius_schedule",
    "static_collision_probability",
    "ProjectedTable",
    "QueryStats",
    "WindowRegion",
    "bulk_build",
    "count_in_window",
    "window_query",
]
