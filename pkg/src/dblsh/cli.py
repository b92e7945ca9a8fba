"""Command-line front end.

Subcommands: gen, params, build, query, bench. Exit codes are stable for
scripting: 0 on success, 1 on runtime or I/O failure, 2 on usage errors or
invalid parameter combinations.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, generate_synthetic, load_fvecs, write_fvecs
from .engine import build, ck_ann, fb_ck_ann, load_index, save_index
from .errors import DbLshError, DimensionMismatchError, ParameterError
from .evaluation import run_benchmark
from .hashing import IndexParams, derive_alpha, derive_params


def _parse_dist(text: str) -> tuple[str, int, float]:
    """'uniform' or 'clusters:K,SPREAD' -> (distribution, n_clusters, spread)."""
    if text in ("uniform", "uniform-cube"):
        return "uniform-cube", 0, 0.0
    for prefix in ("clusters:", "gaussian-clusters:"):
        if text.startswith(prefix):
            body = text[len(prefix):]
            try:
                k_str, spread_str = body.split(",")
                return "gaussian-clusters", int(k_str), float(spread_str)
            except ValueError as exc:
                raise ParameterError(
                    f"--dist expects '{prefix}K,SPREAD', got {text!r}"
                ) from exc
    raise ParameterError(
        f"unknown distribution {text!r}; use 'uniform' or 'clusters:K,SPREAD'"
    )


def cmd_gen(args) -> int:
    if args.n < 1:
        raise ParameterError("--n must be >= 1")
    if args.d < 1:
        raise ParameterError("--d must be >= 1")
    dist, n_clusters, spread = _parse_dist(args.dist)
    ds = generate_synthetic(
        args.n, args.d, dist, args.seed, n_clusters=n_clusters, spread=spread
    )
    write_fvecs(ds, args.output)
    print(f"wrote {args.output}: n={ds.n} d={ds.dim} dist={args.dist} seed={args.seed}")
    return 0


def cmd_params(args) -> int:
    if args.c <= 1:
        raise ParameterError("--c must be > 1")
    out: dict = {"c": args.c}

    gamma = args.gamma
    w0 = args.w0
    if w0 is None and gamma is not None:
        w0 = 2.0 * gamma * args.c * args.c
    if gamma is None and w0 is not None:
        gamma = w0 / (2.0 * args.c * args.c)
    if w0 is None:
        raise ParameterError("give --w0 or --gamma so the bucket width is defined")

    alpha = derive_alpha(gamma)
    out.update({"w0": w0, "gamma": gamma, "alpha": alpha})

    if args.n is not None:
        if args.t is None:
            raise ParameterError("--t is required together with --n")
        K, L, profile = derive_params(args.n, args.t, args.c, w0)
        out.update(
            {
                "n": args.n,
                "t": args.t,
                "p1": profile.p1,
                "p2": profile.p2,
                "rho_star": profile.rho_star,
                "K": K,
                "L": L,
                "bound": {
                    "one_over_c_alpha": args.c**-alpha,
                    "rho_star_le_bound": profile.rho_star <= args.c**-alpha,
                },
            }
        )
    print(json.dumps(out, indent=2))
    return 0


def _estimate_scale(ds: Dataset, sample: int = 100, seed: int = 0) -> float:
    """1 / mean nearest-neighbor distance over a sample of points."""
    rng = np.random.default_rng(seed)
    picks = rng.choice(ds.n, size=min(sample, ds.n), replace=False)
    dists = []
    for pid in picks:
        diff = ds.coords - ds.coords[pid]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        d[pid] = np.inf
        dists.append(d.min())
    mean_nn = float(np.mean(dists))
    if mean_nn <= 0:
        return 1.0
    return 1.0 / mean_nn


def _params_from_args(args, n: int) -> IndexParams:
    if args.mode == "theoretical":
        if args.t is None or args.c is None or args.w0 is None:
            raise ParameterError("theoretical mode needs --t, --c and --w0")
        return IndexParams.theoretical(n, args.t, args.c, args.w0, seed=args.seed)
    if args.K is None or args.L is None:
        raise ParameterError("practical mode needs --K and --L")
    if args.t is None:
        raise ParameterError("--t is required (it sets the candidate budget 2tL)")
    return IndexParams.practical(
        args.K, args.L, args.t, args.c, args.w0, seed=args.seed
    )


def cmd_build(args) -> int:
    ds = load_fvecs(args.data)
    params = _params_from_args(args, ds.n)
    scale = _estimate_scale(ds, seed=args.seed) if args.rescale else 1.0
    t0 = time.perf_counter()
    index = build(ds, params, fanout=args.fanout, scale=scale)
    save_index(index, args.output)
    elapsed = time.perf_counter() - t0
    print(
        f"built {args.output}: n={ds.n} d={ds.dim} K={params.K} L={params.L} "
        f"t={params.t} c={params.c} w0={params.w0} seed={params.seed} "
        f"mode={params.mode} scale={scale:.6g} build_seconds={elapsed:.3f}"
    )
    return 0


def _load_queries(args, dim: int) -> np.ndarray:
    if args.vec is not None:
        try:
            vec = np.array([float(x) for x in args.vec.split(",")], dtype=np.float64)
        except ValueError as exc:
            raise ParameterError(f"--vec must be comma-separated floats: {exc}") from exc
        return vec.reshape(1, -1)
    if args.queries is not None:
        qs = load_fvecs(args.queries)
        return qs.coords
    raise ParameterError("give --vec or --queries")


def cmd_query(args) -> int:
    ds = load_fvecs(args.data)
    index = load_index(args.index, ds)
    queries = _load_queries(args, ds.dim)
    if queries.shape[1] != ds.dim:
        raise DimensionMismatchError(
            f"queries have dimension {queries.shape[1]}, dataset has {ds.dim}"
        )
    if args.k < 1 or args.k > ds.n:
        raise ParameterError(f"--k must be in [1, {ds.n}]")

    query_fn = fb_ck_ann if args.alg == "fb-lsh" else ck_ann
    results = []
    for qi in range(queries.shape[0]):
        outcome = query_fn(
            index,
            queries[qi],
            args.k,
            budget_mode=args.budget_mode,
            explain=args.explain,
        )
        entry = {
            "query": qi,
            "neighbors": [[pid, dist] for pid, dist in outcome.neighbors],
            "terminating_radius": outcome.terminating_radius,
            "candidates_verified": outcome.candidates_verified,
            "rounds": outcome.rounds,
        }
        if args.explain:
            entry["explain"] = outcome.explain
        results.append(entry)
    print(json.dumps({"alg": args.alg, "k": args.k, "results": results}, indent=2))
    return 0


def _read_config(path) -> dict[str, str]:
    """Flat 'key = value' lines; '#' starts a comment; later keys win."""
    conf: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        conf[key.strip()] = value.strip()
    return conf


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def cmd_bench(args) -> int:
    conf: dict[str, str] = {}
    if args.config:
        conf = _read_config(args.config)

    def setting(key: str, override, default=None):
        if override is not None:
            return override
        return conf.get(key, default)

    data_path = setting("data", args.data)
    queries_path = setting("queries", args.queries)
    if not data_path or not queries_path:
        raise ParameterError("bench needs data and queries (flags or config file)")
    out_dir = Path(setting("out_dir", args.out_dir, "bench-out"))
    algs = str(setting("algs", args.algs, "db-lsh,fb-lsh")).split(",")
    algs = [a.strip() for a in algs if a.strip()]
    k = int(setting("k", args.k, 50))
    reps = int(setting("reps", args.reps, 1))
    threads = int(setting("threads", args.threads, 1))
    fanout = int(setting("fanout", None, 32))
    mode = str(setting("mode", None, "practical"))
    t = int(setting("t", None, 50))
    cs = _floats(str(setting("cs", args.cs, "1.5")))
    seeds = _ints(str(setting("seeds", args.seeds, "0")))
    gamma = setting("gamma", None)
    w0_fixed = setting("w0", None)
    figures = str(setting("figures", None, "true")).lower() != "false"
    if args.no_figures:
        figures = False

    ds = load_fvecs(data_path)
    queries = load_fvecs(queries_path)

    grid = []
    for c in cs:
        if w0_fixed is not None:
            w0 = float(w0_fixed)
        else:
            g = float(gamma) if gamma is not None else 2.0
            w0 = 2.0 * g * c * c
        for seed in seeds:
            if mode == "theoretical":
                K, L, _ = derive_params(ds.n, t, c, w0)
            else:
                K = int(setting("K", None, 10))
                L = int(setting("L", None, 5))
            grid.append(
                {"c": c, "w0": w0, "t": t, "K": K, "L": L, "mode": mode, "seed": seed}
            )

    report = run_benchmark(
        ds,
        queries,
        algs,
        grid,
        k,
        repetitions=reps,
        fanout=fanout,
        threads=threads,
        cache_dir=out_dir / "gt-cache",
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write_csv(out_dir / "report.csv")
    report.write_json(out_dir / "report.json")
    report.write_curves_csv(out_dir / "curves.csv")
    written = [out_dir / "report.csv", out_dir / "report.json", out_dir / "curves.csv"]
    if figures:
        from .figures import render_benchmark_figures

        written.extend(render_benchmark_figures(report, out_dir))
    for path in written:
        print(f"wrote {path}")

    failures = [r for r in report.rows if r.error]
    for r in failures:
        print(f"cell failed: alg={r.alg} c={r.c} seed={r.seed}: {r.error}", file=sys.stderr)
    if failures and len(failures) == len(report.rows):
        return 1
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dblsh",
        description="Dynamic-bucketing LSH: datasets, parameter theory, index build, queries, benchmarks.",
    )
    parser.add_argument("--version", action="version", version=f"dblsh {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic fvecs dataset")
    p.add_argument("--n", type=int, required=True, help="number of points")
    p.add_argument("--d", type=int, required=True, help="dimensionality")
    p.add_argument(
        "--dist",
        default="uniform",
        help="'uniform' or 'clusters:K,SPREAD' (e.g. clusters:10,0.05)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("params", help="derive K, L and the theory exponents")
    p.add_argument("--c", type=float, required=True, help="approximation ratio, > 1")
    p.add_argument("--w0", type=float, help="initial bucket width")
    p.add_argument("--gamma", type=float, help="sets w0 = 2*gamma*c^2 when --w0 absent")
    p.add_argument("--n", type=int, help="dataset cardinality (enables K/L derivation)")
    p.add_argument("--t", type=int, help="candidate multiplier")
    p.set_defaults(fn=cmd_params)

    p = sub.add_parser("build", help="build and save an index")
    p.add_argument("--data", required=True, help="fvecs dataset path")
    p.add_argument("-o", "--output", required=True, help="index file path")
    p.add_argument("--mode", choices=("theoretical", "practical"), default="practical")
    p.add_argument("--c", type=float, default=1.5)
    p.add_argument("--w0", type=float, default=9.0)
    p.add_argument("--t", type=int, help="candidate multiplier (budget is 2tL + k)")
    p.add_argument("--K", type=int, help="hash functions per table (practical mode)")
    p.add_argument("--L", type=int, help="number of tables (practical mode)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fanout", type=int, default=32)
    p.add_argument(
        "--rescale",
        action="store_true",
        help="scale data so the mean NN distance is about 1 (stored in the index)",
    )
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("query", help="run (c,k)-ANN queries against a saved index")
    p.add_argument("--index", required=True)
    p.add_argument("--data", required=True, help="the dataset the index was built from")
    p.add_argument("--vec", help="inline query vector: comma-separated floats")
    p.add_argument("--queries", help="fvecs file of query points")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--alg", choices=("db-lsh", "fb-lsh"), default="db-lsh")
    p.add_argument("--budget-mode", choices=("cumulative", "per-round"), default="cumulative")
    p.add_argument(
        "--explain",
        action="store_true",
        help="include per-round window widths and per-table candidate counts",
    )
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("bench", help="run a benchmark grid and write reports")
    p.add_argument("--config", help="flat key=value config file (see README)")
    p.add_argument("--data")
    p.add_argument("--queries")
    p.add_argument("--out-dir")
    p.add_argument("--algs", help="comma list from db-lsh, fb-lsh, oracle")
    p.add_argument("--k", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--cs", help="comma list of approximation ratios")
    p.add_argument("--seeds", help="comma list of seeds")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ParameterError, DimensionMismatchError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DbLshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
