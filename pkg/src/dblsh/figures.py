"""Render benchmark reports as figures next to the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import BenchReport  # noqa: E402

__all__ = ["render_benchmark_figures"]

_STYLES = {
    "db-lsh": {"color": "tab:red", "marker": "o"},
    "fb-lsh": {"color": "tab:blue", "marker": "s"},
    "oracle": {"color": "tab:gray", "marker": "x"},
}


def _curve_axes(points, metric, ylabel, ax):
    by_alg: dict[str, list] = {}
    for p in points:
        by_alg.setdefault(p["alg"], []).append(p)
    for alg, pts in sorted(by_alg.items()):
        xs = [p["mean_query_time_ms"] for p in pts]
        ys = [p[metric] for p in pts]
        ax.plot(xs, ys, label=alg, **_STYLES.get(alg, {}))
    ax.set_xlabel("mean query time (ms)")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend()


def render_benchmark_figures(report: BenchReport, out_dir) -> list[Path]:
    """Write recall-vs-time and ratio-vs-time curves as PNG files.

    Returns the paths written (empty when the report has no successful
    cells).
    """
    points = report.curve_points()
    if not points:
        return []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric, ylabel, fname in (
        ("recall", "recall@k", "recall_vs_time.png"),
        ("overall_ratio", "overall ratio", "ratio_vs_time.png"),
    ):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        _curve_axes(points, metric, ylabel, ax)
        fig.tight_layout()
        path = out_dir / fname
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
