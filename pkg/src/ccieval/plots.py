"""Static SVG figure emitters for reports and slope decompositions.

matplotlib is imported lazily and driven headless (Agg); every function
returns True when a file was written and False when there was nothing
plottable.
"""

from __future__ import annotations

from typing import Sequence

from .cci import SlopePoint
from .experiments import ExperimentReport, RegionMetricTable

_METRIC_COLORS = {"PCC": "tab:blue", "SRCC": "tab:orange", "KTAU": "tab:green", "CCI": "tab:red"}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def _series(report: ExperimentReport, metric: str, field: str) -> tuple[list, list]:
    xs, ys = [], []
    for label in report.grid:
        s = report.summaries[str(label)][metric]
        v = getattr(s, field)
        if v is not None:
            xs.append(label)
            ys.append(v)
    return xs, ys


def deviation_curves(report: ExperimentReport, path: str) -> bool:
    """Mean deviation, 5th/95th percentile deviation and spread vs grid size."""
    panels = [
        ("mean_deviation", "|sample mean - population|"),
        ("p5_deviation", "|5th/95th pct - population|"),
        ("std", "std of replicates"),
    ]
    has_data = any(_series(report, m, f)[0] for m in report.metrics for f, _ in panels)
    if not has_data:
        return False
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    numeric_x = all(isinstance(g, (int, float)) for g in report.grid)
    for ax, (fieldname, title) in zip(axes, panels):
        for m in report.metrics:
            xs, ys = _series(report, m, fieldname)
            if not xs:
                continue
            ax.plot(xs, ys, marker="o", ms=3, label=m, color=_METRIC_COLORS.get(m))
            if fieldname == "p5_deviation":
                xs2, ys2 = _series(report, m, "p95_deviation")
                ax.plot(xs2, ys2, marker="s", ms=3, ls="--", color=_METRIC_COLORS.get(m))
        if numeric_x:
            ax.set_xscale("log")
            ax.set_xlabel("sample size")
        ax.set_title(title, fontsize=10)
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True


def spread_curves(report: ExperimentReport, path: str) -> bool:
    """Replicate standard deviation vs rater-panel size."""
    has_data = any(_series(report, m, "std")[0] for m in report.metrics)
    if not has_data:
        return False
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for m in report.metrics:
        xs, ys = _series(report, m, "std")
        if xs:
            ax.plot(xs, ys, marker="o", ms=4, label=m, color=_METRIC_COLORS.get(m))
    ax.set_xlabel("raters in panel")
    ax.set_ylabel("std over replicates")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True


def region_bars(report: ExperimentReport, path: str) -> bool:
    """|restricted-range value - full-dataset value| per metric and region."""
    bars: dict[str, list[tuple[str, float]]] = {m: [] for m in report.metrics}
    for label in report.grid:
        for m in report.metrics:
            s = report.summaries[str(label)][m]
            if s.mean_deviation is not None:
                bars[m].append((str(label), s.mean_deviation))
    if not any(bars.values()):
        return False
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.8))
    regions = [str(g) for g in report.grid]
    width = 0.8 / max(1, len(report.metrics))
    for k, m in enumerate(report.metrics):
        values = {lab: v for lab, v in bars[m]}
        xs = [i + k * width for i in range(len(regions))]
        ys = [values.get(lab, 0.0) for lab in regions]
        ax.bar(xs, ys, width=width, label=m, color=_METRIC_COLORS.get(m))
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(regions))])
    ax.set_xticklabels(regions)
    ax.set_ylabel("|region - full dataset|")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True


def region_table_bars(table: RegionMetricTable, path: str) -> bool:
    """Per-region metric values next to the full-dataset value."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.5, 3.8))
    labels = list(table.region_labels)
    width = 0.8 / max(1, len(table.metrics))
    for k, m in enumerate(table.metrics):
        xs = [i + k * width for i in range(len(labels))]
        ys = [table.per_region[lab].get(m) or 0.0 for lab in labels]
        ax.bar(xs, ys, width=width, label=m, color=_METRIC_COLORS.get(m))
        full = table.full.get(m)
        if full is not None:
            ax.axhline(full, color=_METRIC_COLORS.get(m), ls=":", lw=1, alpha=0.7)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(labels))])
    ax.set_xticklabels(labels)
    ax.set_ylabel("metric value (dotted: full dataset)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True


def slope_scatter(points: Sequence[SlopePoint], path: str, title: str = "") -> bool:
    """Prediction slope vs MOS distance, concordant and discordant marked."""
    if not points:
        return False
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.2))
    conc = [(p.mos_distance, p.slope) for p in points if p.concordant]
    disc = [(p.mos_distance, p.slope) for p in points if not p.concordant]
    if conc:
        ax.scatter(*zip(*conc), s=14, c="tab:green", marker="o", label="concordant", alpha=0.7)
    if disc:
        ax.scatter(*zip(*disc), s=18, c="tab:red", marker="x", label="discordant", alpha=0.8)
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xlabel("MOS distance")
    ax.set_ylabel("prediction slope")
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return True
