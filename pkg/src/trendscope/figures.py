"""Figure rendering for the report path: per-category horizontal bar panels
(runway vs street deltas side by side) saved as deterministic SVG files.

Byte determinism: a fixed svg.hashsalt plus a cleared Date field means the
same report always renders the same bytes, which the reproducibility checks
rely on.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluate import AccuracyReport
from .trend import REPORT_CATEGORIES, TrendReport

_HASHSALT = "trendscope"
_AGREEMENT_COLORS = {"correlated": "#c0392b", "divergent": "#27ae60", "flat": "#95a5a6"}


def _svg_metadata() -> dict:
    return {"Date": None, "Creator": "trendscope.figure/1"}


def render_trend_figures(report: TrendReport, out_dir: str) -> list[str]:
    """One SVG per report category; returns the written paths."""
    plt.rcParams["svg.hashsalt"] = _HASHSALT
    year1, year2 = report.years
    paths = []
    for category in REPORT_CATEGORIES:
        trend = report.categories[category]
        order = sorted(
            range(len(trend.attribute_ids)), key=lambda i: trend.show_deltas[i]
        )
        names = [trend.attribute_ids[i] for i in order]
        show = [trend.show_deltas[i] for i in order]
        street = [trend.street_deltas[i] for i in order]
        colors = [_AGREEMENT_COLORS[trend.agreement[i]] for i in order]

        height = max(2.2, 0.32 * len(names) + 1.2)
        fig, (ax_show, ax_street) = plt.subplots(
            1, 2, figsize=(8.0, height), sharey=True
        )
        positions = range(len(names))
        ax_show.barh(positions, show, color=colors)
        ax_street.barh(positions, street, color=colors)
        ax_show.set_yticks(list(positions))
        ax_show.set_yticklabels(names, fontsize=8)
        ax_show.set_title(f"fashion show {year1}->{year2}", fontsize=9)
        ax_street.set_title(f"street chic {year1}->{year2}", fontsize=9)
        for ax in (ax_show, ax_street):
            ax.axvline(0.0, color="black", linewidth=0.8)
            ax.set_xlabel("prevalence delta", fontsize=8)
            ax.tick_params(labelsize=8)
        r_text = f"r = {trend.r:.3f}" if trend.r is not None else "r undefined"
        fig.suptitle(f"{category} ({r_text})", fontsize=11)
        fig.tight_layout(rect=(0, 0, 1, 0.94))

        path = os.path.join(out_dir, f"trend_{category}.svg")
        fig.savefig(path, format="svg", metadata=_svg_metadata())
        plt.close(fig)
        paths.append(path)
    return paths


def render_accuracy_figure(report: AccuracyReport, out_path: str) -> str:
    """Horizontal accuracy bars, one per attribute."""
    plt.rcParams["svg.hashsalt"] = _HASHSALT
    entries = list(report.per_attribute.values())
    entries.sort(key=lambda e: e.accuracy)
    names = [e.attribute_id for e in entries]
    values = [e.accuracy for e in entries]

    height = max(2.2, 0.28 * len(names) + 1.0)
    fig, ax = plt.subplots(figsize=(6.5, height))
    ax.barh(range(len(names)), values, color="#2980b9")
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xlim(0.0, 1.0)
    ax.axvline(report.overall, color="#c0392b", linewidth=1.0, linestyle="--")
    ax.set_xlabel("accuracy", fontsize=8)
    ax.set_title(f"per-attribute accuracy (overall {report.overall:.3f})", fontsize=10)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata=_svg_metadata())
    plt.close(fig)
    return out_path
