"""Shared plot-data documents and their static rendering.

Every analysis result can be exported as a JSON document of the shape
``{kind, axes, series[], annotations[]}``.  The CLI writes these files and
the web client renders them verbatim, so any number shown anywhere traces
back to one of these documents.  Rendering to SVG via matplotlib is opt-in
and deterministic (fixed hash salt, no embedded dates).
"""

from __future__ import annotations

import json
import math
from typing import Sequence

import numpy as np

from .analysis import ComponentBreakdown, DensitySummary, OutlierReport
from .drift import DriftPoint, PValueSeries
from .parameters import fd_edge_key
from .scoring import LOG_FLOOR, LogScores


def _axis(label: str, scale: str = "linear") -> dict:
    return {"label": label, "scale": scale}


def trace_scores_doc(table: LogScores, train_end: int | None = None,
                     drift_points: Sequence[DriftPoint] = ()) -> dict:
    """Scatter of log10 trace means over trace index, with boundary markers."""
    y = np.log10(np.maximum(table.trace_means, LOG_FLOOR))
    annotations = []
    if train_end is not None:
        annotations.append({"type": "vline", "x": int(train_end), "label": "training boundary"})
    for dp in drift_points:
        annotations.append({"type": "vline", "x": int(dp.trace_index), "label": "drift"})
    return {
        "kind": "trace-scores",
        "axes": {"x": _axis("trace index"), "y": _axis("log10 trace score")},
        "series": [
            {
                "name": "trace scores",
                "x": list(range(table.n_traces)),
                "y": [float(v) for v in y],
                "trace_ids": list(table.trace_ids),
            }
        ],
        "annotations": annotations,
    }


def drift_pvalues_doc(series_list: Sequence[PValueSeries], threshold: float,
                      drift_points: dict[int, Sequence[DriftPoint]] | None = None) -> dict:
    """P-value lines (one per window size) with the detection threshold."""
    series = []
    for s in series_list:
        series.append(
            {
                "name": f"window {s.window_size}",
                "window": s.window_size,
                "x": [p.center_index for p in s.points],
                "y": [float(p.p_value) for p in s.points],
                "d": [float(p.d_stat) for p in s.points],
            }
        )
    annotations = [{"type": "hline", "y": threshold, "label": "threshold"}]
    for window, points in (drift_points or {}).items():
        for dp in points:
            annotations.append(
                {"type": "vline", "x": int(dp.trace_index), "label": f"drift (w={window})"}
            )
    return {
        "kind": "drift-pvalues",
        "axes": {"x": _axis("trace index"), "y": _axis("p-value", scale="log")},
        "series": series,
        "annotations": annotations,
    }


def attribute_density_doc(summary: DensitySummary) -> dict:
    """Per-attribute distribution of log10 partial scores with median and MAD."""
    series = []
    for attr, density in summary.per_attribute.items():
        series.append(
            {
                "name": attr,
                "y": [float(v) for v in density.log_scores],
                "median": density.median,
                "mad_raw": density.mad_raw,
                "mad_scaled": density.mad_scaled,
            }
        )
    return {
        "kind": "attribute-density",
        "segment_id": summary.segment_id,
        "axes": {"x": _axis("attribute"), "y": _axis("log10 partial score")},
        "series": series,
        "annotations": [],
    }


def median_overlay_doc(overlay: dict[str, dict[int, float]],
                       segment_labels: dict[int, str] | None = None) -> dict:
    """Median per attribute for every segment, on one shared axis."""
    attributes = list(overlay)
    segment_ids = sorted({sid for per_seg in overlay.values() for sid in per_seg})
    labels = segment_labels or {}
    series = []
    for sid in segment_ids:
        series.append(
            {
                "name": labels.get(sid, f"segment {sid}"),
                "segment_id": sid,
                "x": attributes,
                "y": [overlay[attr].get(sid) for attr in attributes],
            }
        )
    return {
        "kind": "median-overlay",
        "axes": {"x": _axis("attribute"), "y": _axis("median log10 partial score")},
        "series": series,
        "annotations": [],
    }


def component_breakdown_doc(breakdown: ComponentBreakdown) -> dict:
    """Value / CPT / per-FD log10 score series for a single attribute."""
    series = [
        {"name": "value", "y": [float(v) for v in breakdown.value]},
        {"name": "cpt", "y": [float(v) for v in breakdown.cpt]},
    ]
    for edge, values in breakdown.fd.items():
        series.append({"name": f"fd[{fd_edge_key(edge)}]", "y": [float(v) for v in values]})
    return {
        "kind": "component-breakdown",
        "attribute": breakdown.attribute,
        "axes": {"x": _axis("component"), "y": _axis("log10 component score")},
        "series": series,
        "annotations": [],
    }


def outlier_report_doc(reports: Sequence[OutlierReport], k: float) -> dict:
    items = []
    for r in reports:
        items.append(
            {
                "trace_id": r.trace_id,
                "trace_index": r.trace_index,
                "deviations": [
                    {
                        "attribute": d.attribute,
                        "log_partial": d.log_partial,
                        "segment_median": d.segment_median,
                        "deviation_mads": None if math.isinf(d.deviation_mads) else d.deviation_mads,
                    }
                    for d in r.deviations
                ],
            }
        )
    return {"kind": "outlier-report", "k": k, "items": items}


def write_doc(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


# --- static rendering -------------------------------------------------------

def _figure():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "driftscope"
    import matplotlib.pyplot as plt

    return plt


def render_svg(doc: dict, path) -> None:
    """Render a plot-data document to a deterministic SVG file."""
    plt = _figure()
    kind = doc["kind"]
    fig, ax = plt.subplots(figsize=(9, 4.5))
    try:
        if kind == "trace-scores":
            s = doc["series"][0]
            ax.plot(s["x"], s["y"], ".", markersize=2, alpha=0.5)
        elif kind == "drift-pvalues":
            for s in doc["series"]:
                ax.plot(s["x"], [max(v, 1e-320) for v in s["y"]], label=s["name"], linewidth=1)
            ax.set_yscale("log")
            ax.legend(loc="lower left", fontsize=8)
        elif kind in ("attribute-density", "component-breakdown"):
            names = [s["name"] for s in doc["series"]]
            for i, s in enumerate(doc["series"]):
                ys = s["y"]
                ax.plot([i] * len(ys), ys, ".", markersize=3, alpha=0.25)
                if "median" in s:
                    ax.plot([i - 0.3, i + 0.3], [s["median"]] * 2, "-", color="black")
                    band = s.get("mad_scaled", 0.0)
                    if band:
                        ax.fill_between([i - 0.3, i + 0.3], s["median"] - band,
                                        s["median"] + band, alpha=0.15, color="black")
            ax.set_xticks(range(len(names)), names, rotation=30, ha="right", fontsize=8)
        elif kind == "median-overlay":
            attributes = doc["series"][0]["x"] if doc["series"] else []
            for s in doc["series"]:
                ax.plot(range(len(s["x"])), s["y"], "o-", label=s["name"], markersize=4)
            ax.set_xticks(range(len(attributes)), attributes, rotation=30, ha="right", fontsize=8)
            ax.legend(fontsize=8)
        else:
            raise ValueError(f"no static rendering for plot kind {kind!r}")
        for ann in doc.get("annotations", []):
            if ann["type"] == "vline":
                ax.axvline(ann["x"], color="red", linewidth=1, linestyle="--")
            elif ann["type"] == "hline":
                ax.axhline(ann["y"], color="red", linewidth=1, linestyle="--")
        ax.set_xlabel(doc["axes"]["x"]["label"])
        ax.set_ylabel(doc["axes"]["y"]["label"])
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    finally:
        plt.close(fig)
