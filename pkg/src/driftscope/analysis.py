"""Root-cause analytics over log segments.

All comparisons run against a single reference-trained model: each segment's
traces are scored with it, per-trace per-attribute partial scores are
averaged (the trace-mean rule applied at attribute granularity), moved to
log10 with a floor so zeros stay plottable, and summarized robustly with the
median and the median absolute deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drift import Segment
from .eventlog import EventLog
from .parameters import EDBNModel
from .scoring import LOG_FLOOR, LogScores, score_log_table
from .structure import FDEdge

#: MAD-to-sigma consistency factor for normal data
MAD_SCALE = 1.4826
DEFAULT_MAD_CUTOFF = 2.5


@dataclass
class AttributeDensity:
    log_scores: np.ndarray  # one log10 mean partial per trace
    median: float
    mad_raw: float
    mad_scaled: float


@dataclass
class DensitySummary:
    segment_id: int
    trace_ids: list[str]
    per_attribute: dict[str, AttributeDensity]


@dataclass
class ComponentBreakdown:
    attribute: str
    trace_ids: list[str]
    value: np.ndarray
    cpt: np.ndarray
    fd: dict[FDEdge, np.ndarray]


@dataclass
class Deviation:
    attribute: str
    log_partial: float
    segment_median: float
    deviation_mads: float  # inf when the segment MAD is zero


@dataclass
class OutlierReport:
    trace_id: str
    trace_index: int
    deviations: list[Deviation]


def _trace_component_means(arr: np.ndarray, offsets: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Per-trace arithmetic mean of an event-level component array."""
    values = arr.tolist()
    out = np.empty(hi - lo)
    for i in range(lo, hi):
        start, end = int(offsets[i]), int(offsets[i + 1])
        acc = 0.0
        for r in range(start, end):
            acc += values[r]
        out[i - lo] = acc / (end - start)
    return out


def _log10_floor(x: np.ndarray) -> np.ndarray:
    return np.log10(np.maximum(x, LOG_FLOOR))


def _segment_range(segment: Segment | tuple[int, int] | None, n_traces: int) -> tuple[int, int]:
    if segment is None:
        return 0, n_traces
    if isinstance(segment, Segment):
        lo, hi = segment.start_trace, segment.end_trace
    else:
        lo, hi = segment
    if not (0 <= lo < hi <= n_traces):
        raise ValueError(f"segment [{lo}, {hi}) out of range for {n_traces} traces")
    return lo, hi


def _segment_id(segment) -> int:
    return segment.id if isinstance(segment, Segment) else 0


def attribute_density(model: EDBNModel, log: EventLog,
                      segment: Segment | tuple[int, int] | None = None,
                      table: LogScores | None = None) -> DensitySummary:
    """Median/MAD summary of per-trace log10 attribute partials in a segment."""
    table = table or score_log_table(model, log)
    lo, hi = _segment_range(segment, table.n_traces)
    if hi - lo == 0:
        raise ValueError("empty segment")
    per_attribute: dict[str, AttributeDensity] = {}
    for attr in table.attrs:
        means = _trace_component_means(table.partial[attr], table.offsets, lo, hi)
        logs = _log10_floor(means)
        median = float(np.median(logs))
        mad_raw = float(np.median(np.abs(logs - median)))
        per_attribute[attr] = AttributeDensity(
            log_scores=logs, median=median, mad_raw=mad_raw, mad_scaled=MAD_SCALE * mad_raw
        )
    return DensitySummary(
        segment_id=_segment_id(segment),
        trace_ids=table.trace_ids[lo:hi],
        per_attribute=per_attribute,
    )


def compare_segments(model: EDBNModel, log: EventLog, segments: list[Segment],
                     table: LogScores | None = None
                     ) -> tuple[list[DensitySummary], dict[str, dict[int, float]]]:
    """Density summaries for several segments against one reference model.

    The log is scored once; each summary is a slice of that scoring.  The
    overlay maps attribute -> segment id -> median for side-by-side reading.
    """
    if not segments:
        raise ValueError("need at least one segment")
    table = table or score_log_table(model, log)
    summaries = [attribute_density(model, log, seg, table=table) for seg in segments]
    overlay: dict[str, dict[int, float]] = {}
    for summary in summaries:
        for attr, density in summary.per_attribute.items():
            overlay.setdefault(attr, {})[summary.segment_id] = density.median
    return summaries, overlay


def decompose_attribute(model: EDBNModel, log: EventLog, attribute: str,
                        segment: Segment | tuple[int, int] | None = None,
                        table: LogScores | None = None) -> ComponentBreakdown:
    """Per-trace log10 series of one attribute's value, CPT and FD factors."""
    table = table or score_log_table(model, log)
    if attribute not in table.attrs:
        raise KeyError(f"unknown attribute {attribute!r}")
    lo, hi = _segment_range(segment, table.n_traces)
    if hi - lo == 0:
        raise ValueError("empty segment")

    value = _log10_floor(_trace_component_means(table.value[attribute], table.offsets, lo, hi))
    cpt_arr = table.cpt[attribute]
    if cpt_arr is None:
        cpt = np.zeros(hi - lo)  # no conditional parents: factor is 1, log10 0
    else:
        cpt = _log10_floor(_trace_component_means(cpt_arr, table.offsets, lo, hi))
    fd = {
        edge: _log10_floor(_trace_component_means(table.fd[edge], table.offsets, lo, hi))
        for edge in table.fd_edges
        if edge.target == attribute
    }
    return ComponentBreakdown(
        attribute=attribute,
        trace_ids=table.trace_ids[lo:hi],
        value=value,
        cpt=cpt,
        fd=fd,
    )


def flag_outliers(summary: DensitySummary, k: float = DEFAULT_MAD_CUTOFF) -> list[OutlierReport]:
    """Traces whose log partial sits more than k scaled MADs from the median.

    When an attribute's MAD is zero the threshold degenerates to "any trace
    off the median"; deviations are then reported as infinitely many MADs.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    by_trace: dict[int, list[Deviation]] = {}
    for attr, density in summary.per_attribute.items():
        med = density.median
        cutoff = k * density.mad_scaled if density.mad_scaled > 0 else 0.0
        gaps = np.abs(density.log_scores - med)
        for idx in np.flatnonzero(gaps > cutoff):
            i = int(idx)
            mads = gaps[i] / density.mad_scaled if density.mad_scaled > 0 else math.inf
            by_trace.setdefault(i, []).append(
                Deviation(
                    attribute=attr,
                    log_partial=float(density.log_scores[i]),
                    segment_median=med,
                    deviation_mads=float(mads),
                )
            )
    return [
        OutlierReport(trace_id=summary.trace_ids[i], trace_index=i, deviations=devs)
        for i, devs in sorted(by_trace.items())
    ]
