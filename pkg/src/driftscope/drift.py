"""Change-point detection over the trace-score series.

A window slides over the time-ordered trace scores; its first half is the
reference sample and its second half the test sample, compared with the
two-sample Kolmogorov-Smirnov test.  Dips in the resulting p-value series
mark distribution changes.  Scores do not depend on the window size, so
rescoring is never needed to try another window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class PValuePoint(NamedTuple):
    center_index: int
    d_stat: float
    p_value: float


@dataclass(frozen=True)
class PValueSeries:
    window_size: int
    step: int
    points: tuple[PValuePoint, ...]


@dataclass(frozen=True)
class DriftPoint:
    trace_index: int
    p_at_min: float
    window_size: int


@dataclass(frozen=True)
class Segment:
    id: int
    start_trace: int
    end_trace: int  # exclusive
    label: str | None = None

    def __len__(self) -> int:
        return self.end_trace - self.start_trace


def _kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution, alternating series.

    Below lam ~ 0.0345 the 100-term series has not converged while the true
    value is 1 to double precision, so 1 is returned outright; this keeps the
    p-value monotone in the statistic.
    """
    if lam < 0.035:
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, 101):
        term = 2.0 * sign * math.exp(-2.0 * k * k * lam * lam)
        if abs(term) < 1e-10:
            break
        total += term
        sign = -sign
    return min(max(total, 0.0), 1.0)


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sample KS statistic and asymptotic p-value.

    d is the exact supremum of the ECDF difference over the merged sample
    points; the p-value uses the asymptotic Kolmogorov distribution with the
    Stephens small-sample adjustment of the effective size.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("KS test needs two non-empty samples")
    merged = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, merged, side="right") / a.size
    cdf_b = np.searchsorted(b, merged, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    if d == 0.0:
        return 0.0, 1.0
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    lam = (en + 0.12 + 0.11 / en) * d
    return d, _kolmogorov_sf(lam)


def sliding_window_pvalues(scores: Sequence[float], window: int, step: int = 1) -> PValueSeries:
    """KS p-values for every window position over the score series.

    For window start i the reference sample is scores[i : i + window/2] and
    the test sample scores[i + window/2 : i + window]; the result is recorded
    at the window's center trace index.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.size
    if window % 2 != 0 or window <= 0:
        raise ValueError("window size must be a positive even number of traces")
    if step <= 0:
        raise ValueError("step must be positive")
    if n < window:
        raise ValueError(f"need at least {window} traces, got {n}")
    half = window // 2
    points = []
    for start in range(0, n - window + 1, step):
        d, p = ks_two_sample(scores[start:start + half], scores[start + half:start + window])
        points.append(PValuePoint(start + half, d, p))
    return PValueSeries(window_size=window, step=step, points=tuple(points))


def detect_drift_points(series: PValueSeries, threshold: float = 0.01,
                        min_separation: int | None = None) -> list[DriftPoint]:
    """Collapse sub-threshold runs of the p-value series into drift points.

    Each maximal run of consecutive sub-threshold points yields one point at
    its p-value argmin (earliest index on ties); points closer than
    ``min_separation`` traces are then merged keeping the smaller p.
    """
    if not series.points:
        raise ValueError("empty p-value series")
    if not (0 < threshold < 1):
        raise ValueError("threshold must be in (0, 1)")
    if min_separation is None:
        min_separation = series.window_size

    candidates: list[DriftPoint] = []
    run: list[PValuePoint] = []

    def close_run():
        if not run:
            return
        best = min(run, key=lambda pt: (pt.p_value, pt.center_index))
        candidates.append(DriftPoint(best.center_index, best.p_value, series.window_size))
        run.clear()

    for pt in series.points:
        if pt.p_value < threshold:
            run.append(pt)
        else:
            close_run()
    close_run()

    merged: list[DriftPoint] = []
    for point in candidates:
        if merged and point.trace_index - merged[-1].trace_index < min_separation:
            keep = min(merged[-1], point, key=lambda dp: (dp.p_at_min, dp.trace_index))
            merged[-1] = keep
        else:
            merged.append(point)
    return merged


def segment_log(n_traces: int, drifts: Sequence[DriftPoint | int]) -> list[Segment]:
    """Partition [0, n_traces) at the drift indices; empty segments are dropped."""
    indices = sorted({d.trace_index if isinstance(d, DriftPoint) else int(d) for d in drifts})
    for idx in indices:
        if not (0 <= idx < n_traces):
            raise ValueError(f"drift index {idx} outside [0, {n_traces})")
    bounds = [0] + indices + [n_traces]
    segments = []
    for start, end in zip(bounds, bounds[1:]):
        if end > start:
            segments.append(Segment(id=len(segments), start_trace=start, end_trace=end))
    return segments
