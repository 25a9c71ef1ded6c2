/** Shapes of the plot-data documents and API responses.
 *
 * The client renders these verbatim: every number shown on screen comes out
 * of one of these documents (or is a pure display comparison against them,
 * like the drift threshold line).
 */

export interface Axis {
  label: string;
  scale: string;
}

export interface Series {
  name: string;
  x?: (number | string)[];
  y: (number | null)[];
  trace_ids?: string[];
  window?: number;
  d?: number[];
  median?: number;
  mad_raw?: number;
  mad_scaled?: number;
  segment_id?: number;
}

export interface Annotation {
  type: "vline" | "hline";
  x?: number;
  y?: number;
  label?: string;
}

export interface PlotDoc {
  kind: string;
  axes: { x: Axis; y: Axis };
  series: Series[];
  annotations: Annotation[];
  segment_id?: number;
  attribute?: string;
}

export interface DriftPointInfo {
  trace_index: number;
  p_at_min: number;
  window_size: number;
}

export interface DriftResponse {
  plot: PlotDoc;
  drift_points: DriftPointInfo[];
}

export interface SegmentInfo {
  id: number;
  start_trace: number;
  end_trace: number;
  label: string | null;
}

export interface LogInfo {
  log_id: string;
  n_traces: number;
  n_events: number;
}

export interface TrainStarted {
  job_id: string;
  model_id: string;
}

export interface JobInfo {
  job_id: string;
  status: "queued" | "running" | "done" | "error";
  model_id: string;
  error: string | null;
}

export interface ModelInfo {
  model_id: string;
  log_id: string;
  train_range: [number, number];
  n_traces: number;
  scoring_runs: number;
  attributes: string[];
  segments: SegmentInfo[];
}

export interface OutlierDeviation {
  attribute: string;
  log_partial: number;
  segment_median: number;
  deviation_mads: number | null;
}

export interface OutlierItem {
  trace_id: string;
  trace_index: number;
  deviations: OutlierDeviation[];
}

export interface OutlierDoc {
  kind: "outlier-report";
  k: number;
  items: OutlierItem[];
}

/** Numbers coming from a document are rendered through this single formatter
 * so tests can assert screen text equals document values. */
export function formatDocNumber(value: number | null): string {
  if (value === null) return "–";
  return String(value);
}
