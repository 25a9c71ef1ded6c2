import type { ApiClient } from "./api.js";
import type {
  DriftResponse,
  ModelInfo,
  OutlierDoc,
  PlotDoc,
  SegmentInfo,
} from "./types.js";

/** A drift marker derived on the client by thresholding the fetched p-value
 * series (a pure comparison of displayed numbers; no refetch, no retrain). */
export interface DriftMarker {
  trace_index: number;
  p_at_min: number;
}

export interface WorkspaceState {
  logId: string | null;
  modelId: string | null;
  referenceModelId: string | null;
  window: number;
  threshold: number;
  segments: SegmentInfo[];
  referenceSegmentId: number | null;
  selectedAttribute: string | null;
  scoresDoc: PlotDoc | null;
  driftDoc: DriftResponse | null;
  densityDocs: Map<number, PlotDoc>;
  breakdownDoc: PlotDoc | null;
  outlierDoc: OutlierDoc | null;
  modelInfo: ModelInfo | null;
  pendingJob: string | null;
  error: string | null;
}

type Listener = (state: WorkspaceState) => void;

export function initialState(): WorkspaceState {
  return {
    logId: null,
    modelId: null,
    referenceModelId: null,
    window: 400,
    threshold: 0.01,
    segments: [],
    referenceSegmentId: null,
    selectedAttribute: null,
    scoresDoc: null,
    driftDoc: null,
    densityDocs: new Map(),
    breakdownDoc: null,
    outlierDoc: null,
    modelInfo: null,
    pendingJob: null,
    error: null,
  };
}

/** Runs of sub-threshold points collapse to their argmin; nearby points merge
 * keeping the smaller p (ties to the earlier index) — mirroring the server's
 * extraction rule so marker positions match what a drift fetch would report. */
export function deriveDriftMarkers(
  drift: DriftResponse | null,
  threshold: number,
  minSeparation?: number,
): DriftMarker[] {
  if (!drift || drift.plot.series.length === 0) return [];
  const series = drift.plot.series[0]!;
  const xs = (series.x ?? []) as number[];
  const ps = series.y as number[];
  const separation = minSeparation ?? series.window ?? 0;

  const candidates: DriftMarker[] = [];
  let run: DriftMarker | null = null;
  for (let i = 0; i < ps.length; i++) {
    const p = ps[i]!;
    const x = xs[i]!;
    if (p < threshold) {
      if (run === null || p < run.p_at_min) {
        run = run === null ? { trace_index: x, p_at_min: p } : { trace_index: x, p_at_min: p };
      }
    } else if (run !== null) {
      candidates.push(run);
      run = null;
    }
  }
  if (run !== null) candidates.push(run);

  const merged: DriftMarker[] = [];
  for (const point of candidates) {
    const last = merged[merged.length - 1];
    if (last && point.trace_index - last.trace_index < separation) {
      if (
        point.p_at_min < last.p_at_min ||
        (point.p_at_min === last.p_at_min && point.trace_index < last.trace_index)
      ) {
        merged[merged.length - 1] = point;
      }
    } else {
      merged.push(point);
    }
  }
  return merged;
}

export class WorkspaceStore {
  private state = initialState();
  private listeners: Listener[] = [];
  /** per-resource sequence numbers; stale responses are discarded */
  private sequence = new Map<string, number>();

  constructor(private client: ApiClient) {}

  get(): WorkspaceState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<WorkspaceState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  private nextSeq(key: string): number {
    const seq = (this.sequence.get(key) ?? 0) + 1;
    this.sequence.set(key, seq);
    return seq;
  }

  private isCurrent(key: string, seq: number): boolean {
    return this.sequence.get(key) === seq;
  }

  driftMarkers(): DriftMarker[] {
    return deriveDriftMarkers(this.state.driftDoc, this.state.threshold);
  }

  async attachModel(modelId: string): Promise<void> {
    const info = await this.client.model(modelId);
    const scores = await this.client.scores(modelId);
    this.update({
      modelId,
      logId: info.log_id,
      modelInfo: info,
      scoresDoc: scores,
      segments: info.segments,
      densityDocs: new Map(),
      breakdownDoc: null,
      outlierDoc: null,
    });
    await this.setWindow(this.state.window);
  }

  /** Slider moves fetch a fresh p-value series for the cached scores — the
   * one thing they must never do is start a training job. */
  async setWindow(window: number): Promise<void> {
    const modelId = this.state.modelId;
    if (!modelId) return;
    this.update({ window });
    const seq = this.nextSeq("drift");
    try {
      const drift = await this.client.drift(modelId, window);
      if (this.isCurrent("drift", seq) && this.state.window === window) {
        this.update({ driftDoc: drift });
      }
    } catch (error) {
      if (this.isCurrent("drift", seq)) this.update({ error: String(error) });
    }
  }

  /** Threshold is a pure display parameter: markers re-derive locally. */
  setThreshold(threshold: number): void {
    this.update({ threshold });
  }

  /** Brush selection emits a half-open trace range as a candidate segment. */
  addSegment(range: [number, number]): SegmentInfo {
    const segment: SegmentInfo = {
      id: this.state.segments.length
        ? Math.max(...this.state.segments.map((s) => s.id)) + 1
        : 0,
      start_trace: range[0],
      end_trace: range[1],
      label: null,
    };
    this.update({ segments: [...this.state.segments, segment] });
    return segment;
  }

  adoptSegments(segments: SegmentInfo[]): void {
    const reference = this.state.referenceSegmentId;
    this.update({
      segments,
      referenceSegmentId:
        reference !== null && segments.some((s) => s.id === reference) ? reference : null,
    });
  }

  /** The reference segment must be one of the selected segments. */
  setReferenceSegment(segmentId: number): void {
    if (!this.state.segments.some((s) => s.id === segmentId)) {
      throw new Error(`segment ${segmentId} is not selected`);
    }
    this.update({ referenceSegmentId: segmentId });
  }

  /** Retrain on the reference segment (the deliberate, explicit retrain path)
   * and re-key all cached documents to the new model. */
  async retrainOnReference(pollInterval = 25): Promise<string> {
    const { logId, referenceSegmentId, segments } = this.state;
    if (!logId || referenceSegmentId === null) {
      throw new Error("select a reference segment first");
    }
    const reference = segments.find((s) => s.id === referenceSegmentId)!;
    const started = await this.client.trainOnSegment(logId, [
      reference.start_trace,
      reference.end_trace,
    ]);
    this.update({ pendingJob: started.job_id });
    for (;;) {
      const job = await this.client.job(started.job_id);
      if (job.status === "done") break;
      if (job.status === "error") throw new Error(job.error ?? "training failed");
      await new Promise((resolve) => setTimeout(resolve, pollInterval));
    }
    const ranges = segments.map((s) => [s.start_trace, s.end_trace] as [number, number]);
    const confirmed = await this.client.setSegments(started.model_id, ranges);
    const info = await this.client.model(started.model_id);
    this.update({
      referenceModelId: started.model_id,
      pendingJob: null,
      modelInfo: info,
      densityDocs: new Map(),
      breakdownDoc: null,
      outlierDoc: null,
    });
    this.adoptSegments(confirmed.segments);
    // the brushed reference keeps its position in the confirmed list
    const referenceIndex = ranges.findIndex(
      (r) => r[0] === reference.start_trace && r[1] === reference.end_trace,
    );
    this.update({ referenceSegmentId: confirmed.segments[referenceIndex]!.id });
    return started.model_id;
  }

  async loadDensity(segmentId: number): Promise<void> {
    const modelId = this.state.referenceModelId ?? this.state.modelId;
    if (!modelId) return;
    const seq = this.nextSeq(`density-${segmentId}`);
    const doc = await this.client.density(modelId, segmentId);
    if (!this.isCurrent(`density-${segmentId}`, seq)) return;
    const densityDocs = new Map(this.state.densityDocs);
    densityDocs.set(segmentId, doc);
    this.update({ densityDocs });
  }

  async loadDensities(): Promise<void> {
    for (const segment of this.state.segments) {
      await this.loadDensity(segment.id);
    }
  }

  async selectAttribute(attribute: string, segmentId: number): Promise<void> {
    const modelId = this.state.referenceModelId ?? this.state.modelId;
    if (!modelId) return;
    this.update({ selectedAttribute: attribute });
    const seq = this.nextSeq("breakdown");
    const doc = await this.client.decompose(modelId, segmentId, attribute);
    if (this.isCurrent("breakdown", seq)) this.update({ breakdownDoc: doc });
  }

  async loadOutliers(k: number, segmentId?: number): Promise<void> {
    const modelId = this.state.referenceModelId ?? this.state.modelId;
    if (!modelId) return;
    const seq = this.nextSeq("outliers");
    const doc = await this.client.outliers(modelId, k, segmentId);
    if (this.isCurrent("outliers", seq)) this.update({ outlierDoc: doc });
  }
}
