import type {
  DriftResponse,
  JobInfo,
  LogInfo,
  ModelInfo,
  OutlierDoc,
  PlotDoc,
  SegmentInfo,
  TrainStarted,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Thin typed client over the HTTP API; the fetch function is injectable so
 * tests can serve recorded responses and inspect the request log. */
export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "content-type": "application/json" };
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      const text = await response.text();
      throw new ApiError(response.status, `${method} ${path}: ${response.status} ${text}`);
    }
    return (await response.json()) as T;
  }

  uploadLog(file: File | Blob, traceId: string, timestamp?: string): Promise<LogInfo> {
    const form = new FormData();
    form.append("file", file, "log.csv");
    form.append("trace_id", traceId);
    if (timestamp) form.append("timestamp", timestamp);
    return this.fetchFn(this.baseUrl + "/logs", { method: "POST", body: form }).then(
      async (response) => {
        if (!response.ok) throw new ApiError(response.status, await response.text());
        return (await response.json()) as LogInfo;
      },
    );
  }

  trainOnEvents(logId: string, trainEvents: number): Promise<TrainStarted> {
    return this.request("POST", `/logs/${logId}/models`, { train_events: trainEvents });
  }

  trainOnSegment(logId: string, range: [number, number]): Promise<TrainStarted> {
    return this.request("POST", `/logs/${logId}/models`, { segment: range });
  }

  job(jobId: string): Promise<JobInfo> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  model(modelId: string): Promise<ModelInfo> {
    return this.request("GET", `/models/${modelId}`);
  }

  scores(modelId: string): Promise<PlotDoc> {
    return this.request("GET", `/models/${modelId}/scores`);
  }

  drift(modelId: string, window: number): Promise<DriftResponse> {
    return this.request("GET", `/models/${modelId}/drift?window=${window}`);
  }

  setSegments(modelId: string, ranges: [number, number][]): Promise<{ segments: SegmentInfo[] }> {
    return this.request("POST", `/models/${modelId}/segments`, { ranges });
  }

  density(modelId: string, segmentId: number): Promise<PlotDoc> {
    return this.request("GET", `/models/${modelId}/segments/${segmentId}/density`);
  }

  decompose(modelId: string, segmentId: number, attribute: string): Promise<PlotDoc> {
    return this.request(
      "GET",
      `/models/${modelId}/segments/${segmentId}/decompose?attribute=${encodeURIComponent(attribute)}`,
    );
  }

  outliers(modelId: string, k: number, segmentId?: number): Promise<OutlierDoc> {
    const segment = segmentId === undefined ? "" : `&segment=${segmentId}`;
    return this.request("GET", `/models/${modelId}/outliers?k=${k}${segment}`);
  }
}
