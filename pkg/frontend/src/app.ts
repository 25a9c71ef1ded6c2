import { ApiClient } from "./api.js";
import { WorkspaceStore } from "./state.js";
import { el } from "./render/svg.js";
import { renderTraceScores } from "./views/traceScores.js";
import { renderDriftView } from "./views/driftView.js";
import { renderDensityCompare } from "./views/densityCompare.js";
import { renderBreakdown } from "./views/breakdown.js";
import type { SegmentInfo } from "./types.js";

/** Wires the workspace store to the view panels inside the given root. */
export class App {
  readonly store: WorkspaceStore;
  private panels: Record<string, HTMLElement>;

  constructor(root: HTMLElement, readonly client: ApiClient) {
    this.store = new WorkspaceStore(client);
    root.replaceChildren();
    const header = el("div", { class: "workbench-header" });
    header.appendChild(el("h1", {}, "driftscope explorer"));
    this.panels = {
      setup: el("section", { id: "setup-panel" }),
      scores: el("section", { id: "scores-panel" }),
      drift: el("section", { id: "drift-panel" }),
      segments: el("section", { id: "segments-panel" }),
      density: el("section", { id: "density-panel" }),
      breakdown: el("section", { id: "breakdown-panel" }),
    };
    root.appendChild(header);
    for (const panel of Object.values(this.panels)) root.appendChild(panel);
    this.renderSetup();
    this.store.subscribe(() => this.render());
    this.render();
  }

  private renderSetup(): void {
    const panel = this.panels.setup!;
    panel.replaceChildren();
    const form = el("div", { class: "controls" });
    const file = el("input", { type: "file", "data-role": "log-file" });
    const traceId = el("input", {
      type: "text",
      value: "case",
      "data-role": "trace-id-column",
    });
    const trainEvents = el("input", {
      type: "number",
      value: "30000",
      "data-role": "train-events",
    });
    const go = el("button", {}, "Upload & train");
    go.addEventListener("click", async () => {
      const chosen = (file as HTMLInputElement).files?.[0];
      if (!chosen) return;
      const log = await this.client.uploadLog(chosen, (traceId as HTMLInputElement).value);
      const started = await this.client.trainOnEvents(
        log.log_id,
        Number((trainEvents as HTMLInputElement).value),
      );
      for (;;) {
        const job = await this.client.job(started.job_id);
        if (job.status === "done") break;
        if (job.status === "error") throw new Error(job.error ?? "training failed");
        await new Promise((resolve) => setTimeout(resolve, 250));
      }
      await this.store.attachModel(started.model_id);
    });
    form.append(
      el("label", {}, "log CSV"), file,
      el("label", {}, "trace-id column"), traceId,
      el("label", {}, "training events"), trainEvents,
      go,
    );
    panel.appendChild(form);
  }

  private renderSegmentChips(): void {
    const panel = this.panels.segments!;
    const state = this.store.get();
    panel.replaceChildren();
    panel.appendChild(el("h2", {}, "Segments"));
    if (state.segments.length === 0) {
      panel.appendChild(
        el("p", { class: "empty-state" }, "Brush the trace-score plot to select a segment."),
      );
      return;
    }
    const chips = el("div", { class: "segment-chips" });
    for (const segment of state.segments) {
      const chip = el("span", {
        class:
          segment.id === state.referenceSegmentId ? "segment-chip reference" : "segment-chip",
        "data-segment-id": String(segment.id),
      });
      chip.appendChild(
        el("span", {}, `#${segment.id} [${segment.start_trace}, ${segment.end_trace})`),
      );
      const refButton = el("button", { "data-role": "set-reference" }, "set as reference");
      refButton.addEventListener("click", () => {
        this.store.setReferenceSegment(segment.id);
      });
      chip.appendChild(refButton);
      chips.appendChild(chip);
    }
    panel.appendChild(chips);

    const retrain = el("button", { "data-role": "retrain-reference" },
      "Train on reference & compare");
    retrain.addEventListener("click", async () => {
      await this.store.retrainOnReference();
      await this.store.loadDensities();
      await this.store.loadOutliers(2.5);
    });
    panel.appendChild(retrain);
  }

  private render(): void {
    const state = this.store.get();
    const markers = this.store.driftMarkers();
    renderTraceScores(this.panels.scores!, state.scoresDoc, markers, {
      onBrush: (range) => {
        this.store.addSegment(range);
      },
    });
    renderDriftView(this.panels.drift!, state.driftDoc, state.window, state.threshold, markers, {
      onWindowChange: (window_) => void this.store.setWindow(window_),
      onThresholdChange: (threshold) => this.store.setThreshold(threshold),
    });
    this.renderSegmentChips();
    renderDensityCompare(
      this.panels.density!,
      state.segments,
      state.densityDocs,
      state.referenceSegmentId,
      state.outlierDoc,
      {
        onAttributeClick: (attribute, segmentId) =>
          void this.store.selectAttribute(attribute, segmentId),
      },
    );
    renderBreakdown(this.panels.breakdown!, state.breakdownDoc);
  }
}

export function mount(rootId = "app", baseUrl = ""): App {
  const root = document.getElementById(rootId);
  if (!root) throw new Error(`no element #${rootId}`);
  return new App(root, new ApiClient(baseUrl));
}
