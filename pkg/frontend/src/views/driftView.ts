import type { DriftMarker } from "../state.js";
import type { DriftResponse } from "../types.js";
import { el, extent, linearScale, plotFrame, polylinePoints, svg } from "../render/svg.js";

export const WINDOW_CHOICES = [200, 400, 800, 1600];

export interface DriftViewHandlers {
  onWindowChange(window: number): void;
  onThresholdChange(threshold: number): void;
}

/** P-value line on a log display scale with the detection threshold and the
 * client-derived drift markers.  The window slider refetches the series for
 * the cached scores; the threshold input re-derives markers locally. */
export function renderDriftView(
  container: HTMLElement,
  drift: DriftResponse | null,
  window_: number,
  threshold: number,
  markers: DriftMarker[],
  handlers: DriftViewHandlers,
): void {
  container.replaceChildren();
  container.appendChild(el("h2", {}, "Drift plot"));

  const controls = el("div", { class: "controls" });
  const sliderLabel = el("label", {}, `window ${window_}`);
  const slider = el("input", {
    type: "range",
    min: "0",
    max: String(WINDOW_CHOICES.length - 1),
    step: "1",
    value: String(Math.max(0, WINDOW_CHOICES.indexOf(window_))),
    "data-role": "window-slider",
  });
  slider.addEventListener("change", () => {
    const chosen = WINDOW_CHOICES[Number(slider.value)]!;
    handlers.onWindowChange(chosen);
  });
  const thresholdInput = el("input", {
    type: "number",
    value: String(threshold),
    step: "0.001",
    min: "0",
    max: "1",
    "data-role": "threshold-input",
  });
  thresholdInput.addEventListener("change", () => {
    handlers.onThresholdChange(Number(thresholdInput.value));
  });
  controls.append(sliderLabel, slider, el("label", {}, "threshold"), thresholdInput);
  container.appendChild(controls);

  if (!drift || drift.plot.series.length === 0) {
    container.appendChild(el("p", { class: "empty-state" }, "No drift series fetched yet."));
    return;
  }

  const series = drift.plot.series[0]!;
  const xs = (series.x ?? []) as number[];
  // log display scale; the document carries raw p-values
  const logP = (series.y as number[]).map((p) => Math.log10(Math.max(p, 1e-320)));

  const frame = plotFrame(drift.plot.axes.x.label, "log10 p-value");
  const sx = linearScale(extent(xs), [0, frame.innerWidth]);
  const sy = linearScale(extent([...logP, 0]), [frame.innerHeight, 0]);

  frame.inner.appendChild(
    svg("polyline", {
      points: polylinePoints(xs.map(sx), logP.map(sy)),
      class: "pline",
      fill: "none",
      "data-window": String(series.window ?? window_),
    }),
  );
  const thresholdY = sy(Math.log10(Math.max(threshold, 1e-320)));
  frame.inner.appendChild(
    svg("line", {
      x1: "0",
      x2: String(frame.innerWidth),
      y1: String(thresholdY),
      y2: String(thresholdY),
      class: "marker threshold",
      "data-label": "threshold",
    }),
  );
  for (const marker of markers) {
    frame.inner.appendChild(
      svg("line", {
        x1: String(sx(marker.trace_index)),
        x2: String(sx(marker.trace_index)),
        y1: "0",
        y2: String(frame.innerHeight),
        class: "marker drift",
        "data-label": "drift",
        "data-trace-index": String(marker.trace_index),
      }),
    );
  }
  container.appendChild(frame.root);
}

export { deriveDriftMarkers } from "../state.js";
