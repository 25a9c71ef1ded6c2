import type { DriftMarker } from "../state.js";
import type { PlotDoc } from "../types.js";
import { el, extent, linearScale, plotFrame, svg } from "../render/svg.js";

/** Values at or below the export floor mean the trace scored exactly zero. */
const FLOOR_LOG10 = -300;

export interface TraceScoresHandlers {
  onBrush(range: [number, number]): void;
}

/** Scatter of log10 trace scores over trace index with the training boundary
 * and the current drift markers; dragging across the plot brushes a trace
 * range and hands it to the workspace as a candidate segment. */
export function renderTraceScores(
  container: HTMLElement,
  doc: PlotDoc | null,
  markers: DriftMarker[],
  handlers: TraceScoresHandlers,
): void {
  container.replaceChildren();
  container.appendChild(el("h2", {}, "Trace scores"));
  if (!doc || doc.series.length === 0 || (doc.series[0]?.y.length ?? 0) === 0) {
    container.appendChild(el("p", { class: "empty-state" }, "No scores yet — train a model."));
    return;
  }
  const series = doc.series[0]!;
  const xs = (series.x ?? []) as number[];
  const ys = series.y as number[];
  const traceIds = series.trace_ids ?? [];

  const frame = plotFrame(doc.axes.x.label, doc.axes.y.label);
  const sx = linearScale(extent(xs), [0, frame.innerWidth]);
  const drawable = ys.filter((v) => v > FLOOR_LOG10);
  const sy = linearScale(extent(drawable.length ? drawable : ys), [frame.innerHeight, 0]);

  for (let i = 0; i < xs.length; i++) {
    const y = ys[i]!;
    const atFloor = y <= FLOOR_LOG10;
    const dot = svg("circle", {
      cx: String(sx(xs[i]!)),
      cy: String(atFloor ? frame.innerHeight : sy(y)),
      r: "1.6",
      class: atFloor ? "dot floor" : "dot",
      "data-trace-id": traceIds[i] ?? String(xs[i]),
    });
    const tip = svg("title");
    tip.textContent = atFloor
      ? `${traceIds[i] ?? xs[i]}: score 0 (drawn at floor)`
      : `${traceIds[i] ?? xs[i]}: ${y}`;
    dot.appendChild(tip);
    frame.inner.appendChild(dot);
  }

  for (const annotation of doc.annotations) {
    if (annotation.type !== "vline" || annotation.x === undefined) continue;
    frame.inner.appendChild(
      svg("line", {
        x1: String(sx(annotation.x)),
        x2: String(sx(annotation.x)),
        y1: "0",
        y2: String(frame.innerHeight),
        class: annotation.label === "training boundary" ? "marker training" : "marker",
        "data-label": annotation.label ?? "",
      }),
    );
  }
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

  // brush selection: drag horizontally to pick a half-open trace range
  const overlay = svg("rect", {
    x: "0",
    y: "0",
    width: String(frame.innerWidth),
    height: String(frame.innerHeight),
    class: "brush-overlay",
    fill: "transparent",
  });
  const band = svg("rect", { y: "0", height: String(frame.innerHeight), class: "brush-band" });
  band.setAttribute("display", "none");
  frame.inner.appendChild(band);
  frame.inner.appendChild(overlay);

  let anchor: number | null = null;
  const toTrace = (event: MouseEvent): number => {
    const bounds = (frame.root as SVGGraphicsElement).getBoundingClientRect();
    const width = bounds.width || 1;
    const pixel = ((event.clientX - bounds.left) / width) * 860 - 55;
    return Math.round(sx.invert(Math.max(0, Math.min(pixel, frame.innerWidth))));
  };
  overlay.addEventListener("mousedown", (event) => {
    anchor = toTrace(event as MouseEvent);
  });
  overlay.addEventListener("mousemove", (event) => {
    if (anchor === null) return;
    const current = toTrace(event as MouseEvent);
    const [lo, hi] = [Math.min(anchor, current), Math.max(anchor, current)];
    band.setAttribute("display", "inline");
    band.setAttribute("x", String(sx(lo)));
    band.setAttribute("width", String(Math.max(1, sx(hi) - sx(lo))));
  });
  overlay.addEventListener("mouseup", (event) => {
    if (anchor === null) return;
    const current = toTrace(event as MouseEvent);
    const lo = Math.min(anchor, current);
    const hi = Math.max(anchor, current) + 1;
    anchor = null;
    band.setAttribute("display", "none");
    if (hi - lo >= 2) handlers.onBrush([lo, hi]);
  });

  container.appendChild(frame.root);
}
