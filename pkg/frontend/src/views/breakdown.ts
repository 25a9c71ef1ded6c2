import type { PlotDoc } from "../types.js";
import { el, extent, linearScale, plotFrame, svg } from "../render/svg.js";

/** Component strips (value, CPT, one per FD) for the selected attribute. */
export function renderBreakdown(container: HTMLElement, doc: PlotDoc | null): void {
  container.replaceChildren();
  if (!doc) return;
  container.appendChild(el("h2", {}, `Components of ${doc.attribute ?? "?"}`));

  const frame = plotFrame("component", doc.axes.y.label);
  const all = doc.series.flatMap((s) => (s.y as number[]).filter((v) => isFinite(v)));
  const sy = linearScale(extent(all.length ? all : [-1, 0]), [frame.innerHeight, 0]);
  const step = frame.innerWidth / Math.max(doc.series.length, 1);

  doc.series.forEach((series, index) => {
    const cx = step * index + step / 2;
    const group = svg("g", { class: "component", "data-component": series.name });
    for (const value of series.y as number[]) {
      group.appendChild(
        svg("circle", { cx: String(cx), cy: String(sy(value)), r: "1.4", class: "dot" }),
      );
    }
    frame.inner.appendChild(group);
    const tick = svg("text", {
      x: String(cx),
      y: String(frame.innerHeight + 14),
      class: "tick",
      "text-anchor": "middle",
    });
    tick.textContent = series.name;
    frame.inner.appendChild(tick);
  });
  container.appendChild(frame.root);
}
