import type { OutlierDoc, PlotDoc, SegmentInfo, Series } from "../types.js";
import { formatDocNumber } from "../types.js";
import { el, extent, linearScale, plotFrame, svg } from "../render/svg.js";

export interface DensityCompareHandlers {
  onAttributeClick(attribute: string, segmentId: number): void;
}

function seriesByName(doc: PlotDoc): Map<string, Series> {
  return new Map(doc.series.map((s) => [s.name, s]));
}

/** Attributes ordered by their largest median distance from the reference
 * segment (pure arithmetic on displayed document medians). */
export function attributesByDelta(
  densityDocs: Map<number, PlotDoc>,
  referenceSegmentId: number,
): string[] {
  const reference = densityDocs.get(referenceSegmentId);
  if (!reference) return [];
  const referenceMedians = new Map(
    reference.series.map((s) => [s.name, s.median ?? 0]),
  );
  const deltas = new Map<string, number>();
  for (const [segmentId, doc] of densityDocs) {
    if (segmentId === referenceSegmentId) continue;
    for (const series of doc.series) {
      const base = referenceMedians.get(series.name);
      if (base === undefined || series.median === undefined) continue;
      const delta = Math.abs(series.median - base);
      deltas.set(series.name, Math.max(deltas.get(series.name) ?? 0, delta));
    }
  }
  if (deltas.size === 0) {
    return reference.series.map((s) => s.name);
  }
  return [...deltas.entries()].sort((a, b) => b[1] - a[1]).map(([name]) => name);
}

function densityPanel(
  doc: PlotDoc,
  segment: SegmentInfo,
  isReference: boolean,
  handlers: DensityCompareHandlers,
): HTMLElement {
  const panel = el("div", { class: "density-panel", "data-segment-id": String(segment.id) });
  const title = `Segment ${segment.id} [${segment.start_trace}, ${segment.end_trace})` +
    (isReference ? " — reference" : "");
  panel.appendChild(el("h3", {}, title));

  const frame = plotFrame("attribute", doc.axes.y.label);
  const all = doc.series.flatMap((s) => (s.y as number[]).filter((v) => isFinite(v)));
  const sy = linearScale(extent(all.length ? all : [-1, 0]), [frame.innerHeight, 0]);
  const step = frame.innerWidth / Math.max(doc.series.length, 1);

  doc.series.forEach((series, index) => {
    const cx = step * index + step / 2;
    const group = svg("g", { class: "density-attr", "data-attribute": series.name });
    for (const value of series.y as number[]) {
      group.appendChild(
        svg("circle", { cx: String(cx), cy: String(sy(value)), r: "1.4", class: "dot" }),
      );
    }
    if (series.median !== undefined) {
      const bandHalf = series.mad_scaled ?? 0;
      if (bandHalf > 0) {
        const top = sy(series.median + bandHalf);
        group.appendChild(
          svg("rect", {
            x: String(cx - step * 0.35),
            y: String(top),
            width: String(step * 0.7),
            height: String(Math.max(1, sy(series.median - bandHalf) - top)),
            class: "mad-band",
          }),
        );
      }
      const line = svg("line", {
        x1: String(cx - step * 0.35),
        x2: String(cx + step * 0.35),
        y1: String(sy(series.median)),
        y2: String(sy(series.median)),
        class: "median-line",
        "data-attribute": series.name,
        "data-median": formatDocNumber(series.median),
      });
      group.appendChild(line);
    }
    group.addEventListener("click", () => handlers.onAttributeClick(series.name, segment.id));
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
  panel.appendChild(frame.root);
  return panel;
}

/** Small multiples per segment, a median overlay table ordered by delta, and
 * the outlier table; clicking an attribute opens its component breakdown. */
export function renderDensityCompare(
  container: HTMLElement,
  segments: SegmentInfo[],
  densityDocs: Map<number, PlotDoc>,
  referenceSegmentId: number | null,
  outliers: OutlierDoc | null,
  handlers: DensityCompareHandlers,
): void {
  container.replaceChildren();
  container.appendChild(el("h2", {}, "Attribute densities"));
  if (referenceSegmentId === null) {
    container.appendChild(
      el("p", { class: "empty-state" }, "Select a reference segment to compare against."),
    );
    return;
  }
  if (densityDocs.size === 0) {
    container.appendChild(el("p", { class: "empty-state" }, "No density documents loaded."));
    return;
  }

  const panels = el("div", { class: "density-panels" });
  for (const segment of segments) {
    const doc = densityDocs.get(segment.id);
    if (doc) {
      panels.appendChild(
        densityPanel(doc, segment, segment.id === referenceSegmentId, handlers),
      );
    }
  }
  container.appendChild(panels);

  // median overlay: attribute rows ordered by max delta vs the reference
  const ordered = attributesByDelta(densityDocs, referenceSegmentId);
  const table = el("table", { class: "overlay-table", "data-role": "median-overlay" });
  const head = el("tr");
  head.appendChild(el("th", {}, "attribute (by delta)"));
  for (const segment of segments) {
    head.appendChild(el("th", {}, `segment ${segment.id}`));
  }
  table.appendChild(head);
  for (const attribute of ordered) {
    const row = el("tr", { "data-attribute": attribute });
    const cell = el("td", {}, attribute);
    cell.addEventListener("click", () =>
      handlers.onAttributeClick(attribute, segments[segments.length - 1]!.id),
    );
    row.appendChild(cell);
    for (const segment of segments) {
      const doc = densityDocs.get(segment.id);
      const median = doc
        ? seriesByName(doc).get(attribute)?.median
        : undefined;
      row.appendChild(
        el(
          "td",
          { "data-median": median === undefined ? "" : formatDocNumber(median) },
          median === undefined ? "–" : formatDocNumber(median),
        ),
      );
    }
    table.appendChild(row);
  }
  container.appendChild(table);

  if (outliers && outliers.items.length) {
    container.appendChild(el("h3", {}, `Outliers (k = ${outliers.k})`));
    const list = el("table", { class: "outlier-table", "data-role": "outliers" });
    const header = el("tr");
    for (const label of ["trace", "attribute", "log partial", "segment median", "MADs off"]) {
      header.appendChild(el("th", {}, label));
    }
    list.appendChild(header);
    for (const item of outliers.items) {
      for (const deviation of item.deviations) {
        const row = el("tr");
        const link = el("a", { href: `#trace-${item.trace_id}`, class: "trace-link" },
          item.trace_id);
        const cell = el("td");
        cell.appendChild(link);
        row.appendChild(cell);
        row.appendChild(el("td", {}, deviation.attribute));
        row.appendChild(el("td", {}, formatDocNumber(deviation.log_partial)));
        row.appendChild(el("td", {}, formatDocNumber(deviation.segment_median)));
        row.appendChild(
          el("td", {}, deviation.deviation_mads === null ? "∞" : formatDocNumber(deviation.deviation_mads)),
        );
        list.appendChild(row);
      }
    }
    container.appendChild(list);
  }
}
