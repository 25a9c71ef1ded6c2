/** Minimal SVG construction helpers; no charting library, no statistics. */

const SVG_NS = "http://www.w3.org/2000/svg";

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

export function svg(tag: string, attrs: Record<string, string> = {}): SVGElement {
  const node = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  return node;
}

export interface Scale {
  (value: number): number;
  invert(pixel: number): number;
}

export function linearScale(domain: [number, number], range: [number, number]): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.invert = (pixel: number) => d0 + ((pixel - r0) / (r1 - r0 || 1)) * span;
  return scale;
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

export function polylinePoints(xs: number[], ys: number[]): string {
  const parts: string[] = [];
  for (let i = 0; i < xs.length; i++) parts.push(`${xs[i]},${ys[i]}`);
  return parts.join(" ");
}

export const PLOT_WIDTH = 860;
export const PLOT_HEIGHT = 300;
export const MARGIN = { left: 55, right: 15, top: 10, bottom: 30 };

export function plotFrame(xLabel: string, yLabel: string): {
  root: SVGElement;
  inner: SVGElement;
  innerWidth: number;
  innerHeight: number;
} {
  const root = svg("svg", {
    viewBox: `0 0 ${PLOT_WIDTH} ${PLOT_HEIGHT}`,
    class: "plot",
    width: String(PLOT_WIDTH),
    height: String(PLOT_HEIGHT),
  });
  const inner = svg("g", {
    transform: `translate(${MARGIN.left},${MARGIN.top})`,
  });
  root.appendChild(inner);
  const xText = svg("text", {
    x: String(PLOT_WIDTH / 2),
    y: String(PLOT_HEIGHT - 4),
    class: "axis-label",
    "text-anchor": "middle",
  });
  xText.textContent = xLabel;
  const yText = svg("text", {
    x: "12",
    y: String(PLOT_HEIGHT / 2),
    class: "axis-label",
    transform: `rotate(-90 12 ${PLOT_HEIGHT / 2})`,
    "text-anchor": "middle",
  });
  yText.textContent = yLabel;
  root.appendChild(xText);
  root.appendChild(yText);
  return {
    root,
    inner,
    innerWidth: PLOT_WIDTH - MARGIN.left - MARGIN.right,
    innerHeight: PLOT_HEIGHT - MARGIN.top - MARGIN.bottom,
  };
}
