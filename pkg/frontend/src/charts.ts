/** Minimal dependency-free SVG line charts; suspect stretches are shaded so
 * an obstructed gauge's window is visibly distinguished from good data. */

import type { SeriesPoint } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface ChartOptions {
  width?: number;
  height?: number;
  label?: string;
}

export function renderLineChart(
  container: HTMLElement,
  points: SeriesPoint[],
  options: ChartOptions = {},
): SVGSVGElement {
  const width = options.width ?? 420;
  const height = options.height ?? 120;
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "series-chart");
  if (options.label) svg.dataset.channel = options.label;

  const usable = points.filter((p) => p.flag !== "gap-filled");
  if (usable.length === 0) {
    container.appendChild(svg);
    return svg;
  }

  const times = usable.map((p) => Date.parse(p.t));
  const values = usable.map((p) => p.value);
  const t0 = Math.min(...times);
  const t1 = Math.max(...times);
  const vMin = Math.min(...values);
  const vMax = Math.max(...values);
  const spanT = t1 - t0 || 1;
  const spanV = vMax - vMin || 1;
  const pad = 6;
  const sx = (t: number) => pad + ((t - t0) / spanT) * (width - 2 * pad);
  const sy = (v: number) => height - pad - ((v - vMin) / spanV) * (height - 2 * pad);

  // shade maximal suspect stretches behind the line
  let runStart: number | null = null;
  for (let i = 0; i <= usable.length; i++) {
    const suspect = i < usable.length && usable[i].flag === "suspect";
    if (suspect && runStart === null) runStart = i;
    if (!suspect && runStart !== null) {
      const rect = document.createElementNS(SVG_NS, "rect");
      rect.setAttribute("x", String(sx(times[runStart])));
      rect.setAttribute("width", String(Math.max(1, sx(times[i - 1]) - sx(times[runStart]))));
      rect.setAttribute("y", "0");
      rect.setAttribute("height", String(height));
      rect.setAttribute("class", "suspect-region");
      svg.appendChild(rect);
      runStart = null;
    }
  }

  const line = document.createElementNS(SVG_NS, "polyline");
  line.setAttribute(
    "points",
    usable.map((p, i) => `${sx(times[i]).toFixed(1)},${sy(values[i]).toFixed(1)}`).join(" "),
  );
  line.setAttribute("class", "series-line");
  line.setAttribute("fill", "none");
  svg.appendChild(line);
  container.appendChild(svg);
  return svg;
}
