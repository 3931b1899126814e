/** SVG map: sensor markers, zone outlines, and the NDVI cell layer with its
 * legend. Marker positions come straight from API coordinates. */

import { fitViewport, project, type Viewport } from "./geometry.js";
import { BUCKET_COLORS, BUCKET_LABELS, ndviColor } from "./legend.js";
import type { NdviGrid, Sensor, ZoneFeature } from "./types.js";
import type { MapLayer, Selection } from "./state.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const EARTH_RADIUS_M = 6371000;
const DEG_PER_M_LAT = 180 / (Math.PI * EARTH_RADIUS_M);

export interface MapData {
  sensors: Sensor[];
  zones: ZoneFeature[];
  ndvi: NdviGrid | null;
  layer: MapLayer;
}

export interface MapCallbacks {
  onSelect?: (selection: Selection) => void;
}

function svgEl<K extends keyof SVGElementTagNameMap>(tag: K): SVGElementTagNameMap[K] {
  return document.createElementNS(SVG_NS, tag);
}

function addNdviCells(svg: SVGSVGElement, vp: Viewport, grid: NdviGrid): void {
  const [originLat, originLon] = grid.origin;
  const dLat = grid.cell_size_m * DEG_PER_M_LAT;
  const dLon = (grid.cell_size_m * DEG_PER_M_LAT) / Math.cos(originLat * (Math.PI / 180));
  const group = svgEl("g");
  group.setAttribute("class", "ndvi-layer");
  for (let r = 0; r < grid.values.length; r++) {
    for (let c = 0; c < grid.values[r].length; c++) {
      const south = originLat + r * dLat;
      const west = originLon + c * dLon;
      const [x0, y0] = project(vp, south + dLat, west); // north-west corner
      const [x1, y1] = project(vp, south, west + dLon); // south-east corner
      const rect = svgEl("rect");
      rect.setAttribute("x", String(x0));
      rect.setAttribute("y", String(y0));
      rect.setAttribute("width", String(Math.max(0.5, x1 - x0)));
      rect.setAttribute("height", String(Math.max(0.5, y1 - y0)));
      rect.setAttribute("fill", ndviColor(grid.values[r][c]));
      rect.setAttribute("class", "ndvi-cell");
      group.appendChild(rect);
    }
  }
  svg.appendChild(group);
}

function addZones(svg: SVGSVGElement, vp: Viewport, zones: ZoneFeature[],
                  callbacks: MapCallbacks): void {
  for (const zone of zones) {
    const polygon = svgEl("polygon");
    const points = zone.boundary
      .map(([lat, lon]) => project(vp, lat, lon).map((v) => v.toFixed(1)).join(","))
      .join(" ");
    polygon.setAttribute("points", points);
    polygon.setAttribute("class", "zone-outline");
    polygon.dataset.zoneId = zone.zone_id;
    polygon.addEventListener("click", () =>
      callbacks.onSelect?.({ type: "zone", id: zone.zone_id }));
    const title = svgEl("title");
    title.textContent = `${zone.name} (${Math.round(zone.area_m2)} m²)`;
    polygon.appendChild(title);
    svg.appendChild(polygon);
  }
}

function addMarkers(svg: SVGSVGElement, vp: Viewport, sensors: Sensor[],
                    callbacks: MapCallbacks): void {
  for (const sensor of sensors) {
    const [x, y] = project(vp, sensor.lat, sensor.lon);
    const marker = svgEl("circle");
    marker.setAttribute("cx", String(x));
    marker.setAttribute("cy", String(y));
    marker.setAttribute("r", sensor.kind === "tree-talker" ? "5" : "4");
    marker.setAttribute("class", `sensor-marker kind-${sensor.kind}`);
    marker.dataset.deviceId = String(sensor.device_id);
    marker.dataset.kind = sensor.kind;
    marker.addEventListener("click", () =>
      callbacks.onSelect?.({ type: "sensor", id: String(sensor.device_id) }));
    const title = svgEl("title");
    title.textContent = `${sensor.label} (${sensor.kind})`;
    marker.appendChild(title);
    svg.appendChild(marker);
  }
}

function legendPanel(grid: NdviGrid | null): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "ndvi-legend";
  if (grid) {
    const meta = document.createElement("div");
    meta.className = "legend-meta";
    meta.textContent =
      `snapshot ${grid.snapshot_id} · ${grid.acquired_at} · ` +
      `masked ${(grid.masked_fraction * 100).toFixed(0)}%`;
    panel.appendChild(meta);
    if (grid.masked_fraction >= 1.0) {
      const warning = document.createElement("div");
      warning.className = "legend-warning";
      warning.textContent = "fully clouded acquisition: no usable cells";
      panel.appendChild(warning);
    }
  }
  for (const [bucket, label] of BUCKET_LABELS) {
    const row = document.createElement("div");
    row.className = "legend-row";
    const swatch = document.createElement("span");
    swatch.className = "legend-swatch";
    swatch.dataset.bucket = bucket;
    swatch.style.backgroundColor = BUCKET_COLORS[bucket];
    const text = document.createElement("span");
    text.textContent = `${bucket} ${label}`;
    row.append(swatch, text);
    panel.appendChild(row);
  }
  return panel;
}

export function renderMap(container: HTMLElement, data: MapData,
                          callbacks: MapCallbacks = {}): void {
  container.replaceChildren();
  const extent: [number, number][] = [
    ...data.sensors.map((s) => [s.lat, s.lon] as [number, number]),
    ...data.zones.flatMap((z) => z.boundary),
  ];
  if (extent.length === 0) {
    const empty = document.createElement("div");
    empty.className = "map-empty";
    empty.textContent = "no geodata loaded";
    container.appendChild(empty);
    return;
  }
  const vp = fitViewport(extent);
  const svg = svgEl("svg");
  svg.setAttribute("viewBox", `0 0 ${vp.width} ${vp.height}`);
  svg.setAttribute("class", "map-canvas");

  if (data.layer === "ndvi" && data.ndvi) {
    addNdviCells(svg, vp, data.ndvi);
  }
  addZones(svg, vp, data.zones, callbacks);
  if (data.layer !== "zones") {
    addMarkers(svg, vp, data.sensors, callbacks);
  }
  container.appendChild(svg);
  if (data.layer === "ndvi") {
    container.appendChild(legendPanel(data.ndvi));
  }
}
