import { describe, expect, it } from "vitest";

import { renderMap } from "../src/map.js";
import type { NdviGrid, Sensor, ZoneFeature } from "../src/types.js";
import { fixture } from "./helpers.js";

const sensors = fixture<{ sensors: Sensor[] }>("sensors.json").sensors;
const zones = fixture<{ zones: ZoneFeature[] }>("zones.json").zones;
const ndvi = fixture<NdviGrid>("ndvi.json");

describe("map view", () => {
  it("renders the default scenario as 40 markers and 5 zone outlines", () => {
    const host = document.createElement("div");
    renderMap(host, { sensors, zones, ndvi: null, layer: "sensors" });
    expect(host.querySelectorAll(".sensor-marker").length).toBe(40);
    expect(host.querySelectorAll(".zone-outline").length).toBe(5);
    expect(host.querySelectorAll('.sensor-marker[data-kind="tree-talker"]').length).toBe(20);
  });

  it("places markers from API coordinates (north is up)", () => {
    const host = document.createElement("div");
    renderMap(host, { sensors, zones, ndvi: null, layer: "sensors" });
    const byId = new Map(
      Array.from(host.querySelectorAll<SVGCircleElement>(".sensor-marker"))
        .map((m) => [m.dataset.deviceId!, m]),
    );
    const northmost = [...sensors].sort((a, b) => b.lat - a.lat)[0];
    const southmost = [...sensors].sort((a, b) => a.lat - b.lat)[0];
    const yNorth = Number(byId.get(String(northmost.device_id))!.getAttribute("cy"));
    const ySouth = Number(byId.get(String(southmost.device_id))!.getAttribute("cy"));
    expect(yNorth).toBeLessThan(ySouth);
  });

  it("clicking a tree-talker marker reports the selection", () => {
    const host = document.createElement("div");
    const selections: string[] = [];
    renderMap(host, { sensors, zones, ndvi: null, layer: "sensors" },
      { onSelect: (sel) => selections.push(`${sel.type}:${sel.id}`) });
    const talker = sensors.find((s) => s.kind === "tree-talker")!;
    const marker = host.querySelector<SVGCircleElement>(
      `.sensor-marker[data-device-id="${talker.device_id}"]`)!;
    marker.dispatchEvent(new Event("click"));
    expect(selections).toEqual([`sensor:${talker.device_id}`]);
  });

  it("shows the vegetation layer with legend, timestamp, and masked fraction", () => {
    const host = document.createElement("div");
    renderMap(host, { sensors, zones, ndvi, layer: "ndvi" });
    expect(host.querySelectorAll(".ndvi-cell").length)
      .toBe(ndvi.values.length * ndvi.values[0].length);
    const legend = host.querySelector(".ndvi-legend")!;
    expect(legend.querySelectorAll(".legend-swatch").length).toBe(5);
    const meta = legend.querySelector(".legend-meta")!.textContent!;
    expect(meta).toContain(ndvi.snapshot_id);
    expect(meta).toContain("masked");
  });

  it("warns when an acquisition is fully clouded", () => {
    const clouded: NdviGrid = {
      ...ndvi,
      masked_fraction: 1.0,
      values: ndvi.values.map((row) => row.map(() => null)),
    };
    const host = document.createElement("div");
    renderMap(host, { sensors, zones, ndvi: clouded, layer: "ndvi" });
    expect(host.querySelector(".legend-warning")?.textContent).toContain("fully clouded");
  });
});
