/** Wire types for the monitoring API (schema canopy/api/v1/...). */

export interface Sensor {
  device_id: number;
  label: string;
  kind: "weather-station" | "air-quality" | "soil-probe" | "tree-talker";
  lat: number;
  lon: number;
  attached_tree: string | null;
}

export interface ZoneFeature {
  zone_id: string;
  name: string;
  source: string;
  area_m2: number;
  boundary: [number, number][]; // [lat, lon] vertices
}

export interface SeriesPoint {
  t: string;
  value: number;
  flag: "ok" | "suspect" | "gap-filled";
}

export interface Alert {
  alert_id: string;
  rule: string;
  device_id: number;
  tree_id: string | null;
  opened_tick: number;
  opened_at: string;
  closed_at: string | null;
  severity: "warning" | "critical";
  evidence: Record<string, unknown>;
  suggested_task: { kind: string; target: string; note: string } | null;
  remediation: string;
  acknowledged: boolean;
}

export type TaskState = "draft" | "open" | "assigned" | "in-progress" | "done" | "cancelled";

export interface Task {
  task_id: string;
  kind: string;
  target: string;
  state: TaskState;
  created_at: string;
  source: string;
  assignee: string | null;
  notes: string;
}

export interface SnapshotMeta {
  snapshot_id: string;
  tick: number;
  acquired_at: string;
  masked_fraction: number;
  width: number;
  height: number;
}

export interface NdviGrid {
  snapshot_id: string;
  acquired_at: string;
  cell_size_m: number;
  origin: [number, number]; // [lat, lon] of the south-west corner
  masked_fraction: number;
  values: (number | null)[][]; // row 0 = southern edge, null = masked
}

export interface WeatherStation {
  device_id: number;
  label: string;
  lat: number;
  lon: number;
  channels: Record<string, { t: string; value: number; flag: string } | null>;
}

export interface StreamEvent {
  type: "tick" | "alert-transition" | "snapshot";
  [key: string]: unknown;
}
