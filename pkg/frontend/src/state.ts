/** View state: active layer, selection, time range (capped at the store's
 * 90-day retention), demo flag, and live data merged from the event stream. */

import type { Alert, StreamEvent } from "./types.js";

export const MAX_RANGE_DAYS = 90;

export type MapLayer = "sensors" | "ndvi" | "zones";

export interface Selection {
  type: "sensor" | "tree" | "zone";
  id: string;
}

export interface ViewState {
  layer: MapLayer;
  selected: Selection | null;
  rangeDays: number;
  demoMode: boolean;
  connected: boolean;
  tick: number;
}

export function initialState(): ViewState {
  return { layer: "sensors", selected: null, rangeDays: 7, demoMode: false, connected: true, tick: 0 };
}

export function setLayer(state: ViewState, layer: MapLayer): ViewState {
  return { ...state, layer };
}

export function select(state: ViewState, selected: Selection | null): ViewState {
  return { ...state, selected };
}

/** Range never exceeds retention; sub-day requests clamp up to one day. */
export function setRangeDays(state: ViewState, days: number): ViewState {
  const clamped = Math.min(MAX_RANGE_DAYS, Math.max(1, Math.floor(days)));
  return { ...state, rangeDays: clamped };
}

export function setConnected(state: ViewState, connected: boolean): ViewState {
  return { ...state, connected };
}

/** Merge one stream event into the alert list without a reload. */
export function mergeAlertEvent(alerts: Alert[], event: StreamEvent & Record<string, unknown>): Alert[] {
  if (event.type !== "alert-transition") return alerts;
  const alertId = String(event.alert_id);
  const existing = alerts.find((a) => a.alert_id === alertId);
  if (event.kind === "opened" && !existing) {
    const opened: Alert = {
      alert_id: alertId,
      rule: String(event.rule),
      device_id: Number(event.device_id),
      tree_id: null,
      opened_tick: Number(event.tick),
      opened_at: String(event.at),
      closed_at: null,
      severity: (event.severity as Alert["severity"]) ?? "warning",
      evidence: {},
      suggested_task: null,
      remediation: "",
      acknowledged: false,
    };
    return [...alerts, opened];
  }
  if (existing && event.kind === "closed") {
    return alerts.map((a) => (a.alert_id === alertId ? { ...a, closed_at: String(event.at) } : a));
  }
  if (existing && event.kind === "severity-changed") {
    return alerts.map((a) =>
      a.alert_id === alertId ? { ...a, severity: event.severity as Alert["severity"] } : a,
    );
  }
  return alerts;
}

export function applyTickEvent(state: ViewState, event: StreamEvent): ViewState {
  if (event.type !== "tick") return state;
  return { ...state, tick: Number(event.tick) };
}
