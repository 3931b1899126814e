import { describe, expect, it } from "vitest";

import {
  applyTickEvent,
  initialState,
  mergeAlertEvent,
  setRangeDays,
  MAX_RANGE_DAYS,
} from "../src/state.js";
import type { Alert } from "../src/types.js";

const alert: Alert = {
  alert_id: "tilt-anomaly:40000007:342", rule: "tilt-anomaly", device_id: 0x40000007,
  tree_id: "CB-0007", opened_tick: 342, opened_at: "2024-03-08T03:00:00+00:00",
  closed_at: null, severity: "warning", evidence: {}, suggested_task: null,
  remediation: "pruning", acknowledged: false,
};

describe("view state", () => {
  it("never lets the time range exceed retention", () => {
    let s = initialState();
    s = setRangeDays(s, 365);
    expect(s.rangeDays).toBe(MAX_RANGE_DAYS);
    s = setRangeDays(s, 0);
    expect(s.rangeDays).toBe(1);
    s = setRangeDays(s, 30);
    expect(s.rangeDays).toBe(30);
  });

  it("tracks tick events", () => {
    const s = applyTickEvent(initialState(), { type: "tick", tick: 77 });
    expect(s.tick).toBe(77);
  });
});

describe("event-stream merge", () => {
  it("adds a newly opened alert without a reload", () => {
    const merged = mergeAlertEvent([], {
      type: "alert-transition", kind: "opened", alert_id: "a-1", rule: "salinity-anomaly",
      device_id: 1, tick: 5, at: "2024-03-01T02:30:00+00:00", severity: "warning",
    });
    expect(merged.length).toBe(1);
    expect(merged[0].rule).toBe("salinity-anomaly");
    expect(merged[0].closed_at).toBeNull();
  });

  it("closes and escalates existing alerts in place", () => {
    const closed = mergeAlertEvent([alert], {
      type: "alert-transition", kind: "closed", alert_id: alert.alert_id,
      at: "2024-03-09T00:00:00+00:00",
    });
    expect(closed[0].closed_at).toBe("2024-03-09T00:00:00+00:00");

    const escalated = mergeAlertEvent([alert], {
      type: "alert-transition", kind: "severity-changed", alert_id: alert.alert_id,
      severity: "critical",
    });
    expect(escalated[0].severity).toBe("critical");
  });

  it("ignores unrelated events", () => {
    const alerts = [alert];
    expect(mergeAlertEvent(alerts, { type: "tick", tick: 3 })).toBe(alerts);
  });
});
