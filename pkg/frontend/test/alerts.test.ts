import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { draftTaskForAlert, renderInbox } from "../src/alerts.js";
import type { Alert, Task } from "../src/types.js";
import { fetchStub, fixture } from "./helpers.js";

const alerts = fixture<{ alerts: Alert[] }>("alerts.json").alerts;
const tasks = fixture<{ tasks: Task[] }>("tasks.json").tasks;

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

describe("alert inbox", () => {
  it("pairs each alert with its draft task", () => {
    const tilt = alerts.find((a) => a.rule === "tilt-anomaly")!;
    const draft = draftTaskForAlert(tilt, tasks)!;
    expect(draft.kind).toBe("pruning");
    expect(draft.state).toBe("draft");
  });

  it("renders severity badges and an approve button per suggestion", () => {
    const host = document.createElement("div");
    const api = new ApiClient("", fetchStub({}));
    renderInbox(host, alerts, tasks, api);
    expect(host.querySelectorAll(".alert-row").length).toBe(alerts.length);
    expect(host.querySelectorAll(".severity-badge").length).toBe(alerts.length);
    const approvals = host.querySelectorAll<HTMLButtonElement>(".approve-button");
    expect(approvals.length).toBe(2); // both fixture alerts carry suggestions
    expect([...approvals].map((b) => b.textContent)).toContain("approve pruning");
  });

  it("approving a suggestion posts the draft-to-open transition", async () => {
    const host = document.createElement("div");
    const calls: string[] = [];
    const tilt = alerts.find((a) => a.rule === "tilt-anomaly")!;
    const draft = draftTaskForAlert(tilt, tasks)!;
    const api = new ApiClient("", fetchStub({
      [`/api/tasks/${draft.task_id}/transition`]: { schema: "x", task: { ...draft, state: "open" } },
    }, calls));
    let changed = 0;
    renderInbox(host, alerts, tasks, api, { onChanged: () => changed++ });
    const button = host.querySelector<HTMLButtonElement>(
      `.approve-button[data-task-id="${draft.task_id}"]`)!;
    button.click();
    await flush();
    expect(calls).toContain(`POST /api/tasks/${draft.task_id}/transition`);
    expect(changed).toBe(1);
    expect(button.disabled).toBe(true); // optimistic state kept on success
  });

  it("rolls the optimistic action back with a notice on API failure", async () => {
    const host = document.createElement("div");
    const notices: string[] = [];
    const api = new ApiClient("", fetchStub({})); // every POST 404s
    const tilt = alerts.find((a) => a.rule === "tilt-anomaly")!;
    const draft = draftTaskForAlert(tilt, tasks)!;
    renderInbox(host, alerts, tasks, api, { notify: (m) => notices.push(m) });
    const button = host.querySelector<HTMLButtonElement>(
      `.approve-button[data-task-id="${draft.task_id}"]`)!;
    button.click();
    await flush();
    expect(button.disabled).toBe(false); // rolled back
    expect(notices.length).toBe(1);
    expect(notices[0]).toContain("approve failed");
  });

  it("acking moves the row into the acknowledged style", async () => {
    const host = document.createElement("div");
    const target = alerts[0];
    const api = new ApiClient("", fetchStub({
      [`/api/alerts/${target.alert_id}/ack`]: { schema: "x", alert: { ...target, acknowledged: true } },
    }));
    renderInbox(host, alerts, tasks, api);
    const row = host.querySelector<HTMLElement>(`[data-alert-id="${target.alert_id}"]`)!;
    row.querySelector<HTMLButtonElement>(".ack-button")!.click();
    await flush();
    expect(row.classList.contains("acknowledged")).toBe(true);
  });

  it("disables actions when the API is unreachable", () => {
    const host = document.createElement("div");
    const api = new ApiClient("", fetchStub({}));
    renderInbox(host, alerts, tasks, api, {}, false);
    const buttons = host.querySelectorAll<HTMLButtonElement>("button");
    expect(buttons.length).toBeGreaterThan(0);
    expect([...buttons].every((b) => b.disabled)).toBe(true);
  });
});
