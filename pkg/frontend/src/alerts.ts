/** Alert inbox: live rows with ack and approve-suggested-task actions.
 * Actions are optimistic and roll back with a visible notice on API error. */

import type { ApiClient } from "./api.js";
import type { Alert, Task } from "./types.js";

export interface InboxCallbacks {
  onChanged?: () => void;
  notify?: (message: string) => void;
}

export function draftTaskForAlert(alert: Alert, tasks: Task[]): Task | null {
  return tasks.find((t) => t.source === `alert:${alert.alert_id}` && t.state === "draft") ?? null;
}

export function renderInbox(
  container: HTMLElement,
  alerts: Alert[],
  tasks: Task[],
  api: ApiClient,
  callbacks: InboxCallbacks = {},
  actionsEnabled = true,
): void {
  container.replaceChildren();
  container.classList.add("alert-inbox");
  const ordered = [...alerts].sort((a, b) => b.opened_tick - a.opened_tick);
  for (const alert of ordered) {
    const row = document.createElement("div");
    row.className = `alert-row ${alert.closed_at ? "closed" : "open"}`
      + (alert.acknowledged ? " acknowledged" : "");
    row.dataset.alertId = alert.alert_id;

    const badge = document.createElement("span");
    badge.className = `severity-badge ${alert.severity}`;
    badge.textContent = alert.severity;
    const text = document.createElement("span");
    text.className = "alert-text";
    const device = `0x${alert.device_id.toString(16).padStart(8, "0")}`;
    text.textContent = `${alert.rule} · ${alert.tree_id ?? device} · ${alert.opened_at}`
      + (alert.remediation ? ` · ${alert.remediation}` : "");
    row.append(badge, text);

    if (!alert.acknowledged) {
      const ack = document.createElement("button");
      ack.textContent = "ack";
      ack.className = "ack-button";
      ack.disabled = !actionsEnabled;
      ack.addEventListener("click", async () => {
        row.classList.add("acknowledged"); // optimistic
        try {
          await api.ackAlert(alert.alert_id);
          callbacks.onChanged?.();
        } catch (err) {
          row.classList.remove("acknowledged");
          callbacks.notify?.(`ack failed: ${(err as Error).message}`);
        }
      });
      row.appendChild(ack);
    }

    const draft = draftTaskForAlert(alert, tasks);
    if (draft) {
      const approve = document.createElement("button");
      approve.textContent = `approve ${draft.kind}`;
      approve.className = "approve-button";
      approve.dataset.taskId = draft.task_id;
      approve.disabled = !actionsEnabled;
      approve.addEventListener("click", async () => {
        approve.disabled = true; // optimistic
        try {
          await api.transitionTask(draft.task_id, "approve");
          callbacks.onChanged?.();
        } catch (err) {
          approve.disabled = false;
          callbacks.notify?.(`approve failed: ${(err as Error).message}`);
        }
      });
      row.appendChild(approve);
    }
    container.appendChild(row);
  }
}
