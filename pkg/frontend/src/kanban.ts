/** Task board: columns by state, drag legality mirroring the server's state
 * machine. The server re-checks every transition; this mirror only avoids
 * proposing moves that are guaranteed to be rejected. */

import type { Task, TaskState } from "./types.js";

export const BOARD_COLUMNS: TaskState[] = [
  "draft", "open", "assigned", "in-progress", "done", "cancelled",
];

const FORWARD: Partial<Record<TaskState, { next: TaskState; event: string }>> = {
  draft: { next: "open", event: "approve" },
  open: { next: "assigned", event: "assign" },
  assigned: { next: "in-progress", event: "start" },
  "in-progress": { next: "done", event: "complete" },
};

const TERMINAL: TaskState[] = ["done", "cancelled"];

/** The event a drag from `from` to `to` would issue, or null when illegal. */
export function dragEvent(from: TaskState, to: TaskState): string | null {
  if (from === to) return null;
  if (TERMINAL.includes(from)) return null;
  if (to === "cancelled") return "cancel";
  const step = FORWARD[from];
  if (step && step.next === to) return step.event;
  return null;
}

export interface BoardCallbacks {
  onDrop?: (taskId: string, from: TaskState, to: TaskState, event: string) => void;
  onIllegalDrop?: (taskId: string, from: TaskState, to: TaskState) => void;
}

export function renderBoard(container: HTMLElement, tasks: Task[],
                            callbacks: BoardCallbacks = {}): void {
  container.replaceChildren();
  container.classList.add("kanban");
  for (const state of BOARD_COLUMNS) {
    const column = document.createElement("div");
    column.className = "kanban-column";
    column.dataset.state = state;
    const heading = document.createElement("h3");
    heading.textContent = state;
    column.appendChild(heading);

    column.addEventListener("dragover", (e) => e.preventDefault());
    column.addEventListener("drop", (e) => {
      e.preventDefault();
      const payload = (e as DragEvent).dataTransfer?.getData("text/plain");
      if (!payload) return;
      const [taskId, from] = payload.split("|") as [string, TaskState];
      const event = dragEvent(from, state);
      if (event === null) {
        column.classList.add("drop-rejected");
        callbacks.onIllegalDrop?.(taskId, from, state);
        return;
      }
      callbacks.onDrop?.(taskId, from, state, event);
    });

    for (const task of tasks.filter((t) => t.state === state)) {
      const card = document.createElement("div");
      card.className = "kanban-card";
      card.dataset.taskId = task.task_id;
      card.draggable = true;
      card.addEventListener("dragstart", (e) => {
        (e as DragEvent).dataTransfer?.setData("text/plain", `${task.task_id}|${task.state}`);
      });
      const title = document.createElement("div");
      title.className = "card-title";
      title.textContent = `${task.task_id} · ${task.kind}`;
      const target = document.createElement("div");
      target.className = "card-target";
      target.textContent = task.target + (task.assignee ? ` → ${task.assignee}` : "");
      card.append(title, target);
      if (task.source.startsWith("alert:")) {
        const badge = document.createElement("span");
        badge.className = "card-badge";
        badge.textContent = "from alert";
        card.appendChild(badge);
      }
      column.appendChild(card);
    }
    container.appendChild(column);
  }
}
