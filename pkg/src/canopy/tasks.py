"""Maintenance work items: creation, state machine, audit trail, and reports."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Callable, Iterable, Optional

from .errors import CanopyError, IllegalTransition, NotFound


class TaskKind(str, Enum):
    PRUNING = "pruning"
    IRRIGATION = "irrigation"
    INSPECTION = "inspection"


class TaskState(str, Enum):
    DRAFT = "draft"
    OPEN = "open"
    ASSIGNED = "assigned"
    IN_PROGRESS = "in-progress"
    DONE = "done"
    CANCELLED = "cancelled"


class TaskEvent(str, Enum):
    APPROVE = "approve"
    ASSIGN = "assign"
    START = "start"
    COMPLETE = "complete"
    CANCEL = "cancel"


TERMINAL_STATES = (TaskState.DONE, TaskState.CANCELLED)

_MACHINE: dict[tuple[TaskState, TaskEvent], TaskState] = {
    (TaskState.DRAFT, TaskEvent.APPROVE): TaskState.OPEN,
    (TaskState.OPEN, TaskEvent.ASSIGN): TaskState.ASSIGNED,
    (TaskState.ASSIGNED, TaskEvent.START): TaskState.IN_PROGRESS,
    (TaskState.IN_PROGRESS, TaskEvent.COMPLETE): TaskState.DONE,
}
for _state in (TaskState.DRAFT, TaskState.OPEN, TaskState.ASSIGNED, TaskState.IN_PROGRESS):
    _MACHINE[(_state, TaskEvent.CANCEL)] = TaskState.CANCELLED


class UnknownTarget(NotFound):
    code = "unknown-target"


class InvalidKind(CanopyError):
    code = "invalid-kind"


@dataclass(frozen=True, slots=True)
class TaskSpec:
    """What to do and where; the seed for a MaintenanceTask."""

    kind: TaskKind
    target: str
    note: str = ""
    due_at: Optional[datetime] = None


@dataclass
class MaintenanceTask:
    task_id: str
    kind: TaskKind
    target: str
    state: TaskState
    created_at: datetime
    source: str = "manual"
    assignee: Optional[str] = None
    due_at: Optional[datetime] = None
    notes: str = ""
    done_at: Optional[datetime] = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "kind": self.kind.value,
            "target": self.target,
            "state": self.state.value,
            "created_at": self.created_at.isoformat(),
            "source": self.source,
            "assignee": self.assignee,
            "due_at": self.due_at.isoformat() if self.due_at else None,
            "notes": self.notes,
            "done_at": self.done_at.isoformat() if self.done_at else None,
        }


@dataclass(frozen=True, slots=True)
class AuditEntry:
    task_id: str
    event: str
    from_state: str
    to_state: str
    at: datetime
    operator: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id, "event": self.event, "from": self.from_state,
            "to": self.to_state, "at": self.at.isoformat(), "operator": self.operator,
        }


class TaskBoard:
    """Task ledger with an append-only audit log; transitions serialize per board."""

    def __init__(self, target_exists: Optional[Callable[[str], bool]] = None,
                 zone_of_target: Optional[Callable[[str], Optional[str]]] = None):
        self._target_exists = target_exists or (lambda _t: True)
        self._zone_of_target = zone_of_target or (lambda _t: None)
        self._tasks: dict[str, MaintenanceTask] = {}
        self._audit: list[AuditEntry] = []
        self._by_alert: dict[str, str] = {}
        self._next = 1
        self._lock = threading.RLock()

    # -- creation ------------------------------------------------------------

    def create_task(self, spec: TaskSpec, created_at: datetime, source: str = "manual") -> MaintenanceTask:
        if not isinstance(spec.kind, TaskKind):
            raise InvalidKind(f"unknown task kind: {spec.kind!r}")
        if not self._target_exists(spec.target):
            raise UnknownTarget(f"no tree, zone, or device with id {spec.target!r}")
        with self._lock:
            task_id = f"T-{self._next:04d}"
            self._next += 1
            state = TaskState.DRAFT if source.startswith("alert:") else TaskState.OPEN
            task = MaintenanceTask(
                task_id=task_id, kind=spec.kind, target=spec.target, state=state,
                created_at=created_at, source=source, due_at=spec.due_at, notes=spec.note,
            )
            self._tasks[task_id] = task
            self._audit.append(AuditEntry(task_id, "create", "", state.value, created_at))
            return task

    def ensure_task_for_alert(self, alert_id: str, spec: TaskSpec, created_at: datetime) -> MaintenanceTask:
        """Exactly one draft per alert; repeated calls return the existing task."""
        with self._lock:
            existing = self._by_alert.get(alert_id)
            if existing is not None:
                return self._tasks[existing]
            task = self.create_task(spec, created_at, source=f"alert:{alert_id}")
            self._by_alert[alert_id] = task.task_id
            return task

    # -- state machine ---------------------------------------------------------

    def transition(self, task_id: str, event: TaskEvent, at: datetime,
                   operator: Optional[str] = None) -> MaintenanceTask:
        with self._lock:
            task = self._tasks.get(task_id)
            if task is None:
                raise NotFound(f"no such task: {task_id}")
            nxt = _MACHINE.get((task.state, event))
            if nxt is None:
                raise IllegalTransition(
                    f"event {event.value!r} is not legal from state {task.state.value!r}")
            if event is TaskEvent.ASSIGN:
                if not operator:
                    raise IllegalTransition("assign requires an operator id")
                task.assignee = operator
            prev = task.state
            task.state = nxt
            if nxt is TaskState.DONE:
                task.done_at = at
            self._audit.append(AuditEntry(task_id, event.value, prev.value, nxt.value, at, operator))
            return task

    # -- queries -----------------------------------------------------------------

    def get(self, task_id: str) -> MaintenanceTask:
        task = self._tasks.get(task_id)
        if task is None:
            raise NotFound(f"no such task: {task_id}")
        return task

    def tasks(self, state: Optional[TaskState] = None) -> list[MaintenanceTask]:
        with self._lock:
            out = list(self._tasks.values())
        if state is not None:
            out = [t for t in out if t.state is state]
        return sorted(out, key=lambda t: t.task_id)

    def audit_log(self) -> list[AuditEntry]:
        with self._lock:
            return list(self._audit)

    # -- reporting ------------------------------------------------------------------

    def report(self, zone_id: Optional[str], t0: datetime, t1: datetime) -> dict:
        """Counts by kind and state plus completion-latency stats for one period."""
        if t0 > t1:
            raise CanopyError("report period start is after end")
        with self._lock:
            selected = [
                t for t in self._tasks.values()
                if t0 <= t.created_at <= t1
                and (zone_id is None or self._zone_of_target(t.target) == zone_id)
            ]
        counts = {kind.value: {state.value: 0 for state in TaskState} for kind in TaskKind}
        for t in selected:
            counts[t.kind.value][t.state.value] += 1
        latencies = [
            (t.done_at - t.created_at).total_seconds() / 86_400.0
            for t in selected if t.done_at is not None
        ]
        stats = {
            "count": len(latencies),
            "mean_days": sum(latencies) / len(latencies) if latencies else None,
            "min_days": min(latencies) if latencies else None,
            "max_days": max(latencies) if latencies else None,
        }
        return {"zone_id": zone_id, "total": len(selected), "counts": counts, "latency": stats}

    # -- persistence -------------------------------------------------------------------

    def export_audit_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.audit_log())


def replay_audit(entries: Iterable[dict],
                 tasks_by_id: dict[str, MaintenanceTask]) -> dict[str, str]:
    """Re-derive final task states from an audit log; returns {task_id: state}."""
    states: dict[str, str] = {}
    for e in entries:
        states[e["task_id"]] = e["to"]
    for task_id, state in states.items():
        if task_id in tasks_by_id and tasks_by_id[task_id].state.value != state:
            raise CanopyError(f"audit replay mismatch for {task_id}")
    return states
