import json
from datetime import timedelta

import pytest

from canopy.errors import IllegalTransition, NotFound
from canopy.model import DEFAULT_EPOCH
from canopy.tasks import (
    InvalidKind,
    MaintenanceTask,
    TaskBoard,
    TaskEvent,
    TaskKind,
    TaskSpec,
    TaskState,
    UnknownTarget,
    replay_audit,
)

T0 = DEFAULT_EPOCH
TARGETS = {"CB-0001", "villa-park", "dev-30000001"}


def board():
    return TaskBoard(target_exists=lambda t: t in TARGETS,
                     zone_of_target=lambda t: "villa-park" if t != "nowhere" else None)


def test_manual_task_starts_open():
    b = board()
    task = b.create_task(TaskSpec(TaskKind.PRUNING, "CB-0001"), T0)
    assert task.state is TaskState.OPEN
    assert task.task_id == "T-0001"


def test_alert_sourced_task_starts_draft():
    b = board()
    task = b.create_task(TaskSpec(TaskKind.PRUNING, "CB-0001"), T0, source="alert:abc")
    assert task.state is TaskState.DRAFT


def test_unknown_target_rejected():
    with pytest.raises(UnknownTarget):
        board().create_task(TaskSpec(TaskKind.PRUNING, "ghost-tree"), T0)


def test_invalid_kind_rejected():
    with pytest.raises(InvalidKind):
        board().create_task(TaskSpec("mowing", "CB-0001"), T0)  # type: ignore[arg-type]


def test_happy_path_through_the_machine():
    b = board()
    task = b.create_task(TaskSpec(TaskKind.PRUNING, "CB-0001"), T0, source="alert:x")
    assert task.state is TaskState.DRAFT
    b.transition(task.task_id, TaskEvent.APPROVE, T0)
    assert task.state is TaskState.OPEN
    b.transition(task.task_id, TaskEvent.ASSIGN, T0, operator="op-7")
    assert task.state is TaskState.ASSIGNED and task.assignee == "op-7"
    b.transition(task.task_id, TaskEvent.START, T0)
    assert task.state is TaskState.IN_PROGRESS
    b.transition(task.task_id, TaskEvent.COMPLETE, T0 + timedelta(days=2))
    assert task.state is TaskState.DONE
    assert task.done_at == T0 + timedelta(days=2)


def test_terminal_states_admit_nothing():
    b = board()
    task = b.create_task(TaskSpec(TaskKind.INSPECTION, "CB-0001"), T0)
    b.transition(task.task_id, TaskEvent.CANCEL, T0)
    for event in TaskEvent:
        with pytest.raises(IllegalTransition):
            b.transition(task.task_id, event, T0)


def test_done_plus_assign_is_illegal():
    b = board()
    task = b.create_task(TaskSpec(TaskKind.PRUNING, "CB-0001"), T0)
    b.transition(task.task_id, TaskEvent.ASSIGN, T0, operator="op-1")
    b.transition(task.task_id, TaskEvent.START, T0)
    b.transition(task.task_id, TaskEvent.COMPLETE, T0)
    with pytest.raises(IllegalTransition):
        b.transition(task.task_id, TaskEvent.ASSIGN, T0, operator="op-2")


def test_open_cancel_is_legal():
    b = board()
    task = b.create_task(TaskSpec(TaskKind.IRRIGATION, "villa-park"), T0)
    b.transition(task.task_id, TaskEvent.CANCEL, T0)
    assert task.state is TaskState.CANCELLED


def test_assign_requires_operator():
    b = board()
    task = b.create_task(TaskSpec(TaskKind.PRUNING, "CB-0001"), T0)
    with pytest.raises(IllegalTransition):
        b.transition(task.task_id, TaskEvent.ASSIGN, T0)


def test_unknown_task_is_not_found():
    with pytest.raises(NotFound):
        board().transition("T-9999", TaskEvent.CANCEL, T0)


def test_alert_suggestion_creates_exactly_one_draft():
    b = board()
    spec = TaskSpec(TaskKind.PRUNING, "CB-0001", "prune")
    first = b.ensure_task_for_alert("alert-1", spec, T0)
    second = b.ensure_task_for_alert("alert-1", spec, T0 + timedelta(hours=1))
    assert first.task_id == second.task_id
    assert len(b.tasks()) == 1
    b.transition(first.task_id, TaskEvent.APPROVE, T0)
    third = b.ensure_task_for_alert("alert-1", spec, T0)
    assert third.task_id == first.task_id
    assert len(b.tasks()) == 1


# -- reports ----------------------------------------------------------------------

def test_empty_ledger_reports_zeros():
    report = board().report(None, T0, T0 + timedelta(days=30))
    assert report["total"] == 0
    assert report["latency"]["count"] == 0
    assert all(v == 0 for kind in report["counts"].values() for v in kind.values())


def test_completion_latency_mean():
    b = board()
    for days in (1, 2, 3):
        task = b.create_task(TaskSpec(TaskKind.PRUNING, "CB-0001"), T0)
        b.transition(task.task_id, TaskEvent.ASSIGN, T0, operator="op")
        b.transition(task.task_id, TaskEvent.START, T0)
        b.transition(task.task_id, TaskEvent.COMPLETE, T0 + timedelta(days=days))
    report = b.report(None, T0, T0 + timedelta(days=30))
    assert report["counts"]["pruning"]["done"] == 3
    assert report["latency"]["count"] == 3
    assert report["latency"]["mean_days"] == pytest.approx(2.0)
    assert report["latency"]["min_days"] == pytest.approx(1.0)
    assert report["latency"]["max_days"] == pytest.approx(3.0)


def test_period_excluding_everything_reports_zeros():
    b = board()
    b.create_task(TaskSpec(TaskKind.PRUNING, "CB-0001"), T0)
    report = b.report(None, T0 + timedelta(days=10), T0 + timedelta(days=20))
    assert report["total"] == 0


def test_zone_filter():
    b = board()
    b.create_task(TaskSpec(TaskKind.PRUNING, "CB-0001"), T0)
    report = b.report("villa-park", T0, T0 + timedelta(days=1))
    assert report["total"] == 1
    report = b.report("castle-hill", T0, T0 + timedelta(days=1))
    assert report["total"] == 0


# -- audit -------------------------------------------------------------------------

def test_audit_log_replays_to_current_state():
    b = board()
    t1 = b.create_task(TaskSpec(TaskKind.PRUNING, "CB-0001"), T0)
    t2 = b.create_task(TaskSpec(TaskKind.INSPECTION, "dev-30000001"), T0, source="alert:a")
    b.transition(t1.task_id, TaskEvent.ASSIGN, T0, operator="op")
    b.transition(t2.task_id, TaskEvent.APPROVE, T0)
    b.transition(t1.task_id, TaskEvent.START, T0)
    entries = [json.loads(line) for line in b.export_audit_jsonl().splitlines()]
    states = replay_audit(entries, {t.task_id: t for t in b.tasks()})
    assert states == {"T-0001": "in-progress", "T-0002": "open"}


def test_audit_is_append_only():
    b = board()
    task = b.create_task(TaskSpec(TaskKind.PRUNING, "CB-0001"), T0)
    before = b.export_audit_jsonl()
    b.transition(task.task_id, TaskEvent.CANCEL, T0)
    after = b.export_audit_jsonl()
    assert after.startswith(before)
