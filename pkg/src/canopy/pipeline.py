"""End-to-end run orchestration: simulate, uplink, ingest, evaluate, snapshot.

The trace is the ingestion boundary's ground truth: one hex line per frame
that reached the store, in delivery order. Replaying a trace against the
same scenario reconstructs the identical store (values, flags, digest)
and the identical alert ledger.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Optional

from .alerts import AlertEngine, Transition, TransitionKind
from .errors import CanopyError
from .lora import UplinkNetwork, decode, encode, frame_tick
from .model import TICKS_PER_DAY, SensorKind
from .raster import RasterArchive, generate_snapshot, snapshot_due
from .readings import CHANNELS
from .scenario import FaultKind, Scenario
from .store import SeriesKey, TelemetryStore
from .simulate import FieldSimulator
from .tasks import TaskBoard

EventCallback = Callable[[dict], None]


def _device_label(device_id: int) -> str:
    return f"dev-{device_id:08x}"


def build_task_board(scenario: Scenario) -> TaskBoard:
    targets = ({t.tree_id for t in scenario.trees}
               | {z.zone_id for z in scenario.zones}
               | {_device_label(d.device_id) for d in scenario.devices})
    tree_zone = {t.tree_id: t.zone_id for t in scenario.trees}
    device_zone = {}
    for dev in scenario.devices:
        zone = scenario.zone_of_device(dev)
        device_zone[_device_label(dev.device_id)] = zone.zone_id if zone else None

    def zone_of(target: str) -> Optional[str]:
        if target in tree_zone:
            return tree_zone[target]
        if target in device_zone:
            return device_zone[target]
        return target if target in {z.zone_id for z in scenario.zones} else None

    return TaskBoard(target_exists=lambda t: t in targets, zone_of_target=zone_of)


class SimulationPipeline:
    """One scenario's live run: a single writer advancing the virtual clock."""

    def __init__(self, scenario: Scenario, on_event: Optional[EventCallback] = None):
        self.scenario = scenario
        self.sim = FieldSimulator(scenario)
        self.network = UplinkNetwork(scenario.gateways, scenario.seed,
                                     scenario.link.bitrate_bps,
                                     scenario.link.duty_budget_ms_per_hour)
        self.store = TelemetryStore(epoch=scenario.epoch_start)
        self.engine = AlertEngine(self.store, scenario.devices, scenario.trees,
                                  scenario.rules, epoch=scenario.epoch_start)
        self.tasks = build_task_board(scenario)
        self.raster = RasterArchive()
        self.trace_lines: list[str] = []
        self.on_event = on_event
        self._locations = {d.device_id: d.location for d in scenario.devices}

    @property
    def tick(self) -> int:
        return self.sim.clock.tick

    def _emit(self, event: dict) -> None:
        if self.on_event is not None:
            self.on_event(event)

    def _ingest(self, frame: bytes) -> None:
        reading = decode(frame, self.scenario.epoch_start)
        if self.store.append(reading) == "inserted":
            self.trace_lines.append(frame.hex())

    def _handle_transitions(self, transitions: list[Transition]) -> None:
        for tr in transitions:
            if tr.kind is TransitionKind.OPENED:
                alert = self.engine.get(tr.alert_id)
                if alert.suggested_task is not None:
                    self.tasks.ensure_task_for_alert(alert.alert_id, alert.suggested_task, tr.at)
            self._emit({"type": "alert-transition", **tr.to_dict()})

    def advance(self, n_ticks: int) -> None:
        """Run the full per-tick cycle n times."""
        if n_ticks < 0:
            raise CanopyError("cannot advance a negative number of ticks")
        for _ in range(n_ticks):
            tick = self.sim.clock.tick
            for frame, outcome in self.network.flush_pending(tick):
                if outcome.status == "delivered":
                    self._ingest(frame)
            batch = self.sim.advance(1)
            for reading in batch:
                frame = encode(reading, self.scenario.epoch_start)
                outcome = self.network.deliver(frame, self._locations[reading.device_id], tick)
                if outcome.status == "delivered":
                    self._ingest(frame)
            now = self.store.time_of(tick)
            self._handle_transitions(self.engine.run_rules(now))
            completed = self.sim.clock.tick
            if snapshot_due(completed, self.scenario.raster.interval_ticks):
                snapshot = generate_snapshot(self.scenario, completed, self.store.time_of(completed))
                grid = self.raster.add(snapshot)
                self._emit({"type": "snapshot", "snapshot_id": snapshot.snapshot_id,
                            "tick": completed, "masked_fraction": grid.masked_fraction})
            if completed % TICKS_PER_DAY == 0:
                self.store.enforce_retention(self.store.time_of(completed))
            self._emit({"type": "tick", "tick": completed})

    # -- digests and reconciliation ------------------------------------------------

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace_lines)

    def trace_digest(self) -> str:
        return hashlib.sha256(self.trace_text().encode()).hexdigest()

    def reconcile(self, n_ticks: int) -> list[dict]:
        """Exact per-device ledger: stored must equal ticks - gaps - lost - pending."""
        out = []
        for dev in sorted(self.scenario.devices, key=lambda d: d.device_id):
            gap_ticks = 0
            for f in self.scenario.faults:
                if f.kind is FaultKind.DATA_GAP and f.target_device == dev.device_id:
                    lo = max(0, f.start_tick)
                    hi = min(n_ticks, f.start_tick + f.duration_ticks)
                    gap_ticks += max(0, hi - lo)
            stats = self.network.stats.get(dev.device_id)
            lost = stats.lost if stats else 0
            pending = self.network.pending_count(dev.device_id)
            channel = CHANNELS[dev.kind][0]
            stored = self.store.point_count(SeriesKey(dev.device_id, dev.kind, channel))
            expected = n_ticks - gap_ticks - lost - pending
            out.append({
                "device_id": dev.device_id, "kind": dev.kind.value, "ticks": n_ticks,
                "gap_ticks": gap_ticks, "lost": lost, "pending": pending,
                "stored": stored, "expected": expected, "ok": stored == expected,
            })
        return out

    def run_report(self, n_ticks: int) -> dict:
        reconciliation = self.reconcile(n_ticks)
        return {
            "schema": "canopy/run-report/v1",
            "seed": self.scenario.seed,
            "ticks": n_ticks,
            "trace_digest": self.trace_digest(),
            "store_digest": self.store.digest(),
            "store_points": self.store.total_points(),
            "alerts_open": len(self.engine.alerts(open_only=True)),
            "alerts_total": len(self.engine.alerts()),
            "snapshots": len(self.raster.snapshots),
            "deferrals": sum(1 for e in self.network.log if e["event"] == "duty-cycle-deferral"),
            "reconciliation_ok": all(r["ok"] for r in reconciliation),
            "reconciliation": reconciliation,
        }


@dataclass
class ReplayResult:
    store: TelemetryStore
    engine: AlertEngine
    tasks: TaskBoard
    frames: int = 0
    duplicates: int = 0
    errors: list[str] = field(default_factory=list)


def replay_trace(scenario: Scenario, trace_text: str, n_ticks: int) -> ReplayResult:
    """Re-ingest a trace tick by tick, re-deriving flags, alerts, and tasks.

    Mirrors the live schedule exactly for runs without duty-cycle deferrals:
    ingest the tick's frames, evaluate rules, run daily retention.
    """
    store = TelemetryStore(epoch=scenario.epoch_start)
    engine = AlertEngine(store, scenario.devices, scenario.trees, scenario.rules,
                         epoch=scenario.epoch_start)
    tasks = build_task_board(scenario)
    result = ReplayResult(store, engine, tasks)

    frames: list[bytes] = []
    for lineno, line in enumerate(trace_text.split(), start=1):
        try:
            frames.append(bytes.fromhex(line))
        except ValueError as exc:
            result.errors.append(f"line {lineno}: not hex: {exc}")
    idx = 0
    for tick in range(n_ticks):
        while idx < len(frames) and frame_tick(frames[idx]) <= tick:
            reading = decode(frames[idx], scenario.epoch_start)
            if store.append(reading) == "inserted":
                result.frames += 1
            else:
                result.duplicates += 1
            idx += 1
        for tr in engine.run_rules(store.time_of(tick)):
            if tr.kind is TransitionKind.OPENED:
                alert = engine.get(tr.alert_id)
                if alert.suggested_task is not None:
                    tasks.ensure_task_for_alert(alert.alert_id, alert.suggested_task, tr.at)
        completed = tick + 1
        if completed % TICKS_PER_DAY == 0:
            store.enforce_retention(store.time_of(completed))
    return result


def run_headless(scenario: Scenario, n_ticks: int,
                 on_event: Optional[EventCallback] = None) -> SimulationPipeline:
    pipeline = SimulationPipeline(scenario, on_event=on_event)
    pipeline.advance(n_ticks)
    return pipeline
