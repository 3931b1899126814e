"""HTTP API over the live pipeline: sensors, series, alerts, tasks, zones,
imagery, weather, simulation control, and a line-delimited event stream.

Every response carries a top-level `schema` field; errors map to stable
codes (not-found, validation-failed, illegal-transition, demo-mode-disabled).
"""

from __future__ import annotations

import json
import queue
import threading
from datetime import datetime, timedelta, timezone
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, ConfigDict

from .alerts import AlertEvent
from .errors import CanopyError, DemoModeDisabled, NotFound, ValidationFailed
from .model import SensorKind
from .pipeline import SimulationPipeline, _device_label
from .raster import ZoneFileError, export_zone_file, import_zone_file, zonal_stats
from .scenario import FaultKind, FaultSpec
from .store import SeriesKey, UnknownSeries
from .tasks import TaskEvent, TaskKind, TaskSpec

API_SCHEMA_PREFIX = "canopy/api/v1"


class AppRuntime:
    """Shared state behind the endpoints; simulation advance is exclusive."""

    def __init__(self, pipeline: SimulationPipeline, demo_mode: bool = False):
        self.pipeline = pipeline
        self.demo_mode = demo_mode
        self.sim_lock = threading.Lock()
        self.subscribers: list[queue.Queue] = []
        self.subscribers_lock = threading.Lock()
        pipeline.on_event = self._fanout

    def _fanout(self, event: dict) -> None:
        with self.subscribers_lock:
            for q in self.subscribers:
                q.put(event)

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue()
        with self.subscribers_lock:
            self.subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self.subscribers_lock:
            if q in self.subscribers:
                self.subscribers.remove(q)


def _envelope(name: str, payload: dict) -> dict:
    return {"schema": f"{API_SCHEMA_PREFIX}/{name}", **payload}


def _parse_time(text: str) -> datetime:
    try:
        t = datetime.fromisoformat(text)
    except ValueError:
        raise ValidationFailed([f"bad timestamp {text!r}; expected ISO 8601"])
    return t if t.tzinfo else t.replace(tzinfo=timezone.utc)


def _error_response(code: str, message: str, status: int, details: Optional[dict] = None):
    return JSONResponse(status_code=status, content=_envelope(
        "error", {"code": code, "message": message, "details": details or {}}))


_STATUS_BY_CODE = {
    "not-found": 404,
    "unknown-series": 404,
    "unknown-target": 404,
    "validation-failed": 400,
    "illegal-transition": 409,
    "demo-mode-disabled": 403,
    "misaligned-timestamp": 400,
    "invalid-channel": 400,
    "invalid-kind": 400,
    "parse-error": 400,
    "invalid-geometry": 400,
    "empty-file": 400,
    "zone-outside-raster": 400,
}


# -- request bodies (unknown fields rejected, never dropped) -----------------------


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CreateTaskBody(_StrictModel):
    kind: str
    target: str
    note: str = ""


class TransitionBody(_StrictModel):
    event: str
    operator: Optional[str] = None


class AdvanceBody(_StrictModel):
    ticks: int


class InjectFaultBody(_StrictModel):
    kind: str
    target_device: int
    start_tick: int
    duration_ticks: int
    magnitude: float = 0.0


def _alert_dict(alert: AlertEvent) -> dict:
    return alert.to_dict()


def create_app(runtime: AppRuntime) -> FastAPI:
    app = FastAPI(title="canopy", docs_url=None, redoc_url=None)
    pipeline = runtime.pipeline
    scenario = pipeline.scenario
    store = pipeline.store

    @app.exception_handler(CanopyError)
    async def canopy_error_handler(_req: Request, exc: CanopyError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        details = {"violations": exc.violations} if isinstance(exc, ValidationFailed) else exc.details
        return _error_response(exc.code, exc.message if hasattr(exc, "message") else str(exc),
                               status, details)

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(_req: Request, exc: RequestValidationError):
        errors = [{"loc": list(map(str, e.get("loc", ()))), "msg": str(e.get("msg", "")),
                   "type": str(e.get("type", ""))} for e in exc.errors()]
        return _error_response("validation-failed", "request body failed validation", 400,
                               {"errors": errors})

    # -- read surfaces ------------------------------------------------------------

    @app.get("/api/health")
    def health():
        return _envelope("health", {"status": "ok", "tick": pipeline.tick,
                                    "demo_mode": runtime.demo_mode})

    @app.get("/api/scenario")
    def scenario_summary():
        return _envelope("scenario", {
            "seed": scenario.seed,
            "epoch_start": scenario.epoch_start.isoformat(),
            "tick": pipeline.tick,
            "now": store.time_of(pipeline.tick).isoformat(),
            "devices": len(scenario.devices),
            "trees": len(scenario.trees),
            "zones": len(scenario.zones),
            "gateways": len(scenario.gateways),
        })

    @app.get("/api/sensors")
    def sensors():
        items = [{
            "device_id": d.device_id,
            "label": _device_label(d.device_id),
            "kind": d.kind.value,
            "lat": d.location.lat,
            "lon": d.location.lon,
            "attached_tree": d.attached_tree,
        } for d in sorted(scenario.devices, key=lambda d: d.device_id)]
        return _envelope("sensor-list", {"count": len(items), "sensors": items})

    @app.get("/api/trees")
    def trees():
        health_index = pipeline.engine.health_index()
        items = [{
            "tree_id": t.tree_id, "species_code": t.species_code, "zone_id": t.zone_id,
            "lat": t.location.lat, "lon": t.location.lon,
            "planted_estimate": t.planted_estimate,
            "health_index": health_index.get(t.tree_id),
        } for t in scenario.trees]
        return _envelope("tree-list", {"count": len(items), "trees": items})

    @app.get("/api/zones")
    def zones():
        items = [{
            "zone_id": z.zone_id, "name": z.name, "source": z.source.value,
            "area_m2": round(z.area_m2(), 1),
            "boundary": [[p.lat, p.lon] for p in z.boundary],
        } for z in scenario.zones]
        return _envelope("zone-list", {"count": len(items), "zones": items})

    @app.get("/api/zones/export")
    def zones_export():
        return _envelope("zone-file", {"geojson": json.loads(export_zone_file(scenario.zones))})

    @app.post("/api/zones/import")
    async def zones_import(request: Request):
        body = await request.body()
        try:
            imported = import_zone_file(body)
        except ZoneFileError as exc:
            return _error_response(exc.code, str(exc), 400)
        existing = {z.zone_id for z in scenario.zones}
        added = [z for z in imported if z.zone_id not in existing]
        scenario.zones.extend(added)
        return _envelope("zone-import", {"imported": len(imported), "added": len(added)})

    @app.get("/api/series")
    def series(device_id: int, kind: str, channel: str,
               start: Optional[str] = None, end: Optional[str] = None,
               days: Optional[float] = None,
               agg: str = "raw", bucket_minutes: Optional[int] = None):
        try:
            sensor_kind = SensorKind(kind)
        except ValueError:
            raise ValidationFailed([f"unknown sensor kind {kind!r}"])
        key = SeriesKey(device_id, sensor_kind, channel)
        t1 = _parse_time(end) if end else store.time_of(pipeline.tick)
        if days is not None:
            if not (0 < days <= 90):
                raise ValidationFailed(["days must be in (0, 90]: history never exceeds retention"])
            t0 = t1 - timedelta(days=days)
        else:
            t0 = _parse_time(start) if start else t1 - timedelta(days=90)
        bucket = timedelta(minutes=bucket_minutes) if bucket_minutes else None
        points = store.query_range(key, t0, t1, agg=agg, bucket=bucket)
        return _envelope("series", {
            "device_id": device_id, "kind": kind, "channel": channel, "agg": agg,
            "points": [{"t": p.t.isoformat(), "value": p.value, "flag": p.flag} for p in points],
        })

    @app.get("/api/alerts")
    def alerts(status: Optional[str] = None):
        open_only = status == "open"
        items = [_alert_dict(a) for a in pipeline.engine.alerts(open_only=open_only)]
        if status == "acknowledged":
            items = [a for a in items if a["acknowledged"]]
        return _envelope("alert-list", {"count": len(items), "alerts": items})

    @app.post("/api/alerts/{alert_id}/ack")
    def ack_alert(alert_id: str):
        alert = pipeline.engine.ack(alert_id)
        return _envelope("alert", {"alert": _alert_dict(alert)})

    @app.get("/api/alerts/{alert_id}")
    def get_alert(alert_id: str):
        return _envelope("alert", {"alert": _alert_dict(pipeline.engine.get(alert_id))})

    # -- tasks -------------------------------------------------------------------

    @app.get("/api/tasks")
    def tasks(state: Optional[str] = None):
        from .tasks import TaskState
        state_filter = TaskState(state) if state else None
        items = [t.to_dict() for t in pipeline.tasks.tasks(state=state_filter)]
        return _envelope("task-list", {"count": len(items), "tasks": items})

    @app.post("/api/tasks")
    def create_task(body: CreateTaskBody):
        try:
            kind = TaskKind(body.kind)
        except ValueError:
            raise ValidationFailed([f"unknown task kind {body.kind!r}"])
        now = store.time_of(pipeline.tick)
        task = pipeline.tasks.create_task(TaskSpec(kind, body.target, body.note), now)
        return _envelope("task", {"task": task.to_dict()})

    @app.post("/api/tasks/{task_id}/transition")
    def transition_task(task_id: str, body: TransitionBody):
        try:
            event = TaskEvent(body.event)
        except ValueError:
            raise ValidationFailed([f"unknown task event {body.event!r}"])
        now = store.time_of(pipeline.tick)
        task = pipeline.tasks.transition(task_id, event, now, operator=body.operator)
        return _envelope("task", {"task": task.to_dict()})

    @app.get("/api/tasks/report")
    def task_report(zone_id: Optional[str] = None,
                    start: Optional[str] = None, end: Optional[str] = None):
        t1 = _parse_time(end) if end else store.time_of(pipeline.tick)
        t0 = _parse_time(start) if start else scenario.epoch_start
        return _envelope("task-report", {"report": pipeline.tasks.report(zone_id, t0, t1)})

    # -- imagery --------------------------------------------------------------------

    @app.get("/api/ndvi/snapshots")
    def ndvi_snapshots():
        items = []
        for snap in pipeline.raster.snapshots:
            grid = pipeline.raster.grids[snap.snapshot_id]
            items.append({
                "snapshot_id": snap.snapshot_id, "tick": snap.acquired_tick,
                "acquired_at": snap.acquired_at.isoformat(),
                "masked_fraction": grid.masked_fraction,
                "width": snap.width, "height": snap.height,
            })
        return _envelope("snapshot-list", {"count": len(items), "snapshots": items})

    @app.get("/api/ndvi/snapshots/{snapshot_id}")
    def ndvi_grid(snapshot_id: str):
        grid = pipeline.raster.get(snapshot_id)
        values = [[None if grid.mask[r, c] else round(float(grid.values[r, c]), 4)
                   for c in range(grid.values.shape[1])]
                  for r in range(grid.values.shape[0])]
        return _envelope("ndvi-grid", {
            "snapshot_id": snapshot_id,
            "acquired_at": grid.acquired_at.isoformat(),
            "cell_size_m": grid.cell_size_m,
            "origin": [grid.origin.lat, grid.origin.lon],
            "masked_fraction": grid.masked_fraction,
            "values": values,
        })

    @app.get("/api/ndvi/snapshots/{snapshot_id}/zones/{zone_id}")
    def ndvi_zonal(snapshot_id: str, zone_id: str):
        grid = pipeline.raster.get(snapshot_id)
        zone = next((z for z in scenario.zones if z.zone_id == zone_id), None)
        if zone is None:
            raise NotFound(f"no such zone: {zone_id}")
        return _envelope("zonal-stats", {"stats": zonal_stats(grid, zone).to_dict()})

    # -- weather panel -----------------------------------------------------------------

    @app.get("/api/weather/latest")
    def weather_latest():
        stations = []
        for dev in scenario.devices_of_kind(SensorKind.WEATHER_STATION):
            channels = {}
            for channel in ("temp_dry_c", "rh_pct", "rain_mm_30min", "wind_speed_ms", "solar_wm2"):
                point = store.latest(SeriesKey(dev.device_id, dev.kind, channel))
                channels[channel] = None if point is None else {
                    "t": point.t.isoformat(), "value": point.value, "flag": point.flag}
            stations.append({"device_id": dev.device_id, "label": _device_label(dev.device_id),
                             "lat": dev.location.lat, "lon": dev.location.lon,
                             "channels": channels})
        return _envelope("weather-latest", {"stations": stations})

    # -- simulation control (demo mode only) ----------------------------------------------

    def _require_demo():
        if not runtime.demo_mode:
            raise DemoModeDisabled("simulation control requires demo mode")

    @app.post("/api/sim/advance")
    def sim_advance(body: AdvanceBody):
        _require_demo()
        if body.ticks < 0 or body.ticks > 10_000:
            raise ValidationFailed(["ticks must be in [0, 10000]"])
        with runtime.sim_lock:
            pipeline.advance(body.ticks)
        return _envelope("sim-advance", {"tick": pipeline.tick})

    @app.post("/api/sim/fault")
    def sim_fault(body: InjectFaultBody):
        _require_demo()
        try:
            kind = FaultKind(body.kind)
        except ValueError:
            raise ValidationFailed([f"unknown fault kind {body.kind!r}"])
        fault = FaultSpec(kind, body.target_device, body.start_tick,
                          body.duration_ticks, body.magnitude)
        with runtime.sim_lock:
            pipeline.sim.add_fault(fault)
        return _envelope("sim-fault", {"faults": len(scenario.faults)})

    # -- event stream -----------------------------------------------------------------------

    @app.get("/api/events")
    def events(limit: int = 0, timeout_s: float = 30.0):
        """Server-sent line-delimited events; closes after `limit` events if set."""
        q = runtime.subscribe()

        def stream():
            sent = 0
            try:
                while True:
                    try:
                        event = q.get(timeout=timeout_s)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    yield f"data: {json.dumps(event, sort_keys=True)}\n\n"
                    sent += 1
                    if limit and sent >= limit:
                        return
            finally:
                runtime.unsubscribe(q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def serve(pipeline: SimulationPipeline, host: str = "127.0.0.1", port: int = 8800,
          demo_mode: bool = False, static_dir: Optional[str] = None) -> None:
    import uvicorn

    runtime = AppRuntime(pipeline, demo_mode=demo_mode)
    app = create_app(runtime)
    if static_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="dashboard")
    uvicorn.run(app, host=host, port=port, log_level="warning")
