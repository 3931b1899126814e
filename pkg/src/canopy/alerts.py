"""Rule-based alerting with episode semantics.

One contiguous anomaly is one alert: a rule opens after its open condition
holds for the configured sustain count, closes after the close condition
holds equally long, and missing data pauses evaluation without closing
anything. Evaluation is a pure fold over the stored series, so re-running
at the same instant emits nothing new.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left, insort
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from .errors import CanopyError, NotFound, ValidationFailed
from .model import TICKS_PER_DAY, DEFAULT_EPOCH, SensorDevice, SensorKind, TreeAsset
from .store import SeriesKey, TelemetryStore
from .tasks import TaskKind, TaskSpec

TickValue = tuple[int, float]


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True, slots=True)
class SalinityRuleConfig:
    threshold_dsm: float = 0.8
    sustain_ticks: int = 3


@dataclass(frozen=True, slots=True)
class RainObstructionRuleConfig:
    window_h: int = 24
    min_neighbor_rain_mm: float = 5.0
    min_neighbors: int = 2
    max_neighbor_distance_m: float = 2000.0

    @property
    def window_ticks(self) -> int:
        return self.window_h * 2


@dataclass(frozen=True, slots=True)
class BatteryRuleConfig:
    slope_threshold_pct_per_day: float = -2.0
    window_days: int = 7


@dataclass(frozen=True, slots=True)
class TiltRuleConfig:
    delta_deg: float = 2.0
    baseline_window_ticks: int = 336
    sustain_ticks: int = 3


@dataclass(frozen=True, slots=True)
class SapHealthRuleConfig:
    z_threshold: float = -2.5
    baseline_days: int = 14
    sustain_days: int = 2
    daytime_start_h: float = 9.0
    daytime_end_h: float = 17.0
    # relative floor on the baseline spread keeps z finite on near-constant series
    sigma_floor_frac: float = 0.05


@dataclass(frozen=True, slots=True)
class AlertRuleConfig:
    salinity: SalinityRuleConfig = field(default_factory=SalinityRuleConfig)
    rain_obstruction: RainObstructionRuleConfig = field(default_factory=RainObstructionRuleConfig)
    battery: BatteryRuleConfig = field(default_factory=BatteryRuleConfig)
    tilt: TiltRuleConfig = field(default_factory=TiltRuleConfig)
    sap_health: SapHealthRuleConfig = field(default_factory=SapHealthRuleConfig)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        v: list[str] = []
        numbers = [
            self.salinity.threshold_dsm, self.rain_obstruction.min_neighbor_rain_mm,
            self.rain_obstruction.max_neighbor_distance_m, self.battery.slope_threshold_pct_per_day,
            self.tilt.delta_deg, self.sap_health.z_threshold,
        ]
        if not all(math.isfinite(x) for x in numbers):
            v.append("all thresholds must be finite")
        if self.salinity.sustain_ticks < 1 or self.tilt.sustain_ticks < 1 or self.sap_health.sustain_days < 1:
            v.append("sustain counts must be >= 1")
        if self.rain_obstruction.window_h < 1 or self.tilt.baseline_window_ticks < 1:
            v.append("windows must be >= 1")
        if self.battery.window_days < 2:
            v.append("battery window_days must be >= 2 (slope needs two points)")
        if self.rain_obstruction.min_neighbors < 1:
            v.append("min_neighbors must be >= 1")
        if v:
            raise ValidationFailed(v, "alert rule config invalid: " + "; ".join(v))

    def to_dict(self) -> dict:
        return {
            "salinity": {"threshold_dsm": self.salinity.threshold_dsm,
                         "sustain_ticks": self.salinity.sustain_ticks},
            "rain_obstruction": {
                "window_h": self.rain_obstruction.window_h,
                "min_neighbor_rain_mm": self.rain_obstruction.min_neighbor_rain_mm,
                "min_neighbors": self.rain_obstruction.min_neighbors,
                "max_neighbor_distance_m": self.rain_obstruction.max_neighbor_distance_m},
            "battery": {"slope_threshold_pct_per_day": self.battery.slope_threshold_pct_per_day,
                        "window_days": self.battery.window_days},
            "tilt": {"delta_deg": self.tilt.delta_deg,
                     "baseline_window_ticks": self.tilt.baseline_window_ticks,
                     "sustain_ticks": self.tilt.sustain_ticks},
            "sap_health": {"z_threshold": self.sap_health.z_threshold,
                           "baseline_days": self.sap_health.baseline_days,
                           "sustain_days": self.sap_health.sustain_days,
                           "daytime_start_h": self.sap_health.daytime_start_h,
                           "daytime_end_h": self.sap_health.daytime_end_h,
                           "sigma_floor_frac": self.sap_health.sigma_floor_frac},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AlertRuleConfig":
        return cls(
            salinity=SalinityRuleConfig(**data.get("salinity", {})),
            rain_obstruction=RainObstructionRuleConfig(**data.get("rain_obstruction", {})),
            battery=BatteryRuleConfig(**data.get("battery", {})),
            tilt=TiltRuleConfig(**data.get("tilt", {})),
            sap_health=SapHealthRuleConfig(**data.get("sap_health", {})),
        )


# -- alert records -------------------------------------------------------------


class AlertRule(str, Enum):
    SALINITY_ANOMALY = "salinity-anomaly"
    RAIN_GAUGE_OBSTRUCTION = "rain-gauge-obstruction"
    BATTERY_DEFICIT = "battery-deficit"
    TILT_ANOMALY = "tilt-anomaly"
    SAP_HEALTH = "sap-health"


class Severity(str, Enum):
    WARNING = "warning"
    CRITICAL = "critical"


@dataclass
class AlertEvent:
    alert_id: str
    rule: AlertRule
    device_id: int
    opened_tick: int
    opened_at: datetime
    severity: Severity = Severity.WARNING
    tree_id: Optional[str] = None
    evidence: dict = field(default_factory=dict)
    suggested_task: Optional[TaskSpec] = None
    remediation: str = ""
    closed_tick: Optional[int] = None
    closed_at: Optional[datetime] = None
    acknowledged: bool = False

    @property
    def is_open(self) -> bool:
        return self.closed_tick is None

    def to_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "rule": self.rule.value,
            "device_id": self.device_id,
            "tree_id": self.tree_id,
            "opened_tick": self.opened_tick,
            "opened_at": self.opened_at.isoformat(),
            "closed_tick": self.closed_tick,
            "closed_at": self.closed_at.isoformat() if self.closed_at else None,
            "severity": self.severity.value,
            "evidence": self.evidence,
            "suggested_task": {
                "kind": self.suggested_task.kind.value,
                "target": self.suggested_task.target,
                "note": self.suggested_task.note,
            } if self.suggested_task else None,
            "remediation": self.remediation,
            "acknowledged": self.acknowledged,
        }


class TransitionKind(str, Enum):
    OPENED = "opened"
    CLOSED = "closed"
    SEVERITY_CHANGED = "severity-changed"


@dataclass(frozen=True, slots=True)
class Transition:
    kind: TransitionKind
    alert_id: str
    rule: AlertRule
    device_id: int
    tick: int
    at: datetime
    severity: Severity

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "alert_id": self.alert_id, "rule": self.rule.value,
                "device_id": self.device_id, "tick": self.tick, "at": self.at.isoformat(),
                "severity": self.severity.value}


@dataclass
class Episode:
    """One maximal anomaly run as seen by a batch evaluation."""

    open_tick: int
    close_tick: Optional[int] = None
    severity: Severity = Severity.WARNING
    escalated_tick: Optional[int] = None
    evidence: dict = field(default_factory=dict)


# -- incremental trackers --------------------------------------------------------


class ThresholdEpisodeTracker:
    """Open after `sustain` consecutive values above threshold, close symmetrically."""

    __slots__ = ("threshold", "sustain", "run_above", "run_below", "is_open")

    def __init__(self, threshold: float, sustain: int):
        self.threshold = threshold
        self.sustain = sustain
        self.run_above = 0
        self.run_below = 0
        self.is_open = False

    def feed(self, value: float) -> Optional[str]:
        if value > self.threshold:
            self.run_above += 1
            self.run_below = 0
            if not self.is_open and self.run_above >= self.sustain:
                self.is_open = True
                return "open"
        else:
            self.run_below += 1
            self.run_above = 0
            if self.is_open and self.run_below >= self.sustain:
                self.is_open = False
                return "close"
        return None


class TiltBaselineTracker:
    """Excess over a rolling median of strictly prior ticks, with sustain hysteresis."""

    def __init__(self, cfg: TiltRuleConfig):
        self.cfg = cfg
        self._window: deque[float] = deque()
        self._sorted: list[float] = []
        self._episode = ThresholdEpisodeTracker(cfg.delta_deg, cfg.sustain_ticks)

    def _median(self) -> float:
        n = len(self._sorted)
        mid = n // 2
        if n % 2:
            return self._sorted[mid]
        return (self._sorted[mid - 1] + self._sorted[mid]) / 2.0

    def feed(self, value: float) -> tuple[Optional[str], Optional[float]]:
        event = None
        excess = None
        if len(self._window) >= self.cfg.baseline_window_ticks:
            excess = value - self._median()
            event = self._episode.feed(excess)
        self._window.append(value)
        insort(self._sorted, value)
        if len(self._window) > self.cfg.baseline_window_ticks:
            old = self._window.popleft()
            del self._sorted[bisect_left(self._sorted, old)]
        return event, excess


def least_squares_slope(ys: Sequence[float]) -> float:
    """Slope of y over x = 0, 1, ..., n-1."""
    n = len(ys)
    x_mean = (n - 1) / 2.0
    y_mean = sum(ys) / n
    num = sum((i - x_mean) * (y - y_mean) for i, y in enumerate(ys))
    den = sum((i - x_mean) ** 2 for i in range(n))
    return num / den


class DailySlopeTracker:
    """Least-squares slope of daily means over a rolling day window.

    Days finalize when a later day's first point arrives; a trailing partial
    day is never evaluated.
    """

    def __init__(self, cfg: BatteryRuleConfig):
        self.cfg = cfg
        self._day: Optional[int] = None
        self._sum = 0.0
        self._count = 0
        self._means: deque[float] = deque(maxlen=cfg.window_days)
        self.is_open = False

    def feed(self, tick: int, value: float) -> list[tuple[int, str, float]]:
        day = tick // TICKS_PER_DAY
        events: list[tuple[int, str, float]] = []
        if self._day is not None and day != self._day:
            events.extend(self._finalize())
            self._day = day
        elif self._day is None:
            self._day = day
        self._sum += value
        self._count += 1
        return events

    def _finalize(self) -> list[tuple[int, str, float]]:
        events: list[tuple[int, str, float]] = []
        if self._count:
            self._means.append(self._sum / self._count)
            boundary_tick = (self._day + 1) * TICKS_PER_DAY
            if len(self._means) == self.cfg.window_days:
                slope = least_squares_slope(list(self._means))
                if not self.is_open and slope < self.cfg.slope_threshold_pct_per_day:
                    self.is_open = True
                    events.append((boundary_tick, "open", slope))
                elif self.is_open and slope >= self.cfg.slope_threshold_pct_per_day:
                    self.is_open = False
                    events.append((boundary_tick, "close", slope))
        self._sum = 0.0
        self._count = 0
        return events


class SapHealthTracker:
    """Daily daytime-mean z-score against the same device's trailing baseline."""

    def __init__(self, cfg: SapHealthRuleConfig):
        self.cfg = cfg
        self._day: Optional[int] = None
        self._sum = 0.0
        self._count = 0
        self._baseline: deque[float] = deque(maxlen=cfg.baseline_days)
        self._low_days = 0
        self._high_days = 0
        self.is_open = False
        self.last_z: Optional[float] = None

    def _daytime(self, tick: int) -> bool:
        hour = (tick % TICKS_PER_DAY) / 2.0
        return self.cfg.daytime_start_h <= hour < self.cfg.daytime_end_h

    def feed(self, tick: int, value: float) -> list[tuple[int, str, float]]:
        day = tick // TICKS_PER_DAY
        events: list[tuple[int, str, float]] = []
        if self._day is not None and day != self._day:
            events.extend(self._finalize())
            self._day = day
        elif self._day is None:
            self._day = day
        if self._daytime(tick):
            self._sum += value
            self._count += 1
        return events

    def _finalize(self) -> list[tuple[int, str, float]]:
        events: list[tuple[int, str, float]] = []
        if self._count:  # nighttime-only days defer evaluation entirely
            mean = self._sum / self._count
            boundary_tick = (self._day + 1) * TICKS_PER_DAY
            if len(self._baseline) == self.cfg.baseline_days:
                mu = sum(self._baseline) / len(self._baseline)
                var = sum((m - mu) ** 2 for m in self._baseline) / len(self._baseline)
                sigma = max(math.sqrt(var), self.cfg.sigma_floor_frac * abs(mu), 1e-9)
                z = (mean - mu) / sigma
                self.last_z = z
                if z < self.cfg.z_threshold:
                    self._low_days += 1
                    self._high_days = 0
                    if not self.is_open and self._low_days >= self.cfg.sustain_days:
                        self.is_open = True
                        events.append((boundary_tick, "open", z))
                else:
                    self._high_days += 1
                    self._low_days = 0
                    if self.is_open and self._high_days >= self.cfg.sustain_days:
                        self.is_open = False
                        events.append((boundary_tick, "close", z))
            self._baseline.append(mean)
        self._sum = 0.0
        self._count = 0
        return events


class RainObstructionMonitor:
    """Cross-station discrepancy check over a rolling 24 h rain window.

    Opens when a station's window sums to zero while enough in-range
    neighbors report meaningful rain; closes when the station itself
    reports rain again. Stations with too few neighbors are skipped
    with a diagnostic, never alerted.
    """

    def __init__(self, station_ids: Sequence[int], neighbor_map: Mapping[int, Sequence[int]],
                 cfg: RainObstructionRuleConfig):
        self.cfg = cfg
        self.station_ids = list(station_ids)
        self.neighbor_map = {sid: list(neighbor_map.get(sid, ())) for sid in station_ids}
        self._windows: dict[int, deque[tuple[int, float]]] = {sid: deque() for sid in station_ids}
        self._sums: dict[int, float] = {sid: 0.0 for sid in station_ids}
        self._first_tick: dict[int, Optional[int]] = {sid: None for sid in station_ids}
        self.open_stations: set[int] = set()
        self.diagnostics: list[dict] = []
        self._skip_logged: set[int] = set()

    def _evict(self, sid: int, tick: int) -> None:
        window = self._windows[sid]
        horizon = tick - self.cfg.window_ticks
        while window and window[0][0] <= horizon:
            _, old = window.popleft()
            self._sums[sid] -= old

    def feed_tick(self, tick: int, values: Mapping[int, Optional[float]]) -> list[tuple[int, str, dict]]:
        for sid in self.station_ids:
            v = values.get(sid)
            if v is not None:
                if self._first_tick[sid] is None:
                    self._first_tick[sid] = tick
                self._windows[sid].append((tick, v))
                self._sums[sid] += v
            self._evict(sid, tick)

        events: list[tuple[int, str, dict]] = []
        for sid in self.station_ids:
            if values.get(sid) is None:
                continue  # no fresh data: pause, never close on silence
            neighbors = self.neighbor_map[sid]
            if len(neighbors) < self.cfg.min_neighbors:
                if sid not in self._skip_logged:
                    self._skip_logged.add(sid)
                    self.diagnostics.append({
                        "tick": tick, "station": sid, "reason": "insufficient-neighbors",
                        "neighbors_in_range": len(neighbors)})
                continue
            first = self._first_tick[sid]
            if first is None or tick - first + 1 < self.cfg.window_ticks:
                continue  # window not yet spanned
            if len(self._windows[sid]) < self.cfg.window_ticks // 2:
                continue  # too thin to call zero rain
            own = self._sums[sid]
            if sid not in self.open_stations:
                wet = [n for n in neighbors if self._sums[n] >= self.cfg.min_neighbor_rain_mm]
                if own <= 1e-9 and len(wet) >= self.cfg.min_neighbors:
                    self.open_stations.add(sid)
                    events.append((sid, "open", {
                        "own_window_mm": own,
                        "neighbor_window_mm": {str(n): round(self._sums[n], 3) for n in neighbors},
                        "window_start_tick": tick - self.cfg.window_ticks + 1}))
            else:
                if own > 1e-9:
                    self.open_stations.discard(sid)
                    events.append((sid, "close", {"own_window_mm": round(own, 3)}))
        return events


# -- batch evaluation (series in, episodes out) -----------------------------------


def eval_salinity(series: Iterable[TickValue], cfg: SalinityRuleConfig) -> list[Episode]:
    """Episodes of sustained salinity above threshold."""
    tracker = ThresholdEpisodeTracker(cfg.threshold_dsm, cfg.sustain_ticks)
    episodes: list[Episode] = []
    for tick, value in series:
        event = tracker.feed(value)
        if event == "open":
            episodes.append(Episode(open_tick=tick, evidence={"value": value, "threshold": cfg.threshold_dsm}))
        elif event == "close":
            episodes[-1].close_tick = tick
    return episodes


def eval_tilt(series: Iterable[TickValue], cfg: TiltRuleConfig) -> list[Episode]:
    """Episodes of sustained excess over the rolling-median baseline."""
    tracker = TiltBaselineTracker(cfg)
    episodes: list[Episode] = []
    for tick, value in series:
        event, excess = tracker.feed(value)
        if event == "open":
            severity = Severity.CRITICAL if excess > 2 * cfg.delta_deg else Severity.WARNING
            episodes.append(Episode(open_tick=tick, severity=severity,
                                    evidence={"excess_deg": excess, "delta_deg": cfg.delta_deg}))
        elif event == "close":
            episodes[-1].close_tick = tick
        elif (tracker._episode.is_open and episodes and episodes[-1].close_tick is None
              and episodes[-1].severity is Severity.WARNING
              and excess is not None and excess > 2 * cfg.delta_deg):
            episodes[-1].severity = Severity.CRITICAL
            episodes[-1].escalated_tick = tick
    return episodes


def eval_battery_deficit(series: Iterable[TickValue], cfg: BatteryRuleConfig) -> list[Episode]:
    """Episodes where the daily-mean charge slope drops below the threshold."""
    tracker = DailySlopeTracker(cfg)
    episodes: list[Episode] = []
    for tick, value in series:
        for ev_tick, event, slope in tracker.feed(tick, value):
            if event == "open":
                episodes.append(Episode(open_tick=ev_tick,
                                        evidence={"slope_pct_per_day": slope,
                                                  "threshold": cfg.slope_threshold_pct_per_day}))
            else:
                episodes[-1].close_tick = ev_tick
    return episodes


def eval_sap_health(series: Iterable[TickValue],
                    cfg: SapHealthRuleConfig) -> tuple[Optional[float], list[Episode]]:
    """(latest health index, episodes) for one device's sap-flow series."""
    tracker = SapHealthTracker(cfg)
    episodes: list[Episode] = []
    for tick, value in series:
        for ev_tick, event, z in tracker.feed(tick, value):
            if event == "open":
                episodes.append(Episode(open_tick=ev_tick,
                                        evidence={"z": z, "threshold": cfg.z_threshold}))
            else:
                episodes[-1].close_tick = ev_tick
    return tracker.last_z, episodes


def eval_rain_obstruction(
    station_series: Iterable[TickValue],
    neighbor_series: Mapping[int, Iterable[TickValue]],
    cfg: RainObstructionRuleConfig,
    station_id: int = 0,
) -> tuple[list[Episode], list[dict]]:
    """(episodes, diagnostics) for one station against its in-range neighbors."""
    neighbors = {nid: dict(s) for nid, s in neighbor_series.items()}
    own = dict(station_series)
    ids = [station_id] + sorted(neighbors)
    monitor = RainObstructionMonitor(ids, {station_id: sorted(neighbors)}, cfg)
    ticks = sorted(set(own) | {t for s in neighbors.values() for t in s})
    episodes: list[Episode] = []
    for tick in ticks:
        values = {station_id: own.get(tick)}
        for nid, s in neighbors.items():
            values[nid] = s.get(tick)
        for sid, event, evidence in monitor.feed_tick(tick, values):
            if sid != station_id:
                continue
            if event == "open":
                episodes.append(Episode(open_tick=tick, evidence=evidence))
            else:
                episodes[-1].close_tick = tick
    return episodes, [d for d in monitor.diagnostics if d["station"] == station_id]


# -- live engine --------------------------------------------------------------------


def _device_label(device_id: int) -> str:
    return f"dev-{device_id:08x}"


class AlertEngine:
    """Evaluates all rules per device per tick against the store, emitting transitions."""

    def __init__(self, store: TelemetryStore, devices: Sequence[SensorDevice],
                 trees: Sequence[TreeAsset], cfg: AlertRuleConfig,
                 epoch: datetime = DEFAULT_EPOCH):
        self.store = store
        self.cfg = cfg
        self.epoch = epoch
        self._tree_of = {d.device_id: d.attached_tree for d in devices}
        self._soil = sorted(d.device_id for d in devices if d.kind is SensorKind.SOIL_PROBE)
        self._talkers = sorted(d.device_id for d in devices if d.kind is SensorKind.TREE_TALKER)
        stations = sorted((d for d in devices if d.kind is SensorKind.WEATHER_STATION),
                          key=lambda d: d.device_id)
        neighbor_map: dict[int, list[int]] = {}
        for s in stations:
            neighbor_map[s.device_id] = [
                o.device_id for o in stations
                if o.device_id != s.device_id
                and s.location.distance_m(o.location) <= cfg.rain_obstruction.max_neighbor_distance_m
            ]
        self._rain = RainObstructionMonitor([s.device_id for s in stations], neighbor_map,
                                            cfg.rain_obstruction)
        self._salinity = {d: ThresholdEpisodeTracker(cfg.salinity.threshold_dsm, cfg.salinity.sustain_ticks)
                          for d in self._soil}
        self._tilt = {d: TiltBaselineTracker(cfg.tilt) for d in self._talkers}
        self._battery = {d: DailySlopeTracker(cfg.battery) for d in self._talkers}
        self._sap = {d: SapHealthTracker(cfg.sap_health) for d in self._talkers}
        self._last_tick = -1
        self._open: dict[tuple[AlertRule, int], AlertEvent] = {}
        self._alerts: dict[str, AlertEvent] = {}

    # -- public surface ----------------------------------------------------------

    def run_rules(self, now: datetime) -> list[Transition]:
        """Process every tick up to `now` exactly once; idempotent per tick."""
        now_tick = int((now - self.epoch).total_seconds() // (30 * 60))
        transitions: list[Transition] = []
        for tick in range(self._last_tick + 1, now_tick + 1):
            transitions.extend(self._step(tick))
        self._last_tick = max(self._last_tick, now_tick)
        return transitions

    def alerts(self, open_only: bool = False) -> list[AlertEvent]:
        out = [a for a in self._alerts.values() if a.is_open or not open_only]
        return sorted(out, key=lambda a: (a.opened_tick, a.rule.value, a.device_id))

    def get(self, alert_id: str) -> AlertEvent:
        alert = self._alerts.get(alert_id)
        if alert is None:
            raise NotFound(f"no such alert: {alert_id}")
        return alert

    def ack(self, alert_id: str) -> AlertEvent:
        alert = self.get(alert_id)
        alert.acknowledged = True
        return alert

    def health_index(self) -> dict[str, Optional[float]]:
        """Latest sap-health z per monitored tree; None while undefined."""
        out: dict[str, Optional[float]] = {}
        for device_id, tracker in self._sap.items():
            tree_id = self._tree_of.get(device_id)
            if tree_id:
                out[tree_id] = tracker.last_z
        return out

    @property
    def diagnostics(self) -> list[dict]:
        return self._rain.diagnostics

    def export_jsonl(self) -> str:
        return "".join(json.dumps(a.to_dict(), sort_keys=True) + "\n" for a in self.alerts())

    # -- internals ------------------------------------------------------------------

    def _value_at(self, device_id: int, kind: SensorKind, channel: str, tick: int) -> Optional[float]:
        return self.store.value_at(SeriesKey(device_id, kind, channel), tick)

    def _step(self, tick: int) -> list[Transition]:
        at = self.store.time_of(tick)
        transitions: list[Transition] = []

        for device_id in self._soil:
            value = self._value_at(device_id, SensorKind.SOIL_PROBE, "salinity_dsm", tick)
            if value is None:
                continue
            event = self._salinity[device_id].feed(value)
            if event == "open":
                transitions.append(self._open_alert(
                    AlertRule.SALINITY_ANOMALY, device_id, tick, at,
                    evidence={"salinity_dsm": round(value, 3),
                              "threshold_dsm": self.cfg.salinity.threshold_dsm},
                    remediation="corrective action: investigate waterlogging and drainage at the probe site",
                ))
            elif event == "close":
                transitions.append(self._close_alert(AlertRule.SALINITY_ANOMALY, device_id, tick, at))

        rain_values = {
            sid: self._value_at(sid, SensorKind.WEATHER_STATION, "rain_mm_30min", tick)
            for sid in self._rain.station_ids
        }
        for sid, event, evidence in self._rain.feed_tick(tick, rain_values):
            if event == "open":
                transitions.append(self._open_alert(
                    AlertRule.RAIN_GAUGE_OBSTRUCTION, sid, tick, at, evidence=evidence,
                    suggested_task=TaskSpec(TaskKind.INSPECTION, _device_label(sid),
                                            "reposition rain gauge; clear foliage obstruction"),
                    remediation="sensor repositioning inspection",
                ))
                start = self.store.time_of(evidence["window_start_tick"])
                self.store.mark_suspect(
                    SeriesKey(sid, SensorKind.WEATHER_STATION, "rain_mm_30min"), start, at)
            elif event == "close":
                transitions.append(self._close_alert(AlertRule.RAIN_GAUGE_OBSTRUCTION, sid, tick, at))
        for sid in self._rain.open_stations:
            if rain_values.get(sid) is not None:
                self.store.mark_suspect(
                    SeriesKey(sid, SensorKind.WEATHER_STATION, "rain_mm_30min"), at, at)

        for device_id in self._talkers:
            soc = self._value_at(device_id, SensorKind.TREE_TALKER, "battery_soc_pct", tick)
            if soc is not None:
                for ev_tick, event, slope in self._battery[device_id].feed(tick, soc):
                    ev_at = self.store.time_of(ev_tick)
                    if event == "open":
                        transitions.append(self._open_alert(
                            AlertRule.BATTERY_DEFICIT, device_id, ev_tick, ev_at,
                            evidence={"slope_pct_per_day": round(slope, 3),
                                      "threshold": self.cfg.battery.slope_threshold_pct_per_day},
                            suggested_task=TaskSpec(TaskKind.INSPECTION, _device_label(device_id),
                                                    "reposition solar panel for better exposure"),
                            remediation="solar panel repositioning inspection",
                        ))
                    else:
                        transitions.append(self._close_alert(AlertRule.BATTERY_DEFICIT, device_id, ev_tick, ev_at))

            tilt = self._value_at(device_id, SensorKind.TREE_TALKER, "tilt_deg", tick)
            if tilt is not None:
                event, excess = self._tilt[device_id].feed(tilt)
                key = (AlertRule.TILT_ANOMALY, device_id)
                if event == "open":
                    severity = (Severity.CRITICAL if excess > 2 * self.cfg.tilt.delta_deg
                                else Severity.WARNING)
                    tree_id = self._tree_of.get(device_id)
                    transitions.append(self._open_alert(
                        AlertRule.TILT_ANOMALY, device_id, tick, at, severity=severity,
                        evidence={"excess_deg": round(excess, 3), "delta_deg": self.cfg.tilt.delta_deg},
                        suggested_task=TaskSpec(TaskKind.PRUNING, tree_id or _device_label(device_id),
                                                "stability pruning after abnormal movement"),
                        remediation="pruning",
                    ))
                elif event == "close":
                    transitions.append(self._close_alert(AlertRule.TILT_ANOMALY, device_id, tick, at))
                elif (key in self._open and excess is not None
                      and self._open[key].severity is Severity.WARNING
                      and excess > 2 * self.cfg.tilt.delta_deg):
                    alert = self._open[key]
                    alert.severity = Severity.CRITICAL
                    alert.evidence["escalated_excess_deg"] = round(excess, 3)
                    transitions.append(Transition(TransitionKind.SEVERITY_CHANGED, alert.alert_id,
                                                  alert.rule, device_id, tick, at, alert.severity))

            sap = self._value_at(device_id, SensorKind.TREE_TALKER, "sap_flow_lh", tick)
            if sap is not None:
                for ev_tick, event, z in self._sap[device_id].feed(tick, sap):
                    ev_at = self.store.time_of(ev_tick)
                    tree_id = self._tree_of.get(device_id)
                    if event == "open":
                        transitions.append(self._open_alert(
                            AlertRule.SAP_HEALTH, device_id, ev_tick, ev_at,
                            evidence={"z": round(z, 3), "threshold": self.cfg.sap_health.z_threshold},
                            suggested_task=TaskSpec(TaskKind.INSPECTION, tree_id or _device_label(device_id),
                                                    "inspect tree: sustained physiological decline"),
                            remediation="physiological inspection",
                        ))
                    else:
                        transitions.append(self._close_alert(AlertRule.SAP_HEALTH, device_id, ev_tick, ev_at))

        return transitions

    def _open_alert(self, rule: AlertRule, device_id: int, tick: int, at: datetime,
                    evidence: Optional[dict] = None, severity: Severity = Severity.WARNING,
                    suggested_task: Optional[TaskSpec] = None, remediation: str = "") -> Transition:
        key = (rule, device_id)
        if key in self._open:
            raise CanopyError(f"{rule.value} already open for device {device_id}")
        alert = AlertEvent(
            alert_id=f"{rule.value}:{device_id:08x}:{tick}",
            rule=rule, device_id=device_id, opened_tick=tick, opened_at=at,
            severity=severity, tree_id=self._tree_of.get(device_id),
            evidence=evidence or {}, suggested_task=suggested_task, remediation=remediation,
        )
        self._open[key] = alert
        self._alerts[alert.alert_id] = alert
        return Transition(TransitionKind.OPENED, alert.alert_id, rule, device_id, tick, at, severity)

    def _close_alert(self, rule: AlertRule, device_id: int, tick: int, at: datetime) -> Transition:
        alert = self._open.pop((rule, device_id))
        alert.closed_tick = tick
        alert.closed_at = at
        return Transition(TransitionKind.CLOSED, alert.alert_id, rule, device_id, tick, at, alert.severity)
