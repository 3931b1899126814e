"""Append-only in-memory time-series store with retention and snapshot files.

Points live on the 30-minute tick grid. Values never change once appended;
retention (a prefix purge) is the only deletion path, and quality flags are
the only mutable attribute (set by the alert engine, never by ingestion).
"""

from __future__ import annotations

import hashlib
import threading
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

from .errors import CanopyError, NotFound
from .model import TICK_MINUTES, TICK_STEP, DEFAULT_EPOCH, SensorKind
from .readings import CHANNELS, Reading, channel_values, kind_of

RETENTION_DAYS = 90
RETENTION_TICKS = RETENTION_DAYS * 24 * 60 // TICK_MINUTES

FLAG_OK = "ok"
FLAG_SUSPECT = "suspect"
FLAG_GAP = "gap-filled"
_FLAGS = (FLAG_OK, FLAG_SUSPECT, FLAG_GAP)

SNAPSHOT_SCHEMA = "canopy/series/v1"

AGGREGATIONS = ("raw", "mean", "min", "max", "sum")


class MisalignedTimestamp(CanopyError):
    code = "misaligned-timestamp"


class InvalidChannel(CanopyError):
    code = "invalid-channel"


class UnknownSeries(NotFound):
    code = "unknown-series"


class SeriesKey(NamedTuple):
    device_id: int
    kind: SensorKind
    channel: str

    def label(self) -> str:
        return f"{self.device_id:08x}.{self.kind.value}.{self.channel}"


class SeriesPoint(NamedTuple):
    t: datetime
    value: float
    flag: str


@dataclass
class _Series:
    ticks: list[int]
    values: list[float]
    flags: list[str]


class TelemetryStore:
    """Idempotent ingestion keyed on (device, kind, tick); many readers, one writer."""

    def __init__(self, epoch: datetime = DEFAULT_EPOCH):
        self.epoch = epoch
        self._series: dict[SeriesKey, _Series] = {}
        self._seen: set[tuple[int, SensorKind, int]] = set()
        self._lock = threading.RLock()

    # -- tick helpers -------------------------------------------------------

    def tick_of(self, t: datetime) -> int:
        delta = (t - self.epoch).total_seconds()
        grid = TICK_STEP.total_seconds()
        if delta % grid != 0:
            raise MisalignedTimestamp(
                f"timestamp {t.isoformat()} is off the {TICK_MINUTES}-minute grid")
        return int(delta // grid)

    def time_of(self, tick: int) -> datetime:
        return self.epoch + tick * TICK_STEP

    # -- ingestion ----------------------------------------------------------

    def append(self, reading: Reading) -> str:
        """Fan a reading out into one point per channel; returns 'inserted' or 'duplicate'."""
        kind = kind_of(reading)
        tick = self.tick_of(reading.t)
        with self._lock:
            identity = (reading.device_id, kind, tick)
            if identity in self._seen:
                return "duplicate"
            for channel, value in channel_values(reading).items():
                self._append_point(SeriesKey(reading.device_id, kind, channel), tick, value, FLAG_OK)
            self._seen.add(identity)
            return "inserted"

    def _append_point(self, key: SeriesKey, tick: int, value: float, flag: str) -> None:
        if key.channel not in CHANNELS[key.kind]:
            raise InvalidChannel(f"channel {key.channel!r} is not valid for {key.kind.value}")
        series = self._series.get(key)
        if series is None:
            series = self._series[key] = _Series([], [], [])
        if series.ticks and tick <= series.ticks[-1]:
            raise CanopyError(f"out-of-order append to {key.label()}: tick {tick} <= {series.ticks[-1]}")
        series.ticks.append(tick)
        series.values.append(value)
        series.flags.append(flag)

    # -- queries ------------------------------------------------------------

    def keys(self) -> list[SeriesKey]:
        with self._lock:
            return sorted(self._series.keys())

    def points(self, key: SeriesKey) -> _Series:
        """Raw per-series columns (live view; callers must not mutate)."""
        series = self._series.get(key)
        if series is None:
            raise UnknownSeries(f"no such series: {key.label()}")
        return series

    def point_count(self, key: SeriesKey) -> int:
        series = self._series.get(key)
        return 0 if series is None else len(series.ticks)

    def value_at(self, key: SeriesKey, tick: int, skip_gap: bool = True) -> Optional[float]:
        """Value at one exact tick, or None when absent (or gap-filled)."""
        series = self._series.get(key)
        if series is None:
            return None
        i = bisect_left(series.ticks, tick)
        if i < len(series.ticks) and series.ticks[i] == tick:
            if skip_gap and series.flags[i] == FLAG_GAP:
                return None
            return series.values[i]
        return None

    def latest(self, key: SeriesKey) -> Optional[SeriesPoint]:
        series = self._series.get(key)
        if series is None or not series.ticks:
            return None
        i = len(series.ticks) - 1
        return SeriesPoint(self.time_of(series.ticks[i]), series.values[i], series.flags[i])

    def query_range(
        self,
        key: SeriesKey,
        t0: datetime,
        t1: datetime,
        agg: str = "raw",
        bucket: Optional[timedelta] = None,
    ) -> list[SeriesPoint]:
        """Points in [t0, t1], optionally bucketed by an epoch-aligned aggregate.

        Aggregate buckets are anchored at the epoch, so daily buckets of a
        midnight epoch run midnight to midnight. Gap-filled points are
        excluded from aggregates; empty buckets are omitted.
        """
        if agg not in AGGREGATIONS:
            raise CanopyError(f"unsupported aggregation {agg!r}")
        if t0 > t1:
            raise CanopyError("query start is after query end")
        with self._lock:
            series = self._series.get(key)
            if series is None:
                raise UnknownSeries(f"no such series: {key.label()}")
            tick0, tick1 = self._tick_floor(t0), self._tick_ceil(t1)
            lo = bisect_left(series.ticks, tick0)
            hi = bisect_right(series.ticks, tick1)
            if agg == "raw":
                return [
                    SeriesPoint(self.time_of(series.ticks[i]), series.values[i], series.flags[i])
                    for i in range(lo, hi)
                ]
            if bucket is None:
                raise CanopyError("bucketed aggregation requires a bucket duration")
            bucket_s = bucket.total_seconds()
            if bucket_s <= 0 or bucket_s % TICK_STEP.total_seconds() != 0:
                raise CanopyError(f"bucket must be a positive multiple of {TICK_MINUTES} minutes")
            bucket_ticks = int(bucket_s // TICK_STEP.total_seconds())
            out: list[SeriesPoint] = []
            cur_bucket: Optional[int] = None
            acc: list[float] = []

            def flush():
                if cur_bucket is None or not acc:
                    return
                if agg == "mean":
                    v = sum(acc) / len(acc)
                elif agg == "min":
                    v = min(acc)
                elif agg == "max":
                    v = max(acc)
                else:
                    v = sum(acc)
                out.append(SeriesPoint(self.time_of(cur_bucket * bucket_ticks), v, FLAG_OK))

            for i in range(lo, hi):
                if series.flags[i] == FLAG_GAP:
                    continue
                b = series.ticks[i] // bucket_ticks
                if b != cur_bucket:
                    flush()
                    cur_bucket = b
                    acc = []
                acc.append(series.values[i])
            flush()
            return out

    def _tick_floor(self, t: datetime) -> int:
        delta = (t - self.epoch).total_seconds()
        return int(delta // TICK_STEP.total_seconds())

    def _tick_ceil(self, t: datetime) -> int:
        delta = (t - self.epoch).total_seconds()
        grid = TICK_STEP.total_seconds()
        return int(-(-delta // grid))

    # -- quality flags ------------------------------------------------------

    def mark_suspect(self, key: SeriesKey, t0: datetime, t1: datetime) -> int:
        """Flag points in [t0, t1] as suspect; values are preserved for audit."""
        with self._lock:
            series = self._series.get(key)
            if series is None:
                raise UnknownSeries(f"no such series: {key.label()}")
            lo = bisect_left(series.ticks, self._tick_floor(t0))
            hi = bisect_right(series.ticks, self._tick_ceil(t1))
            n = 0
            for i in range(lo, hi):
                if series.flags[i] != FLAG_SUSPECT:
                    series.flags[i] = FLAG_SUSPECT
                    n += 1
            return n

    # -- retention ----------------------------------------------------------

    def enforce_retention(self, now: datetime) -> int:
        """Purge points strictly older than the retention horizon; returns purge count."""
        cutoff_tick = self._tick_ceil(now - timedelta(days=RETENTION_DAYS))
        purged = 0
        with self._lock:
            for series in self._series.values():
                cut = bisect_left(series.ticks, cutoff_tick)
                if cut:
                    purged += cut
                    del series.ticks[:cut], series.values[:cut], series.flags[:cut]
            if purged:
                self._seen = {ident for ident in self._seen if ident[2] >= cutoff_tick}
        return purged

    # -- snapshot persistence ------------------------------------------------

    def export_snapshot(self, directory: Path) -> int:
        """One line-delimited file per series; returns file count."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with self._lock:
            for key in self.keys():
                series = self._series[key]
                path = directory / f"{key.label()}.series"
                with path.open("w", encoding="utf-8") as fh:
                    fh.write(f"{SNAPSHOT_SCHEMA} device_id={key.device_id} "
                             f"kind={key.kind.value} channel={key.channel} "
                             f"epoch={self.epoch.isoformat()}\n")
                    for tick, value, flag in zip(series.ticks, series.values, series.flags):
                        fh.write(f"{self.time_of(tick).isoformat()},{value!r},{flag}\n")
            return len(self._series)

    def import_snapshot(self, directory: Path) -> int:
        """Load series files produced by export_snapshot; returns point count."""
        directory = Path(directory)
        count = 0
        for path in sorted(directory.glob("*.series")):
            with path.open("r", encoding="utf-8") as fh:
                header = fh.readline().strip()
                fields = dict(part.split("=", 1) for part in header.split()[1:])
                if not header.startswith(SNAPSHOT_SCHEMA):
                    raise CanopyError(f"{path.name}: unsupported snapshot schema")
                key = SeriesKey(int(fields["device_id"]), SensorKind(fields["kind"]), fields["channel"])
                for line in fh:
                    t_s, v_s, flag = line.rstrip("\n").split(",")
                    if flag not in _FLAGS:
                        raise CanopyError(f"{path.name}: unknown quality flag {flag!r}")
                    t = datetime.fromisoformat(t_s)
                    tick = self.tick_of(t)
                    self._append_point(key, tick, float(v_s), flag)
                    self._seen.add((key.device_id, key.kind, tick))
                    count += 1
        return count

    # -- digest ---------------------------------------------------------------

    def digest(self) -> str:
        """Canonical sha256 over every point (keys sorted, flags included)."""
        h = hashlib.sha256()
        with self._lock:
            for key in self.keys():
                series = self._series[key]
                h.update(key.label().encode())
                for tick, value, flag in zip(series.ticks, series.values, series.flags):
                    h.update(f"{tick},{value!r},{flag};".encode())
        return h.hexdigest()

    def total_points(self) -> int:
        with self._lock:
            return sum(len(s.ticks) for s in self._series.values())

    def max_tick(self) -> Optional[int]:
        with self._lock:
            ticks = [s.ticks[-1] for s in self._series.values() if s.ticks]
            return max(ticks) if ticks else None
