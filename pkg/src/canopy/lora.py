"""Uplink frames: fixed-point payload codec, CRC-16 check, multi-gateway
reception with distance-based loss, deduplication, and duty-cycle budgeting.

Frame layout (schema version 1), all multi-byte fields little-endian:

    offset  size  field
    0       1     schema_version (0x01)
    1       4     device_id (uint32)
    5       4     tick (uint32, minutes since epoch / 30)
    9       1     kind tag (1=weather-station 2=air-quality 3=soil-probe 4=tree-talker)
    10      n     payload, fixed-point channel block (see PAYLOAD_LAYOUT)
    10+n    2     CRC-16/CCITT-FALSE over bytes [0, 10+n), appended big-endian

Total length never exceeds 51 bytes.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from datetime import datetime
from typing import NamedTuple, Optional, Sequence

from .errors import CanopyError
from .model import DEFAULT_EPOCH, TICK_STEP, TICKS_PER_HOUR, GeoPoint, SensorKind
from .readings import Reading, channel_values, from_channel_values, kind_of
from .scenario import GatewaySpec

SCHEMA_VERSION = 1
MAX_FRAME_BYTES = 51
HEADER_BYTES = 10

KIND_TAGS = {
    SensorKind.WEATHER_STATION: 1,
    SensorKind.AIR_QUALITY: 2,
    SensorKind.SOIL_PROBE: 3,
    SensorKind.TREE_TALKER: 4,
}
TAG_KINDS = {tag: kind for kind, tag in KIND_TAGS.items()}

DUTY_BUDGET_MS_PER_HOUR = 36_000


class OutOfRangeChannel(CanopyError):
    code = "out-of-range-channel"


class DecodeError(CanopyError):
    """Total decode failure; `code` is one of bad-crc, truncated,
    unknown-schema-version, unknown-kind."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class DutyCycleViolation(CanopyError):
    code = "duty-cycle-violation"


# -- CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF) ---------------------------

def _build_crc_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _build_crc_table()


def crc16_ccitt(data: bytes) -> int:
    crc = 0xFFFF
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ byte) & 0xFF]
    return crc


# -- fixed-point payload layout ------------------------------------------------

class FieldCodec(NamedTuple):
    channel: str
    size: int      # bytes
    step: float    # quantization step
    offset: float  # stored raw = round((value - offset) / step)
    wrap: float = 0.0  # circular period (e.g. 360 for bearings); 0 = linear


_TEMP = (2, 0.1, -40.0)
_PCT_HALF = (1, 0.5, 0.0)

PAYLOAD_LAYOUT: dict[SensorKind, tuple[FieldCodec, ...]] = {
    SensorKind.WEATHER_STATION: (
        FieldCodec("temp_dry_c", *_TEMP),
        FieldCodec("temp_wet_c", *_TEMP),
        FieldCodec("dew_point_c", *_TEMP),
        FieldCodec("rh_pct", *_PCT_HALF),
        FieldCodec("wind_speed_ms", 2, 0.01, 0.0),
        FieldCodec("wind_dir_deg", 2, 0.1, 0.0, 360.0),
        FieldCodec("rain_mm_30min", 2, 0.1, 0.0),
        FieldCodec("leaf_wetness_pct", *_PCT_HALF),
        FieldCodec("solar_wm2", 2, 1.0, 0.0),
    ),
    SensorKind.AIR_QUALITY: (
        FieldCodec("temp_c", *_TEMP),
        FieldCodec("rh_pct", *_PCT_HALF),
        FieldCodec("co2_ppm", 2, 1.0, 0.0),
        FieldCodec("pm1", 2, 0.1, 0.0),
        FieldCodec("pm25", 2, 0.1, 0.0),
        FieldCodec("pm4", 2, 0.1, 0.0),
        FieldCodec("pm10", 2, 0.1, 0.0),
    ),
    SensorKind.SOIL_PROBE: (
        FieldCodec("moisture_vwc_pct", 2, 0.1, 0.0),
        FieldCodec("soil_temp_c", *_TEMP),
        FieldCodec("salinity_dsm", 2, 0.01, 0.0),
        FieldCodec("water_potential_kpa", 2, 0.1, -6553.5),
    ),
    SensorKind.TREE_TALKER: (
        FieldCodec("sap_flow_lh", 2, 0.01, 0.0),
        FieldCodec("radial_growth_um", 4, 1.0, 0.0),
        *(FieldCodec(f"spectral_{i:02d}", 1, 0.005, 0.0) for i in range(12)),
        FieldCodec("tilt_deg", 2, 0.1, 0.0),
        FieldCodec("air_temp_c", *_TEMP),
        FieldCodec("air_rh_pct", *_PCT_HALF),
        FieldCodec("battery_soc_pct", *_PCT_HALF),
    ),
}

PAYLOAD_BYTES = {kind: sum(f.size for f in layout) for kind, layout in PAYLOAD_LAYOUT.items()}

QUANT_STEP = {kind: {f.channel: f.step for f in layout} for kind, layout in PAYLOAD_LAYOUT.items()}


def _tick_of(t: datetime, epoch: datetime) -> int:
    return int((t - epoch).total_seconds() // TICK_STEP.total_seconds())


def encode(reading: Reading, epoch: datetime = DEFAULT_EPOCH) -> bytes:
    """Serialize a reading into one uplink frame; deterministic byte output."""
    kind = kind_of(reading)
    tick = _tick_of(reading.t, epoch)
    if not (0 <= tick <= 0xFFFFFFFF):
        raise OutOfRangeChannel(f"tick {tick} outside uint32")
    head = bytes([SCHEMA_VERSION])
    head += reading.device_id.to_bytes(4, "little")
    head += tick.to_bytes(4, "little")
    head += bytes([KIND_TAGS[kind]])
    values = channel_values(reading)
    payload = bytearray()
    for codec in PAYLOAD_LAYOUT[kind]:
        raw = round((values[codec.channel] - codec.offset) / codec.step)
        limit = (1 << (8 * codec.size)) - 1
        if codec.wrap:
            raw %= round(codec.wrap / codec.step)  # bearings quantize on the circle
        if not (0 <= raw <= limit):
            raise OutOfRangeChannel(
                f"channel {codec.channel}={values[codec.channel]} exceeds its quantization range")
        payload += raw.to_bytes(codec.size, "little")
    body = head + bytes(payload)
    frame = body + crc16_ccitt(body).to_bytes(2, "big")
    assert len(frame) <= MAX_FRAME_BYTES
    return frame


def decode(data: bytes, epoch: datetime = DEFAULT_EPOCH) -> Reading:
    """Parse a frame back into a reading; total over arbitrary byte strings."""
    if len(data) < HEADER_BYTES + 2:
        raise DecodeError("truncated", f"frame is {len(data)} bytes, below minimum")
    body, crc_bytes = data[:-2], data[-2:]
    if crc16_ccitt(body) != int.from_bytes(crc_bytes, "big"):
        raise DecodeError("bad-crc", "checksum mismatch")
    if body[0] != SCHEMA_VERSION:
        raise DecodeError("unknown-schema-version", f"schema version {body[0]:#x}")
    kind = TAG_KINDS.get(body[9])
    if kind is None:
        raise DecodeError("unknown-kind", f"kind tag {body[9]:#x}")
    payload = body[HEADER_BYTES:]
    if len(payload) != PAYLOAD_BYTES[kind]:
        raise DecodeError(
            "truncated", f"{kind.value} payload is {len(payload)} bytes, expected {PAYLOAD_BYTES[kind]}")
    device_id = int.from_bytes(body[1:5], "little")
    tick = int.from_bytes(body[5:9], "little")
    values: dict[str, float] = {}
    pos = 0
    for codec in PAYLOAD_LAYOUT[kind]:
        raw = int.from_bytes(payload[pos:pos + codec.size], "little")
        pos += codec.size
        values[codec.channel] = raw * codec.step + codec.offset
    t = epoch + tick * TICK_STEP
    return from_channel_values(kind, device_id, t, values)


def frame_tick(data: bytes) -> int:
    """Tick field of an already-validated frame."""
    return int.from_bytes(data[5:9], "little")


def frame_device_id(data: bytes) -> int:
    return int.from_bytes(data[1:5], "little")


def airtime_ms(frame_len_bytes: int, bitrate_bps: int) -> int:
    """Linear time-on-air model: ceil(bits / bitrate), in milliseconds."""
    if bitrate_bps <= 0:
        raise CanopyError("bitrate must be positive")
    return math.ceil(frame_len_bytes * 8 * 1000 / bitrate_bps)


# -- gateways and the uplink path ------------------------------------------------


def gateway_loss_probability(gw: GatewaySpec, distance_m: float) -> float:
    """Monotone non-decreasing loss in [0, 1]: floor + (d / range)^2, capped."""
    return min(1.0, gw.floor_loss + (distance_m / gw.range_m) ** 2)


class DutyCycleLedger:
    """Rolling 1-hour airtime budget per device (1% of 3600 s = 36 000 ms)."""

    def __init__(self, budget_ms: int = DUTY_BUDGET_MS_PER_HOUR):
        self.budget_ms = budget_ms
        self._spent: dict[int, list[tuple[int, int]]] = {}

    def _window_sum(self, device_id: int, tick: int) -> int:
        entries = self._spent.get(device_id, [])
        horizon = tick - TICKS_PER_HOUR
        live = [(t, ms) for t, ms in entries if t > horizon]
        self._spent[device_id] = live
        return sum(ms for _, ms in live)

    def can_send(self, device_id: int, tick: int, airtime: int) -> bool:
        return self._window_sum(device_id, tick) + airtime <= self.budget_ms

    def record(self, device_id: int, tick: int, airtime: int) -> None:
        self._spent.setdefault(device_id, []).append((tick, airtime))

    def window_sum(self, device_id: int, tick: int) -> int:
        return self._window_sum(device_id, tick)


@dataclass
class DeliveryOutcome:
    status: str  # delivered | lost | deferred | duplicate
    received_by: tuple[str, ...] = ()
    airtime_ms: int = 0


@dataclass
class LinkStats:
    attempted: int = 0
    delivered: int = 0
    lost: int = 0
    duplicates: int = 0
    deferrals: int = 0


class UplinkNetwork:
    """Three-ish gateways, a dedup set, and a duty-cycle ledger in front of ingestion.

    Per-device pseudo-random reception streams are keyed by (seed, device),
    so outcomes replay identically for a fixed scenario.
    """

    def __init__(self, gateways: Sequence[GatewaySpec], seed: int,
                 bitrate_bps: int = 5470, budget_ms: int = DUTY_BUDGET_MS_PER_HOUR):
        if not gateways:
            raise CanopyError("at least one gateway is required")
        self.gateways = list(gateways)
        self.seed = seed
        self.bitrate_bps = bitrate_bps
        self.ledger = DutyCycleLedger(budget_ms)
        self._rng: dict[int, random.Random] = {}
        self._seen: set[tuple[int, int, int]] = set()
        self._pending: list[tuple[int, GeoPoint, bytes]] = []
        self.stats: dict[int, LinkStats] = {}
        self.log: list[dict] = []
        self.max_window_ms: dict[int, int] = {}

    def _stream(self, device_id: int) -> random.Random:
        rng = self._rng.get(device_id)
        if rng is None:
            rng = self._rng[device_id] = random.Random(f"{self.seed}/link/{device_id}")
        return rng

    def _stats(self, device_id: int) -> LinkStats:
        stats = self.stats.get(device_id)
        if stats is None:
            stats = self.stats[device_id] = LinkStats()
        return stats

    def flush_pending(self, tick: int) -> list[tuple[bytes, DeliveryOutcome]]:
        """Retry frames deferred by the duty-cycle budget, oldest first."""
        pending, self._pending = self._pending, []
        outcomes = []
        for device_id, location, frame in pending:
            outcomes.append((frame, self.deliver(frame, location, tick, retry=True)))
        return outcomes

    def pending_count(self, device_id: Optional[int] = None) -> int:
        if device_id is None:
            return len(self._pending)
        return sum(1 for d, _, _ in self._pending if d == device_id)

    def deliver(self, frame: bytes, device_location: GeoPoint, tick: int,
                retry: bool = False) -> DeliveryOutcome:
        """Attempt one uplink: duty check, independent per-gateway reception, dedup."""
        device_id = frame_device_id(frame)
        stats = self._stats(device_id)
        if not retry:
            stats.attempted += 1
        cost = airtime_ms(len(frame), self.bitrate_bps)
        if not self.ledger.can_send(device_id, tick, cost):
            self._pending.append((device_id, device_location, frame))
            stats.deferrals += 1
            self.log.append({"event": "duty-cycle-deferral", "device_id": device_id,
                             "tick": tick, "airtime_ms": cost,
                             "window_ms": self.ledger.window_sum(device_id, tick)})
            return DeliveryOutcome("deferred", airtime_ms=cost)
        self.ledger.record(device_id, tick, cost)
        window = self.ledger.window_sum(device_id, tick)
        if window > self.max_window_ms.get(device_id, 0):
            self.max_window_ms[device_id] = window
        rng = self._stream(device_id)
        received = []
        for gw in self.gateways:
            p_loss = gateway_loss_probability(gw, device_location.distance_m(gw.location))
            if rng.random() >= p_loss:
                received.append(gw.gateway_id)
        if not received:
            stats.lost += 1
            self.log.append({"event": "uplink-lost", "device_id": device_id, "tick": tick})
            return DeliveryOutcome("lost", airtime_ms=cost)
        identity = (device_id, frame_tick(frame), frame[9])
        if identity in self._seen:
            stats.duplicates += 1
            return DeliveryOutcome("duplicate", received_by=tuple(received), airtime_ms=cost)
        self._seen.add(identity)
        stats.delivered += 1
        return DeliveryOutcome("delivered", received_by=tuple(received), airtime_ms=cost)
