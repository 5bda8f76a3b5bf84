"""Sensor-fleet acquisition coordination.

A central manager tracks per-sensor registrations, lifecycle states and
heartbeats, and broadcasts the common acquisition primitives (start, stop,
pause) atomically: a refused broadcast changes nothing and names its
blockers.  Simulated sensors reproduce the portal's camera fleet at its
nominal rates against an injected clock, so tests can drive hours of
18.5 kHz traffic in milliseconds.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator

import numpy as np

DISK_BUDGET_BYTES_PER_S = 270e6      # sustained write budget of one server array
HEARTBEAT_PERIOD_S = 1.0
STALE_AFTER_BEATS = 3


class Lifecycle(str, Enum):
    IDLE = "IDLE"
    ACQUIRING = "ACQUIRING"
    PAUSED = "PAUSED"
    SAVING = "SAVING"
    ERROR = "ERROR"


# Legal sensor transitions; ERROR is additionally reachable from anywhere.
LEGAL_TRANSITIONS: dict[Lifecycle, frozenset[Lifecycle]] = {
    Lifecycle.IDLE: frozenset({Lifecycle.ACQUIRING}),
    Lifecycle.ACQUIRING: frozenset({Lifecycle.PAUSED, Lifecycle.SAVING}),
    Lifecycle.PAUSED: frozenset({Lifecycle.ACQUIRING}),
    Lifecycle.SAVING: frozenset({Lifecycle.IDLE}),
    Lifecycle.ERROR: frozenset({Lifecycle.IDLE}),
}


def transition_legal(src: Lifecycle, dst: Lifecycle) -> bool:
    return src == dst or dst is Lifecycle.ERROR or dst in LEGAL_TRANSITIONS[src]


class AcquisitionError(Exception):
    status = 400


class DuplicateSensorError(AcquisitionError):
    status = 409


class UnknownTokenError(AcquisitionError):
    status = 401


class UnknownSensorError(AcquisitionError):
    status = 404


class UndeclaredPrimitiveError(AcquisitionError):
    status = 409


class IllegalTransitionError(AcquisitionError):
    status = 409


SENSOR_KINDS = ("matrix-visual", "line-visual", "line-thermal")


@dataclass(frozen=True)
class SensorDescriptor:
    sensor_id: str
    kind: str                             # matrix-visual | line-visual | line-thermal
    rate_hz: float
    resolution: tuple[int, int]           # (w, h)
    bytes_per_sample: float = 1.0         # effective bytes/pixel incl. container overhead

    def __post_init__(self) -> None:
        if self.kind not in SENSOR_KINDS:
            raise AcquisitionError(f"unknown sensor kind {self.kind!r}")
        if self.rate_hz <= 0 or min(self.resolution) < 1:
            raise AcquisitionError("rate and resolution must be positive")

    @property
    def declared_rate(self) -> float:
        """Declared data rate in bytes/s."""
        w, h = self.resolution
        return self.rate_hz * w * h * self.bytes_per_sample

    @property
    def payload_per_sample(self) -> int:
        """Raw pixel payload of one sample (8-bit pixels)."""
        return self.resolution[0] * self.resolution[1]


def matrix_visual(sensor_id: str = "matrix-0") -> SensorDescriptor:
    return SensorDescriptor(sensor_id, "matrix-visual", 300.0, (640, 480))


def line_visual(sensor_id: str) -> SensorDescriptor:
    # nominal 80 MB/s: ~1.06 effective bytes per pixel (line headers and
    # container overhead on top of the 4096 B payload)
    bps = 80e6 / (18500.0 * 4096.0)
    return SensorDescriptor(sensor_id, "line-visual", 18500.0, (4096, 1), bps)


def line_thermal(sensor_id: str) -> SensorDescriptor:
    return SensorDescriptor(sensor_id, "line-thermal", 512.0, (256, 1))


def table_fleet() -> list[SensorDescriptor]:
    """The portal's five-sensor complement: one matrix camera, two visual
    line cameras, two thermal line cameras."""
    return [matrix_visual("matrix-0"),
            line_visual("line-visual-1"), line_visual("line-visual-2"),
            line_thermal("thermal-left"), line_thermal("thermal-right")]


SPECIFIC_PRIMITIVES = {"line-thermal": ("focus",), "matrix-visual": (),
                       "line-visual": ()}


# ---------------------------------------------------------------------------
# Clocks
# ---------------------------------------------------------------------------

class VirtualClock:
    """Deterministic manually-advanced clock for tests and simulation."""

    def __init__(self, start: float = 0.0) -> None:
        self._now = start

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("clock cannot run backwards")
        self._now += dt


class WallClock:
    def now(self) -> float:
        return time.monotonic()


# ---------------------------------------------------------------------------
# Manager
# ---------------------------------------------------------------------------

@dataclass
class SensorState:
    lifecycle: Lifecycle = Lifecycle.IDLE
    last_heartbeat: float = 0.0
    bytes_written: int = 0
    current_session: str | None = None


@dataclass
class RegistrationRecord:
    descriptor: SensorDescriptor
    endpoint: str
    token: str
    specific_primitives: tuple[str, ...] = ()


@dataclass
class FleetEntry:
    descriptor: SensorDescriptor
    state: SensorState
    stale: bool


@dataclass
class BroadcastOutcome:
    command: str
    delivered: bool
    blockers: list[str] = field(default_factory=list)
    session_id: str | None = None


@dataclass(frozen=True)
class TransitionEvent:
    t: float
    sensor_id: str
    src: Lifecycle
    dst: Lifecycle


@dataclass
class SessionRecord:
    session_id: str
    started: float
    sensor_ids: tuple[str, ...]
    incomplete_streams: list[str] = field(default_factory=list)
    stopped: float | None = None


class AcquisitionManager:
    """Registration, heartbeat/staleness tracking, atomic broadcasts.

    All mutations run under one lock (the logical event queue); reads
    return snapshots.  Tokens are deterministic for a fixed seed so full
    coordination traces are reproducible.
    """

    def __init__(self, clock=None, heartbeat_period: float = HEARTBEAT_PERIOD_S,
                 stale_after_beats: int = STALE_AFTER_BEATS,
                 token_seed: int = 0) -> None:
        self.clock = clock if clock is not None else WallClock()
        self.heartbeat_period = heartbeat_period
        self.stale_after = stale_after_beats * heartbeat_period
        self._lock = threading.Lock()
        self._registry: dict[str, RegistrationRecord] = {}    # sensor_id keyed
        self._states: dict[str, SensorState] = {}
        self._tokens: dict[str, str] = {}                     # token -> sensor_id
        self._token_seed = token_seed
        self._counter = 0
        self._session_counter = 0
        self.sessions: dict[str, SessionRecord] = {}
        self.transition_log: list[TransitionEvent] = []
        self.transport: Callable[[str, str, str, dict], dict] = \
            lambda endpoint, sensor_id, name, args: {"ok": True, "name": name}

    # -- registration -------------------------------------------------------

    def _mint_token(self, sensor_id: str) -> str:
        self._counter += 1
        digest = hashlib.blake2b(
            f"{self._token_seed}:{self._counter}:{sensor_id}".encode(),
            digest_size=6).hexdigest()
        return f"tok-{self._counter:05d}-{digest}"

    def register(self, descriptor: SensorDescriptor, endpoint: str,
                 specific_primitives: tuple[str, ...] = ()) -> str:
        undeclarable = set(specific_primitives) - set(
            SPECIFIC_PRIMITIVES[descriptor.kind])
        if undeclarable:
            raise UndeclaredPrimitiveError(
                f"kind {descriptor.kind!r} cannot declare {sorted(undeclarable)}")
        with self._lock:
            if descriptor.sensor_id in self._registry:
                raise DuplicateSensorError(
                    f"sensor {descriptor.sensor_id!r} already registered")
            token = self._mint_token(descriptor.sensor_id)
            self._registry[descriptor.sensor_id] = RegistrationRecord(
                descriptor=descriptor, endpoint=endpoint, token=token,
                specific_primitives=tuple(specific_primitives))
            self._states[descriptor.sensor_id] = SensorState(
                last_heartbeat=self.clock.now())
            self._tokens[token] = descriptor.sensor_id
            return token

    def unregister(self, token: str) -> str:
        with self._lock:
            sensor_id = self._tokens.pop(token, None)
            if sensor_id is None:
                raise UnknownTokenError("unknown or already-unregistered token")
            state = self._states.pop(sensor_id)
            self._registry.pop(sensor_id)
            if state.current_session and state.lifecycle in (
                    Lifecycle.ACQUIRING, Lifecycle.PAUSED, Lifecycle.SAVING):
                rec = self.sessions.get(state.current_session)
                if rec is not None and sensor_id not in rec.incomplete_streams:
                    rec.incomplete_streams.append(sensor_id)
            return sensor_id

    # -- heartbeats and state ------------------------------------------------

    def _apply_transition(self, sensor_id: str, dst: Lifecycle) -> None:
        state = self._states[sensor_id]
        if state.lifecycle is not dst:
            self.transition_log.append(TransitionEvent(
                t=self.clock.now(), sensor_id=sensor_id,
                src=state.lifecycle, dst=dst))
            state.lifecycle = dst

    def heartbeat(self, token: str, lifecycle: Lifecycle | str,
                  bytes_written: int | None = None,
                  current_session: str | None = None) -> dict:
        dst = Lifecycle(lifecycle)
        with self._lock:
            sensor_id = self._tokens.get(token)
            if sensor_id is None:
                raise UnknownTokenError("unknown token")
            state = self._states[sensor_id]
            state.last_heartbeat = self.clock.now()
            if bytes_written is not None:
                state.bytes_written = bytes_written
            if current_session is not None:
                state.current_session = current_session
            if not transition_legal(state.lifecycle, dst):
                src = state.lifecycle
                self._apply_transition(sensor_id, Lifecycle.ERROR)
                raise IllegalTransitionError(
                    f"{sensor_id}: illegal transition {src.value} -> {dst.value}")
            self._apply_transition(sensor_id, dst)
            return {"ok": True, "sensor_id": sensor_id}

    def _stale(self, state: SensorState) -> bool:
        return (self.clock.now() - state.last_heartbeat) > self.stale_after

    def fleet_view(self) -> dict[str, FleetEntry]:
        with self._lock:
            return {sid: FleetEntry(
                        descriptor=rec.descriptor,
                        state=SensorState(**vars(self._states[sid])),
                        stale=self._stale(self._states[sid]))
                    for sid, rec in self._registry.items()}

    # -- broadcasts ----------------------------------------------------------

    def broadcast(self, command: str) -> BroadcastOutcome:
        """Deliver a common primitive to the whole fleet, or refuse it
        atomically.

        start: every sensor must be IDLE and fresh; allocates a session.
        stop: refused while any sensor is SAVING (or still PAUSED);
        acquiring sensors move to SAVING.  pause: toggles between
        all-ACQUIRING and all-PAUSED.
        """
        if command not in ("start", "stop", "pause"):
            raise AcquisitionError(f"unknown primitive {command!r}")
        with self._lock:
            states = {sid: self._states[sid] for sid in self._registry}
            if command == "start":
                blockers = [sid for sid, st in states.items()
                            if st.lifecycle is not Lifecycle.IDLE or self._stale(st)]
                if blockers or not states:
                    return BroadcastOutcome("start", False, sorted(blockers))
                self._session_counter += 1
                session_id = f"acq-{self._session_counter:05d}"
                self.sessions[session_id] = SessionRecord(
                    session_id=session_id, started=self.clock.now(),
                    sensor_ids=tuple(sorted(states)))
                for sid, st in states.items():
                    self._apply_transition(sid, Lifecycle.ACQUIRING)
                    st.current_session = session_id
                return BroadcastOutcome("start", True, session_id=session_id)

            if command == "stop":
                blockers = [sid for sid, st in states.items()
                            if st.lifecycle in (Lifecycle.SAVING, Lifecycle.PAUSED)]
                if blockers:
                    return BroadcastOutcome("stop", False, sorted(blockers))
                session_id = None
                for sid, st in states.items():
                    if st.lifecycle is Lifecycle.ACQUIRING:
                        self._apply_transition(sid, Lifecycle.SAVING)
                        session_id = session_id or st.current_session
                if session_id and session_id in self.sessions:
                    self.sessions[session_id].stopped = self.clock.now()
                return BroadcastOutcome("stop", True, session_id=session_id)

            # pause toggle
            active = {sid: st for sid, st in states.items()
                      if st.lifecycle is not Lifecycle.IDLE}
            if active and all(st.lifecycle is Lifecycle.ACQUIRING
                              for st in active.values()):
                for sid in active:
                    self._apply_transition(sid, Lifecycle.PAUSED)
                return BroadcastOutcome("pause", True)
            if active and all(st.lifecycle is Lifecycle.PAUSED
                              for st in active.values()):
                for sid in active:
                    self._apply_transition(sid, Lifecycle.ACQUIRING)
                return BroadcastOutcome("pause", True)
            blockers = [sid for sid, st in active.items()
                        if st.lifecycle not in (Lifecycle.ACQUIRING,
                                                Lifecycle.PAUSED)]
            return BroadcastOutcome("pause", False,
                                    sorted(blockers or active.keys()))

    # -- per-sensor primitives ------------------------------------------------

    def sensor_primitive(self, sensor_id: str, name: str, args: dict | None = None) -> dict:
        with self._lock:
            rec = self._registry.get(sensor_id)
            if rec is None:
                raise UnknownSensorError(f"unknown sensor {sensor_id!r}")
            if name not in rec.specific_primitives:
                raise UndeclaredPrimitiveError(
                    f"sensor {sensor_id!r} does not declare {name!r}")
            endpoint = rec.endpoint
        return self.transport(endpoint, sensor_id, name, args or {})

    def validate_log(self) -> list[TransitionEvent]:
        """Transition-log entries that violate the state machine (should
        always be empty; the manager never records one)."""
        return [ev for ev in self.transition_log
                if not transition_legal(ev.src, ev.dst)]


# ---------------------------------------------------------------------------
# Simulated sensors
# ---------------------------------------------------------------------------

@dataclass
class StreamChunk:
    first_index: int
    count: int
    payload_bytes: int
    data: np.ndarray | None = None     # rendered samples, None when count-only


class SimulatedSensor:
    """Producer emitting samples at the descriptor's nominal rate against
    an injected clock, with exact sample/byte accounting.

    `render` optionally materializes sample content (a (count, w*h) uint8
    array); rate accounting never depends on it.
    """

    def __init__(self, descriptor: SensorDescriptor, clock,
                 render: Callable[[int, int], np.ndarray] | None = None,
                 drain_time: float = 0.5) -> None:
        self.descriptor = descriptor
        self.clock = clock
        self.render = render
        self.drain_time = drain_time
        self.lifecycle = Lifecycle.IDLE
        self.samples_emitted = 0
        self.bytes_written = 0
        self.acquire_started: float | None = None
        self.paused_total = 0.0
        self._pause_entered: float | None = None
        self._drain_deadline: float | None = None
        self.state_trace: list[tuple[float, Lifecycle]] = [
            (clock.now(), Lifecycle.IDLE)]

    def _set(self, dst: Lifecycle) -> None:
        if not transition_legal(self.lifecycle, dst):
            raise IllegalTransitionError(
                f"{self.descriptor.sensor_id}: {self.lifecycle.value} -> {dst.value}")
        if dst is not self.lifecycle:
            self.lifecycle = dst
            self.state_trace.append((self.clock.now(), dst))

    def command(self, name: str) -> None:
        if name == "start":
            self._set(Lifecycle.ACQUIRING)
            self.acquire_started = self.clock.now()
            self.paused_total = 0.0
            self.samples_emitted = 0
            self.bytes_written = 0
        elif name == "stop":
            self._set(Lifecycle.SAVING)
            self._drain_deadline = self.clock.now() + self.drain_time
        elif name == "pause":
            if self.lifecycle is Lifecycle.ACQUIRING:
                self._set(Lifecycle.PAUSED)
                self._pause_entered = self.clock.now()
            elif self.lifecycle is Lifecycle.PAUSED:
                self.paused_total += self.clock.now() - self._pause_entered
                self._pause_entered = None
                self._set(Lifecycle.ACQUIRING)
        elif name == "fault":
            self._set(Lifecycle.ERROR)
        elif name == "reset":
            self._set(Lifecycle.IDLE)
        else:
            raise AcquisitionError(f"unknown primitive {name!r}")

    def _due_samples(self) -> int:
        if self.acquire_started is None:
            return 0
        active = self.clock.now() - self.acquire_started - self.paused_total
        if self._pause_entered is not None:
            active -= self.clock.now() - self._pause_entered
        return int(np.floor(max(0.0, active) * self.descriptor.rate_hz))

    def pump(self, chunk_samples: int = 65536,
             materialize: bool = False) -> Iterator[StreamChunk]:
        """Emit every sample due by the current clock time, in chunks."""
        if self.lifecycle not in (Lifecycle.ACQUIRING, Lifecycle.PAUSED):
            return
        due = self._due_samples()
        while self.samples_emitted < due:
            n = min(chunk_samples, due - self.samples_emitted)
            payload = n * self.descriptor.payload_per_sample
            data = None
            if materialize and self.render is not None:
                data = self.render(self.samples_emitted, n)
            chunk = StreamChunk(first_index=self.samples_emitted, count=n,
                                payload_bytes=payload, data=data)
            self.samples_emitted += n
            self.bytes_written += payload
            yield chunk

    def tick(self) -> None:
        """Housekeeping at heartbeat time: finish draining after a stop."""
        if (self.lifecycle is Lifecycle.SAVING
                and self._drain_deadline is not None
                and self.clock.now() >= self._drain_deadline):
            self._set(Lifecycle.IDLE)
            self._drain_deadline = None


def simulate_sensor(descriptor: SensorDescriptor, duration_s: float,
                    clock: VirtualClock | None = None,
                    render: Callable[[int, int], np.ndarray] | None = None,
                    ) -> SimulatedSensor:
    """Run one sensor through a start/emit/stop passage under virtual time."""
    clock = clock if clock is not None else VirtualClock()
    sensor = SimulatedSensor(descriptor, clock, render=render)
    sensor.command("start")
    clock.advance(duration_s)
    for _ in sensor.pump():
        pass
    sensor.command("stop")
    clock.advance(sensor.drain_time)
    sensor.tick()
    return sensor


# ---------------------------------------------------------------------------
# Throughput accounting
# ---------------------------------------------------------------------------

@dataclass
class ThroughputRow:
    sensor_id: str
    kind: str
    samples: int
    payload_bytes: int
    measured_rate: float        # effective bytes/s incl. container overhead
    declared_rate: float

    @property
    def deviation_pct(self) -> float:
        if self.declared_rate == 0:
            return 0.0
        return 100.0 * abs(self.measured_rate - self.declared_rate) / self.declared_rate


@dataclass
class ThroughputReport:
    rows: list[ThroughputRow]
    duration_s: float
    aggregate_rate: float
    budget_rate: float = DISK_BUDGET_BYTES_PER_S

    @property
    def within_budget(self) -> bool:
        return self.aggregate_rate <= self.budget_rate


def throughput_report(sensors: list[SimulatedSensor],
                      duration_s: float) -> ThroughputReport:
    """Measured effective rates over an acquisition of known duration.

    The measured rate scales the emitted sample count by the descriptor's
    effective bytes-per-sample (container overhead included), which is
    what lands on disk; payload byte counts are reported alongside.
    """
    rows = []
    for sensor in sensors:
        d = sensor.descriptor
        if duration_s > 0:
            rate = (sensor.samples_emitted * d.payload_per_sample
                    * d.bytes_per_sample) / duration_s
        else:
            rate = 0.0
        rows.append(ThroughputRow(sensor_id=d.sensor_id, kind=d.kind,
                                  samples=sensor.samples_emitted,
                                  payload_bytes=sensor.bytes_written,
                                  measured_rate=rate,
                                  declared_rate=d.declared_rate))
    return ThroughputReport(rows=rows, duration_s=duration_s,
                            aggregate_rate=sum(r.measured_rate for r in rows))
