"""Device-agnostic eye-tracking layer.

Separates the device lifecycle (start/stop the tracker) from the sampling
lifecycle (start/stop the signal stream), with a calibration hook gated on
device capability. Samples are broadcast in order to any number of consumer
queues; exactly one producer feeds a stream.

The on-disk format is a flat CSV with one fixed header: timestamp_ns, then
origin xyz / direction xyz / pupil / validity for each of left, right, and
combined, and a final JSON-escaped vendor_extras column. Invalid eyes keep
their row (validity=0, zeroed fields) so the sample rate stays constant.

Shipped devices: a scripted simulated tracker (fixations with angular
Gaussian noise, linearly interpolated saccades), a file replay device for
deterministic re-runs, and a loopback device as the external-integration
example (samples pushed in programmatically come out the sampling stream).
Vendor SDK bindings plug in the same way via the device registry config.
"""

from __future__ import annotations

import csv
import json
import math
import os
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    GazeParseError,
    GazeWriteError,
    StateError,
    UnsupportedCapabilityError,
    ValidationError,
)

DEVICE_CAPABILITIES = ("calibration", "per_eye", "pupil")
DEVICES_ENV_VAR = "VISIONSIM_DEVICES"

EYE_ORIGINS = {
    "left": (-0.032, 0.0, 0.0),
    "right": (0.032, 0.0, 0.0),
    "combined": (0.0, 0.0, 0.0),
}

_EYES = ("left", "right", "combined")
_EYE_FIELDS = ("origin_x", "origin_y", "origin_z", "dir_x", "dir_y", "dir_z",
               "pupil_mm", "valid")

GAZE_CSV_HEADER = ["timestamp_ns"] + [
    f"{eye}_{field}" for eye in _EYES for field in _EYE_FIELDS
] + ["vendor_extras"]


@dataclass(frozen=True, slots=True)
class EyeData:
    origin: Tuple[float, float, float]
    direction: Tuple[float, float, float]
    pupil_mm: float
    valid: bool = True

    @classmethod
    def invalid(cls) -> "EyeData":
        return cls((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.0, False)


@dataclass(frozen=True, slots=True)
class GazeSample:
    timestamp_ns: int
    left: EyeData
    right: EyeData
    combined: EyeData
    vendor_extras: str = ""

    def eyes(self):
        return {"left": self.left, "right": self.right, "combined": self.combined}


def _check_unit(eye: EyeData, name: str, tol: float = 1e-3) -> None:
    if not eye.valid:
        return
    norm = math.sqrt(sum(c * c for c in eye.direction))
    if abs(norm - 1.0) > tol:
        raise ValidationError(f"{name} direction not unit-length (|d| = {norm:.6f})")


def validate_sample(sample: GazeSample) -> None:
    for name, eye in sample.eyes().items():
        _check_unit(eye, name)


# ---------------------------------------------------------------------------
# Generic file format
# ---------------------------------------------------------------------------

def _format_row(sample: GazeSample) -> List[str]:
    row = [str(sample.timestamp_ns)]
    for eye in (sample.left, sample.right, sample.combined):
        row.extend(repr(v) for v in eye.origin)
        row.extend(repr(v) for v in eye.direction)
        row.append(repr(eye.pupil_mm))
        row.append("1" if eye.valid else "0")
    row.append(json.dumps(sample.vendor_extras))
    return row


def _parse_row(row: Sequence[str]) -> GazeSample:
    if len(row) != len(GAZE_CSV_HEADER):
        raise ValueError(f"expected {len(GAZE_CSV_HEADER)} columns, got {len(row)}")
    ts = int(row[0])
    eyes = []
    for k in range(3):
        base = 1 + k * 8
        vals = [float(v) for v in row[base:base + 7]]
        valid = row[base + 7] == "1"
        eyes.append(EyeData(origin=(vals[0], vals[1], vals[2]),
                            direction=(vals[3], vals[4], vals[5]),
                            pupil_mm=vals[6], valid=valid))
    return GazeSample(timestamp_ns=ts, left=eyes[0], right=eyes[1],
                      combined=eyes[2], vendor_extras=json.loads(row[-1]))


class GazeRecorder:
    """Write samples to a gaze CSV, rejecting non-monotonic timestamps."""

    def __init__(self, path):
        self.path = Path(path)
        self._file = open(self.path, "w", newline="")
        self._writer = csv.writer(self._file)
        self._writer.writerow(GAZE_CSV_HEADER)
        self._last_ts: Optional[int] = None
        self.samples_written = 0

    def write(self, sample: GazeSample) -> None:
        validate_sample(sample)
        if self._last_ts is not None and sample.timestamp_ns <= self._last_ts:
            raise ValidationError(
                f"non-monotonic timestamp {sample.timestamp_ns} after {self._last_ts}")
        try:
            self._writer.writerow(_format_row(sample))
        except OSError as exc:
            raise GazeWriteError(self.samples_written, str(exc)) from exc
        self._last_ts = sample.timestamp_ns
        self.samples_written += 1

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def record_gaze(samples: Iterable[GazeSample], session, scene_name: str) -> Path:
    """Record a sample stream to ``session_dir/<scene_name>/gaze.csv``."""
    path = session.scene_dir(scene_name) / "gaze.csv"
    with GazeRecorder(path) as recorder:
        for sample in samples:
            recorder.write(sample)
    return path


def parse_gaze_file(path) -> Iterator[GazeSample]:
    """Yield samples from a gaze CSV; malformed rows raise with their data-row number."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != GAZE_CSV_HEADER:
            raise GazeParseError(0, "missing or unrecognized gaze header")
        for i, row in enumerate(reader, start=1):
            try:
                yield _parse_row(row)
            except (ValueError, json.JSONDecodeError) as exc:
                raise GazeParseError(i, str(exc)) from None


def load_gaze_file(path) -> List[GazeSample]:
    return list(parse_gaze_file(path))


# ---------------------------------------------------------------------------
# Clocks
# ---------------------------------------------------------------------------

class VirtualClock:
    """Manually advanced clock for deterministic, faster-than-realtime runs."""

    def __init__(self, start: float = 0.0):
        self._now = start

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("cannot advance a clock backwards")
        self._now += dt


class WallClock:
    def now(self) -> float:
        return time.monotonic()


# ---------------------------------------------------------------------------
# Devices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeviceDescriptor:
    name: str
    capabilities: frozenset
    source: dict

    def __post_init__(self):
        if not self.name:
            raise ValidationError("device name must be non-empty")
        unknown = set(self.capabilities) - set(DEVICE_CAPABILITIES)
        if unknown:
            raise ValidationError(f"unknown capabilities: {sorted(unknown)}")


class SampleQueue:
    """Ordered consumer queue; one per subscriber, fed by a single producer."""

    def __init__(self):
        self._dq: deque = deque()

    def push(self, sample: GazeSample) -> None:
        self._dq.append(sample)

    def drain(self) -> List[GazeSample]:
        out = list(self._dq)
        self._dq.clear()
        return out

    def __len__(self) -> int:
        return len(self._dq)


class GazeDevice:
    """Base device: lifecycle state, consumer fan-out, calibration hook.

    Subclasses implement :meth:`_produce`, emitting every pending sample with
    clock time <= `until`. `pump()` drives production explicitly (virtual
    clocks); with a wall clock, `start_sampling` spawns a small pump thread.
    """

    def __init__(self, descriptor: DeviceDescriptor, clock=None):
        self.descriptor = descriptor
        self.clock = clock if clock is not None else WallClock()
        self.device_started = False
        self.sampling = False
        self.calibration_log: List[float] = []
        self._queues: List[SampleQueue] = []
        self._sampling_started_at: Optional[float] = None
        self._thread: Optional[threading.Thread] = None
        self._stop_flag = threading.Event()

    # -- lifecycle ----------------------------------------------------------

    def start_device(self) -> None:
        if self.device_started:
            raise StateError(f"device {self.descriptor.name!r} already started")
        self.device_started = True

    def stop_device(self) -> None:
        if not self.device_started:
            raise StateError(f"device {self.descriptor.name!r} not started")
        if self.sampling:
            self.stop_sampling()
        self.device_started = False

    def start_sampling(self) -> None:
        if not self.device_started:
            raise StateError("start_sampling requires a started device")
        if self.sampling:
            raise StateError("sampling already active")
        self.sampling = True
        self._sampling_started_at = self.clock.now()
        self._on_sampling_started()
        if isinstance(self.clock, WallClock):
            self._stop_flag.clear()
            self._thread = threading.Thread(target=self._pump_loop, daemon=True)
            self._thread.start()

    def stop_sampling(self) -> None:
        if not self.sampling:
            raise StateError("sampling not active")
        if self._thread is not None:
            self._stop_flag.set()
            self._thread.join(timeout=2.0)
            self._thread = None
        self.pump()  # flush anything pending up to now
        self.sampling = False

    def calibrate(self) -> float:
        """Record a calibration invocation; succeeds for capable devices."""
        if "calibration" not in self.descriptor.capabilities:
            raise UnsupportedCapabilityError(
                f"device {self.descriptor.name!r} does not support calibration")
        if not self.device_started:
            raise StateError("calibrate requires a started device")
        stamp = self.clock.now()
        self.calibration_log.append(stamp)
        return stamp

    # -- streaming ----------------------------------------------------------

    def subscribe(self) -> SampleQueue:
        queue = SampleQueue()
        self._queues.append(queue)
        return queue

    def pump(self) -> None:
        """Produce and dispatch every sample due by the current clock time."""
        if self.sampling:
            self._produce(self.clock.now())

    def _dispatch(self, sample: GazeSample) -> None:
        for queue in self._queues:
            queue.push(sample)

    def _pump_loop(self) -> None:
        while not self._stop_flag.wait(0.005):
            self.pump()

    # -- subclass hooks -----------------------------------------------------

    def _on_sampling_started(self) -> None:
        pass

    def _produce(self, until: float) -> None:
        raise NotImplementedError


# -- simulated device -------------------------------------------------------

@dataclass(frozen=True)
class FixationScript:
    """Scripted gaze: fixate each target point for its dwell, with linearly
    interpolated saccades in between."""

    targets: tuple  # of ((x, y, z) meters, dwell seconds)
    saccade_duration: float = 0.05
    noise_sigma: float = 0.0
    sample_rate: float = 100.0

    def __post_init__(self):
        if len(self.targets) < 1:
            raise ValidationError("script needs at least one target")
        for point, dwell in self.targets:
            if dwell <= 0:
                raise ValidationError("dwell must be > 0")
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be > 0")
        if self.saccade_duration < 0:
            raise ValidationError("saccade_duration must be >= 0")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")

    @property
    def duration(self) -> float:
        dwell_total = sum(dwell for _, dwell in self.targets)
        return dwell_total + self.saccade_duration * (len(self.targets) - 1)

    def target_point(self, t: float) -> Tuple[float, float, float]:
        """Gaze target at script time t: fixation point or saccade interpolation."""
        cursor = 0.0
        for k, (point, dwell) in enumerate(self.targets):
            if t < cursor + dwell or k == len(self.targets) - 1:
                return point
            cursor += dwell
            if t < cursor + self.saccade_duration:
                frac = (t - cursor) / self.saccade_duration
                nxt = self.targets[k + 1][0]
                return tuple(a + (b - a) * frac for a, b in zip(point, nxt))
            cursor += self.saccade_duration
        return self.targets[-1][0]

    def in_fixation(self, t: float) -> bool:
        cursor = 0.0
        for k, (_, dwell) in enumerate(self.targets):
            if t < cursor + dwell:
                return True
            cursor += dwell
            if k < len(self.targets) - 1:
                if t < cursor + self.saccade_duration:
                    return False
                cursor += self.saccade_duration
        return True


def _normalize(v) -> Tuple[float, float, float]:
    norm = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if norm == 0:
        return (0.0, 0.0, 1.0)
    # builtin floats: repr() of these is what lands in gaze CSVs
    return (float(v[0] / norm), float(v[1] / norm), float(v[2] / norm))


def _perturb_direction(direction, sigma_deg: float, rng: np.random.Generator):
    """Rotate by an angle ~N(0, sigma) about a random axis perpendicular to
    the direction; the angular deviation magnitude is half-normal."""
    if sigma_deg <= 0:
        return direction
    d = np.asarray(direction)
    # Orthonormal basis perpendicular to d
    helper = np.array([1.0, 0.0, 0.0]) if abs(d[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(d, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    axis = math.cos(phi) * e1 + math.sin(phi) * e2
    theta = rng.normal(0.0, math.radians(sigma_deg))
    rotated = d * math.cos(theta) + np.cross(axis, d) * math.sin(theta)
    return _normalize(tuple(rotated))


def simulated_sample(script: FixationScript, t: float, timestamp_ns: int,
                     rng: Optional[np.random.Generator] = None,
                     pupil_mm: float = 4.0) -> GazeSample:
    """One synthetic sample at script time t."""
    point = script.target_point(t)
    fixating = script.in_fixation(t)
    eyes = {}
    for name, origin in EYE_ORIGINS.items():
        direction = _normalize(tuple(p - o for p, o in zip(point, origin)))
        if fixating and rng is not None and script.noise_sigma > 0:
            direction = _perturb_direction(direction, script.noise_sigma, rng)
        eyes[name] = EyeData(origin=origin, direction=direction,
                             pupil_mm=pupil_mm, valid=True)
    return GazeSample(timestamp_ns=timestamp_ns, left=eyes["left"],
                      right=eyes["right"], combined=eyes["combined"])


def simulated_descriptor(name: str = "simulated") -> DeviceDescriptor:
    return DeviceDescriptor(name=name,
                            capabilities=frozenset(DEVICE_CAPABILITIES),
                            source={"kind": "simulated"})


class SimulatedGazeDevice(GazeDevice):
    """Synthetic eye tracker driven by a fixation script.

    Emits samples at the script's rate from the moment sampling starts; the
    script restarts on each start_sampling. The stream ends when the script
    runs out (`finished`).
    """

    def __init__(self, script: FixationScript, clock=None,
                 rng: Optional[np.random.Generator] = None,
                 descriptor: Optional[DeviceDescriptor] = None,
                 pupil_mm: float = 4.0):
        super().__init__(descriptor or simulated_descriptor(), clock)
        self.script = script
        self.rng = rng if rng is not None else np.random.default_rng()
        self.pupil_mm = pupil_mm
        self._next_index = 0

    @property
    def finished(self) -> bool:
        return self._next_index / self.script.sample_rate > self.script.duration

    def _on_sampling_started(self) -> None:
        self._next_index = 0

    def _produce(self, until: float) -> None:
        rel_limit = until - self._sampling_started_at
        base_ns = int(round(self._sampling_started_at * 1e9))
        while True:
            t = self._next_index / self.script.sample_rate
            if t > rel_limit or t > self.script.duration:
                break
            ts = base_ns + int(round(t * 1e9))
            self._dispatch(simulated_sample(self.script, t, ts,
                                            rng=self.rng, pupil_mm=self.pupil_mm))
            self._next_index += 1


# -- replay device ----------------------------------------------------------

class ReplayGazeDevice(GazeDevice):
    """Replays a recorded gaze file, preserving original relative timing,
    or as fast as possible in free-run mode."""

    def __init__(self, path, clock=None, free_run: bool = False,
                 descriptor: Optional[DeviceDescriptor] = None):
        super().__init__(descriptor or DeviceDescriptor(
            name="replay", capabilities=frozenset({"per_eye", "pupil"}),
            source={"kind": "replay", "path": str(path)}), clock)
        self.path = Path(path)
        self.free_run = free_run
        self._iterator: Optional[Iterator[GazeSample]] = None
        self._pending: Optional[GazeSample] = None
        self._first_ts: Optional[int] = None
        self.finished = False

    def _on_sampling_started(self) -> None:
        self._iterator = parse_gaze_file(self.path)
        self._pending = None
        self._first_ts = None
        self.finished = False

    def _produce(self, until: float) -> None:
        if self._iterator is None:
            return
        rel_limit = until - self._sampling_started_at
        while True:
            if self._pending is None:
                self._pending = next(self._iterator, None)
                if self._pending is None:
                    self.finished = True
                    return
                if self._first_ts is None:
                    self._first_ts = self._pending.timestamp_ns
            if not self.free_run:
                rel = (self._pending.timestamp_ns - self._first_ts) / 1e9
                if rel > rel_limit:
                    return
            self._dispatch(self._pending)
            self._pending = None


# -- loopback device --------------------------------------------------------

class LoopbackGazeDevice(GazeDevice):
    """External-integration example: samples pushed in come out the stream.

    An adapter for a vendor SDK would call :meth:`push` from its callback;
    the served session uses this to turn client gaze messages into a
    recordable stream.
    """

    def __init__(self, clock=None, descriptor: Optional[DeviceDescriptor] = None):
        super().__init__(descriptor or DeviceDescriptor(
            name="loopback", capabilities=frozenset({"per_eye", "pupil"}),
            source={"kind": "external", "config": {"driver": "loopback"}}), clock)
        self._buffer: deque = deque()

    def push(self, sample: GazeSample) -> None:
        self._buffer.append(sample)
        if self.sampling:
            self.pump()

    def _produce(self, until: float) -> None:
        while self._buffer:
            self._dispatch(self._buffer.popleft())


# ---------------------------------------------------------------------------
# Device registry
# ---------------------------------------------------------------------------

def load_device_registry(path=None) -> Dict[str, DeviceDescriptor]:
    """Device registry from a JSON config file.

    The path comes from the argument or the VISIONSIM_DEVICES environment
    variable; with neither set, a registry holding just the built-in
    simulated device is returned.
    """
    if path is None:
        path = os.environ.get(DEVICES_ENV_VAR)
    if path is None:
        descriptor = simulated_descriptor()
        return {descriptor.name: descriptor}
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise ValidationError("device registry must be a JSON list")
    registry: Dict[str, DeviceDescriptor] = {}
    for item in raw:
        descriptor = DeviceDescriptor(
            name=str(item["name"]),
            capabilities=frozenset(item.get("capabilities", ())),
            source=dict(item.get("source", {"kind": "simulated"})))
        if descriptor.name in registry:
            raise ValidationError(f"duplicate device name {descriptor.name!r}")
        registry[descriptor.name] = descriptor
    return registry


def create_device(descriptor: DeviceDescriptor, clock=None,
                  script: Optional[FixationScript] = None,
                  rng: Optional[np.random.Generator] = None) -> GazeDevice:
    """Instantiate a device from its descriptor."""
    kind = descriptor.source.get("kind")
    if kind == "simulated":
        script = script or FixationScript(targets=(((0.0, 0.0, 1.0), 2.0),))
        return SimulatedGazeDevice(script, clock=clock, rng=rng, descriptor=descriptor)
    if kind == "replay":
        return ReplayGazeDevice(descriptor.source["path"], clock=clock,
                                free_run=bool(descriptor.source.get("free_run", False)),
                                descriptor=descriptor)
    if kind == "external":
        driver = descriptor.source.get("config", {}).get("driver")
        if driver == "loopback":
            return LoopbackGazeDevice(clock=clock, descriptor=descriptor)
        raise NotImplementedError(
            f"external driver {driver!r} is an integration point; "
            "ship an adapter that subclasses GazeDevice (see LoopbackGazeDevice)")
    raise ValidationError(f"unknown device source kind {kind!r}")
