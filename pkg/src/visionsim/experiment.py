"""Experiment control: protocols, session folders, and the scene sequencer.

A protocol is an ordered list of (scene_id, parameter) entries, run either
sequentially or in a seeded shuffle. The controller owns the current position
in the resolved order, answers commands (start/next/previous/restart/repeat/
jump/finish), and broadcasts lifecycle events to listeners. Scene handlers
are plain callables bound by id; a handler returning normally counts as scene
completion and permits auto-advance.

Session folders live under a data root, one folder per subject run, with an
underscore-decimal suffix on collisions ("S01", "S01_1", ...). Per-scene data
goes into ``session_dir/<scene_name>/``.
"""

from __future__ import annotations

import json
import random
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional

from .errors import StateError, ValidationError

ORDER_MODES = ("sequential", "shuffled")
COMMANDS = ("start", "next", "previous", "restart_scene", "repeat_scene", "jump", "finish")

_SUBJECT_ID_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9._-]*")


@dataclass(frozen=True)
class SceneEntry:
    scene_id: str
    parameter: str = ""

    def __post_init__(self):
        if not self.scene_id:
            raise ValidationError("scene_id must be non-empty")


@dataclass(frozen=True)
class Protocol:
    name: str
    scenes: tuple
    order_mode: str = "sequential"
    seed: int = 0

    def __post_init__(self):
        if not self.name:
            raise ValidationError("protocol name must be non-empty")
        if self.order_mode not in ORDER_MODES:
            raise ValidationError(f"order_mode must be one of {ORDER_MODES}, "
                                  f"got {self.order_mode!r}")
        if len(self.scenes) < 1:
            raise ValidationError("protocol needs at least one scene")
        if self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")

    def scene_ids(self) -> List[str]:
        return [entry.scene_id for entry in self.scenes]


def load_protocol(path) -> Protocol:
    """Parse a protocol JSON file: {"name", "order_mode", "seed", "scenes": [...]}."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"protocol file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"protocol file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ValidationError(f"protocol file {path} must hold a JSON object")
    scenes_raw = raw.get("scenes")
    if not isinstance(scenes_raw, list):
        raise ValidationError(f"protocol file {path} needs a 'scenes' list")
    scenes = []
    for i, item in enumerate(scenes_raw):
        if not isinstance(item, dict) or "scene" not in item:
            raise ValidationError(f"scene entry {i} must be an object with a 'scene' key")
        scenes.append(SceneEntry(scene_id=str(item["scene"]),
                                 parameter=str(item.get("parameter", ""))))
    return Protocol(name=str(raw.get("name", "")),
                    scenes=tuple(scenes),
                    order_mode=str(raw.get("order_mode", "sequential")),
                    seed=int(raw.get("seed", 0)))


def save_protocol(protocol: Protocol, path) -> None:
    payload = {
        "name": protocol.name,
        "order_mode": protocol.order_mode,
        "seed": protocol.seed,
        "scenes": [{"scene": e.scene_id, "parameter": e.parameter} for e in protocol.scenes],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def resolve_order(protocol: Protocol) -> List[int]:
    """Scene presentation order as indices into protocol.scenes.

    Sequential mode is the identity; shuffled mode is a deterministic seeded
    permutation (same seed, same order). Always a permutation of 0..n-1.
    """
    order = list(range(len(protocol.scenes)))
    if protocol.order_mode == "shuffled":
        random.Random(protocol.seed).shuffle(order)
    return order


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------

@dataclass
class Session:
    subject_id: str
    demographics: Dict[str, str]
    data_root: Path
    session_dir: Path
    created_at: datetime

    def scene_dir(self, scene_name: str) -> Path:
        d = self.session_dir / scene_name
        d.mkdir(parents=True, exist_ok=True)
        return d


def create_session(subject_id: str, demographics: Mapping[str, str],
                   data_root, protocol_name: Optional[str] = None) -> Session:
    """Create the per-run session folder and its session.json.

    The folder is named after the subject id; if it already exists the
    smallest free underscore-decimal suffix is attached ("S01_1", "S01_2").
    Subject ids must be safe path components (letters, digits, '.', '_', '-',
    starting alphanumeric).
    """
    if not subject_id or not _SUBJECT_ID_RE.fullmatch(subject_id):
        raise ValidationError(
            f"subject_id {subject_id!r} is not a safe path component "
            "(use letters, digits, '.', '_', '-')")
    root = Path(data_root)
    root.mkdir(parents=True, exist_ok=True)

    session_dir = None
    n = 0
    while session_dir is None:
        candidate = root / (subject_id if n == 0 else f"{subject_id}_{n}")
        try:
            candidate.mkdir()
        except FileExistsError:
            n += 1
            continue
        session_dir = candidate

    created_at = datetime.now(timezone.utc)
    session = Session(subject_id=subject_id, demographics=dict(demographics),
                      data_root=root, session_dir=session_dir, created_at=created_at)
    payload = {
        "subject_id": subject_id,
        "demographics": session.demographics,
        "created_at": created_at.isoformat(),
        "protocol": protocol_name,
    }
    (session_dir / "session.json").write_text(json.dumps(payload, indent=2) + "\n")
    return session


# ---------------------------------------------------------------------------
# Demographics input mask descriptors (the setup form is configurable)
# ---------------------------------------------------------------------------

FIELD_TYPES = ("text", "integer", "choice")


@dataclass(frozen=True)
class DemographicField:
    id: str
    label: str
    type: str = "text"
    options: tuple = ()
    required: bool = True

    def __post_init__(self):
        if self.type not in FIELD_TYPES:
            raise ValidationError(f"field type must be one of {FIELD_TYPES}, got {self.type!r}")
        if self.type == "choice" and len(self.options) < 2:
            raise ValidationError(f"choice field {self.id!r} needs at least 2 options")

    def to_dict(self) -> dict:
        return {"id": self.id, "label": self.label, "type": self.type,
                "options": list(self.options), "required": self.required}


DEFAULT_DEMOGRAPHIC_FIELDS = (
    DemographicField("age", "Age", "integer"),
    DemographicField("gender", "Gender", "choice",
                     ("female", "male", "diverse", "prefer not to say")),
    DemographicField("visual_aid", "Habitual visual aid", "choice",
                     ("none", "glasses", "contact lenses"), required=False),
)


def load_demographic_fields(path) -> tuple:
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise ValidationError("demographic field config must be a JSON list")
    fields = []
    for item in raw:
        fields.append(DemographicField(
            id=str(item["id"]), label=str(item.get("label", item["id"])),
            type=str(item.get("type", "text")),
            options=tuple(item.get("options", ())),
            required=bool(item.get("required", True))))
    return tuple(fields)


# ---------------------------------------------------------------------------
# Controller
# ---------------------------------------------------------------------------

EVENT_KINDS = ("experiment_started", "experiment_finished", "scene_loaded", "scene_unloaded")


@dataclass(frozen=True)
class SceneEvent:
    kind: str
    scene_index: int
    scene_id: str
    parameter: str
    timestamp: float


@dataclass
class SceneContext:
    """What a scene handler gets when its scene loads."""

    session: Optional[Session]
    scene_id: str
    parameter: str
    scene_name: str
    store: Dict[str, object] = field(default_factory=dict)


class SceneNamer:
    """Per-session folder names for scene load instances.

    First load of a scene id keeps the bare id; later loads (repeats, second
    protocol entries) get "_1", "_2", ... suffixes, mirroring the session
    folder collision rule.
    """

    def __init__(self):
        self._counts: Dict[str, int] = {}

    def name_for(self, scene_id: str) -> str:
        n = self._counts.get(scene_id, 0)
        self._counts[scene_id] = n + 1
        return scene_id if n == 0 else f"{scene_id}_{n}"


class ExperimentController:
    """Sequences a protocol's scenes and broadcasts lifecycle events.

    State is owned by one session loop; every mutation happens inside
    :meth:`step`, which returns the emitted events (listeners receive the
    same immutable event objects).
    """

    def __init__(self, protocol: Protocol, clock: Callable[[], float] = time.monotonic):
        self.protocol = protocol
        self.order = resolve_order(protocol)
        self.position = -1
        self.started = False
        self.finished = False
        self.store: Dict[str, object] = {}
        self._listeners: List[Callable[[SceneEvent], None]] = []
        self._handlers: Optional[Dict[str, Callable]] = None
        self._clock = clock

    # -- introspection ------------------------------------------------------

    @property
    def current_entry(self) -> Optional[SceneEntry]:
        if not self.started or self.finished or self.position < 0:
            return None
        return self.protocol.scenes[self.order[self.position]]

    @property
    def current_scene_index(self) -> Optional[int]:
        if not self.started or self.finished or self.position < 0:
            return None
        return self.order[self.position]

    def subscribe(self, listener: Callable[[SceneEvent], None]) -> None:
        self._listeners.append(listener)

    # -- handler binding ----------------------------------------------------

    def bind_scene_handlers(self, registry: Mapping[str, Callable]) -> "ExperimentController":
        """Attach a scene_id -> handler map, validating full protocol coverage."""
        missing = sorted(set(self.protocol.scene_ids()) - set(registry))
        if missing:
            raise ValidationError(
                "protocol references unregistered scene ids: " + ", ".join(missing))
        self._handlers = dict(registry)
        return self

    def handler_for(self, scene_id: str) -> Callable:
        if self._handlers is None:
            raise StateError("no scene handlers bound")
        return self._handlers[scene_id]

    # -- the state machine --------------------------------------------------

    def step(self, command: str, jump_to: Optional[int] = None) -> List[SceneEvent]:
        if command not in COMMANDS:
            raise ValueError(f"unknown command {command!r}")
        if command == "start":
            if self.started:
                raise StateError("experiment already started")
            self.started = True
            self.position = 0
            return self._emit([self._event("experiment_started"),
                               self._load_event()])
        if not self.started:
            raise StateError(f"command {command!r} before start")
        if self.finished:
            raise StateError(f"command {command!r} after experiment finished")

        if command == "next":
            if self.position == len(self.order) - 1:
                self.finished = True
                return self._emit([self._unload_event(),
                                   self._event("experiment_finished")])
            events = [self._unload_event()]
            self.position += 1
            events.append(self._load_event())
            return self._emit(events)

        if command == "previous":
            if self.position == 0:
                return []
            events = [self._unload_event()]
            self.position -= 1
            events.append(self._load_event())
            return self._emit(events)

        if command == "restart_scene":
            return self._emit([self._unload_event(), self._load_event()])

        if command == "repeat_scene":
            self.order.insert(self.position + 1, self.order[self.position])
            return []

        if command == "jump":
            if jump_to is None or not 0 <= jump_to < len(self.order):
                raise ValueError(f"jump index {jump_to} out of bounds "
                                 f"for order of length {len(self.order)}")
            events = [self._unload_event()]
            self.position = jump_to
            events.append(self._load_event())
            return self._emit(events)

        # finish
        self.finished = True
        return self._emit([self._unload_event(), self._event("experiment_finished")])

    # -- headless drive -----------------------------------------------------

    def run(self, session: Optional[Session] = None, auto_advance: bool = True,
            namer: Optional[SceneNamer] = None) -> List[SceneEvent]:
        """Run the whole protocol through the bound handlers.

        Each scene's handler is invoked with a :class:`SceneContext`; a
        handler returning normally signals completion and, with auto_advance,
        the controller moves on until the protocol finishes.
        """
        if self._handlers is None:
            raise StateError("bind_scene_handlers must be called before run")
        namer = namer or SceneNamer()
        log: List[SceneEvent] = []
        log.extend(self.step("start"))
        while not self.finished:
            entry = self.current_entry
            ctx = SceneContext(session=session, scene_id=entry.scene_id,
                               parameter=entry.parameter,
                               scene_name=namer.name_for(entry.scene_id),
                               store=self.store)
            self.handler_for(entry.scene_id)(ctx)
            if not auto_advance:
                break
            log.extend(self.step("next"))
        return log

    # -- internals ----------------------------------------------------------

    def _event(self, kind: str) -> SceneEvent:
        return SceneEvent(kind=kind, scene_index=-1, scene_id="", parameter="",
                          timestamp=self._clock())

    def _scene_event(self, kind: str) -> SceneEvent:
        idx = self.order[self.position]
        entry = self.protocol.scenes[idx]
        return SceneEvent(kind=kind, scene_index=idx, scene_id=entry.scene_id,
                          parameter=entry.parameter, timestamp=self._clock())

    def _load_event(self) -> SceneEvent:
        return self._scene_event("scene_loaded")

    def _unload_event(self) -> SceneEvent:
        return self._scene_event("scene_unloaded")

    def _emit(self, events: List[SceneEvent]) -> List[SceneEvent]:
        for event in events:
            for listener in self._listeners:
                listener(event)
        return events
