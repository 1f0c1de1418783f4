"""Session engine: runs a protocol end to end, headless or message-driven.

Headless mode replaces the subject with the synthetic observer and writes the
full artifact set (session.json, per-scene gaze.csv / trials.csv / response
files) in one call. Message mode drives the same controller and persistence
from a client message stream, one envelope at a time; the served WebSocket
session and offline trace replay both use it, which is what makes a served
run reproducible after the fact.

Message envelopes are ``{type, seq, timestamp, payload}`` in both directions.
Client timestamps are authoritative for everything that ends up in trial
records, so a replay of the same trace yields identical records.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from .blur import ViewGeometry
from .errors import StateError, ValidationError
from .experiment import (
    ExperimentController,
    Protocol,
    SceneEvent,
    SceneNamer,
    Session,
    create_session,
    load_protocol,
)
from .gaze import (
    EyeData,
    FixationScript,
    GazeSample,
    SimulatedGazeDevice,
    VirtualClock,
    record_gaze,
)
from .optics import (
    AutofocalConfig,
    FocusState,
    RefractionProfile,
    autofocal_update,
    blur_ellipse,
    vergence_from_distance,
)
from .questionnaire import (
    ResponseSet,
    default_answers,
    load_questionnaire,
    record_responses,
)
from .task import (
    GazeModel,
    ObserverModel,
    SceneLayout,
    TaskConfig,
    Trial,
    TrialResponse,
    generate_trial,
    run_block,
    write_trials_csv,
)

PACKAGED_DATA_DIR = Path(__file__).parent / "data"

SCENE_IDS = ("main_menu", "baseline", "matching_task", "questionnaire")

CLIENT_MESSAGE_TYPES = ("session_start", "command", "gaze_proxy",
                        "trial_response", "questionnaire_answers")

# Client command aliases: the wire protocol uses the short verbs.
_COMMAND_ALIASES = {"restart": "restart_scene", "repeat": "repeat_scene"}

DEFAULT_HEADLESS_TRIALS = 20


@dataclass(frozen=True)
class EngineConfig:
    """Everything a session needs beyond the protocol itself."""

    layout: SceneLayout = field(default_factory=SceneLayout.default_office)
    refraction: RefractionProfile = field(default_factory=RefractionProfile.emmetropic)
    autofocal: Optional[AutofocalConfig] = field(default_factory=AutofocalConfig)
    fixed_focus_m: Optional[float] = None
    observer: ObserverModel = field(default_factory=ObserverModel)
    task: TaskConfig = field(default_factory=TaskConfig)
    gaze: GazeModel = field(default_factory=GazeModel)
    pupil_mm: float = 4.0
    n_trials: int = DEFAULT_HEADLESS_TRIALS
    baseline_duration: float = 2.0
    baseline_noise_sigma: float = 0.3
    geometry: ViewGeometry = field(
        default_factory=lambda: ViewGeometry(90.0, 720, 450))

    def __post_init__(self):
        if (self.autofocal is None) == (self.fixed_focus_m is None):
            raise ValidationError(
                "exactly one of autofocal or fixed_focus_m is required")
        if self.n_trials < 1:
            raise ValidationError("n_trials must be >= 1")
        if self.baseline_duration <= 0:
            raise ValidationError("baseline_duration must be > 0")


def _scene_seed(seed: int, load_counter: int, salt: int = 0) -> int:
    ss = np.random.SeedSequence([seed, load_counter, salt])
    return int(ss.generate_state(1, np.uint64)[0])


class SessionEngine:
    """One experiment session: controller, optics state, artifacts.

    All mutable state is owned by this object; callers (CLI, service loop,
    replay) interact through `run_headless`, `handle_message`, and `tick`,
    never concurrently.
    """

    def __init__(self, protocol: Protocol, sessions_root, *,
                 data_root=None, seed: int = 0,
                 config: Optional[EngineConfig] = None):
        self.protocol = protocol
        self.sessions_root = Path(sessions_root)
        self.data_root = Path(data_root) if data_root else PACKAGED_DATA_DIR
        self.seed = seed
        self.config = config or EngineConfig()
        self.controller = ExperimentController(protocol)
        self.controller.subscribe(self._on_event)
        self.namer = SceneNamer()
        self.session: Optional[Session] = None

        cfg = self.config
        initial_power = (vergence_from_distance(cfg.fixed_focus_m)
                         if cfg.fixed_focus_m is not None else 0.0)
        self.focus = FocusState(lens_power=initial_power,
                                pupil_diameter=cfg.pupil_mm, timestamp=0.0)
        self.target_vergence = initial_power

        self._load_counter = 0
        self._scene: Optional[dict] = None  # active scene runtime
        self._seen_seqs: set = set()
        self._server_seq = 0
        self._outbox: List[dict] = []
        self._client_now = 0.0  # last client timestamp seen, stamps replies
        self._last_gaze_ts: Optional[float] = None
        self._last_tick: Optional[float] = None
        self.server_log: List[dict] = []  # every envelope ever sent

    # ------------------------------------------------------------------
    # Shared scene bookkeeping (controller event subscription)
    # ------------------------------------------------------------------

    def _on_event(self, event: SceneEvent) -> None:
        if event.kind == "scene_loaded":
            self._load_counter += 1
            self._scene = {
                "id": event.scene_id,
                "parameter": event.parameter,
                "name": self.namer.name_for(event.scene_id),
                "counter": self._load_counter,
                "gaze_buffer": [],
                "last_gaze_ns": None,
            }
            if self.session is not None:
                self.session.scene_dir(self._scene["name"])  # folder per scene visit
            if event.scene_id == "matching_task":
                self._open_task_scene()
            elif event.scene_id == "questionnaire":
                self._open_questionnaire_scene()
        elif event.kind == "scene_unloaded":
            self._close_scene()

    def _open_task_scene(self) -> None:
        scene = self._scene
        parameter = scene["parameter"]
        try:
            n = int(parameter) if parameter else self.config.n_trials
        except ValueError:
            raise ValidationError(
                f"matching_task parameter must be a trial count, got {parameter!r}")
        if n < 1:
            raise ValidationError(f"trial count must be >= 1, got {n}")
        scene["n_trials"] = n
        scene["rng"] = np.random.default_rng(
            _scene_seed(self.seed, scene["counter"]))
        scene["records"] = []
        scene["trial"] = None
        scene["presented_ts"] = None

    def _open_questionnaire_scene(self) -> None:
        scene = self._scene
        abbrev = scene["parameter"] or "TLX"
        scene["questionnaire"] = load_questionnaire(
            abbrev, self.data_root / "questionnaires")

    def _close_scene(self) -> None:
        scene = self._scene
        if scene is None or self.session is None:
            self._scene = None
            return
        if scene["id"] == "matching_task" and scene.get("records"):
            write_trials_csv(self.session.scene_dir(scene["name"]) / "trials.csv",
                             scene["records"])
        if scene["gaze_buffer"]:
            record_gaze(scene["gaze_buffer"], self.session, scene["name"])
        self._scene = None

    # ------------------------------------------------------------------
    # Headless run with the synthetic observer
    # ------------------------------------------------------------------

    def run_headless(self, subject: str = "headless",
                     demographics: Optional[dict] = None) -> Session:
        """Execute the whole protocol without a client, writing all artifacts."""
        if self.session is not None:
            raise StateError("session already started")
        self.session = create_session(subject, demographics or {},
                                      self.sessions_root, self.protocol.name)
        self.controller.step("start")
        while not self.controller.finished:
            scene = self._scene
            if scene is None:
                raise StateError("controller running without an active scene")
            if scene["id"] == "baseline":
                self._headless_baseline(scene)
            elif scene["id"] == "matching_task":
                self._headless_block(scene)
            elif scene["id"] == "questionnaire":
                self._headless_questionnaire(scene)
            # main_menu needs no headless action
            self.controller.step("next")
        return self.session

    def _headless_baseline(self, scene: dict) -> None:
        cfg = self.config
        clock = VirtualClock()
        script = FixationScript(
            targets=(((0.0, 0.0, 1.0), cfg.baseline_duration),),
            noise_sigma=cfg.baseline_noise_sigma,
            sample_rate=cfg.gaze.sample_rate)
        rng = np.random.default_rng(_scene_seed(self.seed, scene["counter"], 7))
        device = SimulatedGazeDevice(script, clock=clock, rng=rng,
                                     pupil_mm=cfg.pupil_mm)
        queue = device.subscribe()
        device.start_device()
        device.start_sampling()
        clock.advance(script.duration + 1.0 / script.sample_rate)
        device.pump()
        device.stop_sampling()
        device.stop_device()
        scene["gaze_buffer"].extend(queue.drain())

    def _headless_block(self, scene: dict) -> None:
        cfg = self.config
        records: List[Tuple[Trial, TrialResponse]] = []
        result = run_block(
            scene["n_trials"], cfg.layout, cfg.refraction, cfg.observer,
            config=cfg.task, autofocal=cfg.autofocal,
            fixed_focus_m=cfg.fixed_focus_m, gaze=cfg.gaze,
            seed=_scene_seed(self.seed, scene["counter"]),
            pupil_mm=cfg.pupil_mm,
            gaze_sink=scene["gaze_buffer"].append,
            collect=records)
        scene["records"] = records
        summary = {
            "n_trials": result.n_trials,
            "proportion_correct": result.proportion_correct,
            "per_distance": {repr(d): p for d, p in result.per_distance.items()},
            "mean_response_time": result.mean_response_time,
        }
        scene_dir = self.session.scene_dir(scene["name"])
        (scene_dir / "block_summary.json").write_text(
            json.dumps(summary, indent=2) + "\n")

    def _headless_questionnaire(self, scene: dict) -> None:
        questionnaire = scene["questionnaire"]
        responses = ResponseSet(questionnaire, scene["name"])
        for item_id, value in default_answers(questionnaire).items():
            responses.answer(item_id, value)
        record_responses(responses, self.session)

    # ------------------------------------------------------------------
    # Message-driven mode
    # ------------------------------------------------------------------

    def handle_message(self, raw) -> List[dict]:
        """Process one client envelope; returns the replies to send."""
        self._outbox = []
        seq = raw.get("seq") if isinstance(raw, dict) else None
        try:
            msg_type, seq, timestamp, payload = self._parse_envelope(raw)
        except ValidationError as exc:
            self._send_error(str(exc), seq)
            return self._outbox
        if seq in self._seen_seqs:
            return self._outbox  # duplicate delivery, idempotent
        self._seen_seqs.add(seq)
        self._client_now = max(self._client_now, timestamp)
        try:
            handler = {
                "session_start": self._msg_session_start,
                "command": self._msg_command,
                "gaze_proxy": self._msg_gaze_proxy,
                "trial_response": self._msg_trial_response,
                "questionnaire_answers": self._msg_questionnaire_answers,
            }[msg_type]
        except KeyError:
            self._send_error(f"unknown message type {msg_type!r}", seq)
            return self._outbox
        try:
            handler(payload, timestamp)
        except (ValidationError, StateError, FileNotFoundError) as exc:
            self._send_error(str(exc), seq)
        return self._outbox

    def _parse_envelope(self, raw) -> Tuple[str, int, float, dict]:
        if not isinstance(raw, dict):
            raise ValidationError("message must be a JSON object")
        msg_type = raw.get("type")
        seq = raw.get("seq")
        timestamp = raw.get("timestamp")
        payload = raw.get("payload", {})
        if not isinstance(msg_type, str):
            raise ValidationError("envelope needs a string 'type'")
        if not isinstance(seq, int) or isinstance(seq, bool):
            raise ValidationError("envelope needs an integer 'seq'")
        if not isinstance(timestamp, (int, float)) or isinstance(timestamp, bool):
            raise ValidationError("envelope needs a numeric 'timestamp'")
        if not isinstance(payload, dict):
            raise ValidationError("envelope 'payload' must be an object")
        return msg_type, seq, float(timestamp), payload

    # -- outgoing -------------------------------------------------------

    def _send(self, msg_type: str, payload: dict) -> None:
        self._server_seq += 1
        envelope = {"type": msg_type, "seq": self._server_seq,
                    "timestamp": self._client_now, "payload": payload}
        self._outbox.append(envelope)
        self.server_log.append(envelope)

    def _send_error(self, message: str, seq) -> None:
        self._send("error", {"message": message, "seq": seq})

    def _send_scene_state(self) -> None:
        cfg = self.config
        if self.controller.finished:
            payload = {"status": "finished", "scene": None, "parameter": None,
                       "scene_name": None, "position": None,
                       "total": len(self.controller.order)}
        elif not self.controller.started or self._scene is None:
            payload = {"status": "idle", "scene": None, "parameter": None,
                       "scene_name": None, "position": None,
                       "total": len(self.controller.order)}
        else:
            scene = self._scene
            payload = {
                "status": "running",
                "scene": scene["id"],
                "parameter": scene["parameter"],
                "scene_name": scene["name"],
                "position": self.controller.position,
                "total": len(self.controller.order),
            }
            if scene["id"] == "matching_task":
                payload["n_trials"] = scene["n_trials"]
                payload["trials_done"] = len(scene["records"])
        payload["layout"] = {
            "screens": [{"name": s.name, "distance": s.distance,
                         "angular_size": s.angular_size,
                         "lateral_offset": s.lateral_offset}
                        for s in cfg.layout.screens],
            "background_depth": cfg.layout.background_depth,
        }
        payload["geometry"] = {"horizontal_fov": cfg.geometry.horizontal_fov,
                               "image_width": cfg.geometry.image_width,
                               "image_height": cfg.geometry.image_height}
        self._send("scene_state", payload)

    def _send_autofocal_state(self) -> None:
        cfg = self.config
        power = self.focus.lens_power
        per_screen = []
        for s in cfg.layout.screens:
            ellipse = blur_ellipse(cfg.refraction, power,
                                   vergence_from_distance(s.distance),
                                   cfg.pupil_mm)
            per_screen.append({"screen": s.name, "distance": s.distance,
                               "major_arcmin": ellipse.major,
                               "minor_arcmin": ellipse.minor,
                               "orientation": ellipse.orientation})
        focus_distance = math.inf if power <= 0 else 1.0 / power
        self._send("autofocal_state", {
            "lens_power": power,
            "target_vergence": self.target_vergence,
            "focus_distance": None if math.isinf(focus_distance) else focus_distance,
            "algorithm": (cfg.autofocal.algorithm if cfg.autofocal else "fixed"),
            "per_screen_blur": per_screen,
        })

    def _present_trial(self, presented_ts: float) -> None:
        scene = self._scene
        trial = generate_trial(scene["rng"], self.config.layout, self.config.task,
                               trial_id=len(scene["records"]))
        scene["trial"] = trial
        scene["presented_ts"] = presented_ts
        placements = {
            name: {"anchor": p.anchor, "jitter": list(p.jitter)}
            for name, p in trial.placements.items()}
        # is_match stays server-side; the client answers blind.
        self._send("trial_present", {
            "trial_id": trial.trial_id,
            "table_screen": trial.table_screen,
            "landolt_screen": trial.landolt_screen,
            "sloan_screen": trial.sloan_screen,
            "landolt_orientation": trial.landolt_orientation,
            "sloan_letter": trial.sloan_letter,
            "table": {str(o): letter for o, letter in trial.table.items()},
            "placements": placements,
            "optotype_gap_arcmin": trial.optotype_gap_arcmin,
        })

    def _send_questionnaire(self) -> None:
        self._send("questionnaire_present",
                   self._scene["questionnaire"].to_dict())

    def _after_transition(self, timestamp: float) -> None:
        """Replies owed after any scene transition."""
        self._send_scene_state()
        scene = self._scene
        if scene is None:
            return
        if scene["id"] == "matching_task" and scene["trial"] is None:
            self._present_trial(timestamp)
        elif scene["id"] == "questionnaire":
            self._send_questionnaire()

    # -- client message handlers ---------------------------------------

    def _msg_session_start(self, payload: dict, timestamp: float) -> None:
        if self.session is not None:
            raise StateError("session already started")
        subject = payload.get("subject")
        if not isinstance(subject, str) or not subject:
            raise ValidationError("session_start needs a non-empty 'subject'")
        demographics = payload.get("demographics") or {}
        if not isinstance(demographics, dict):
            raise ValidationError("'demographics' must be an object")
        self.session = create_session(subject, demographics,
                                      self.sessions_root, self.protocol.name)
        self.controller.step("start")
        self._after_transition(timestamp)

    def _msg_command(self, payload: dict, timestamp: float) -> None:
        if self.session is None:
            raise StateError("no active session; send session_start first")
        command = payload.get("command")
        if not isinstance(command, str):
            raise ValidationError("command payload needs a 'command' string")
        command = _COMMAND_ALIASES.get(command, command)
        jump_to = payload.get("jump_to")
        self.controller.step(command, jump_to=jump_to)
        self._after_transition(timestamp)

    def _msg_gaze_proxy(self, payload: dict, timestamp: float) -> None:
        if self.session is None:
            raise StateError("no active session; send session_start first")
        cfg = self.config
        screen_name = payload.get("screen")
        if screen_name is not None:
            matches = [s for s in cfg.layout.screens if s.name == screen_name]
            if not matches:
                raise ValidationError(f"unknown screen {screen_name!r}")
            self.target_vergence = vergence_from_distance(matches[0].distance)
        else:
            x, y = payload.get("x"), payload.get("y")
            if not isinstance(x, (int, float)) or not isinstance(y, (int, float)):
                raise ValidationError("gaze_proxy needs 'screen' or numeric 'x','y'")
            self.target_vergence = self._vergence_from_pixels(float(x), float(y))
        # Controller time base: client timestamps.
        if cfg.autofocal is not None:
            dt = (timestamp - self._last_gaze_ts
                  if self._last_gaze_ts is not None else 1e-3)
            if dt > 0:
                self.focus = autofocal_update(cfg.autofocal, self.focus,
                                              self.target_vergence, dt)
        self._last_gaze_ts = timestamp
        self._buffer_gaze_sample(payload, timestamp)
        self._send_autofocal_state()

    def _vergence_from_pixels(self, x: float, y: float) -> float:
        geometry = self.config.geometry
        layout = self.config.layout
        if not (0 <= x < geometry.image_width and 0 <= y < geometry.image_height):
            raise ValidationError("gaze_proxy coordinates outside the view")
        deg_per_px = geometry.horizontal_fov / geometry.image_width
        azimuth = (x + 0.5 - geometry.image_width / 2.0) * deg_per_px
        elevation = (y + 0.5 - geometry.image_height / 2.0) * deg_per_px
        for screen in layout.screens:
            half_w = screen.angular_size / 2.0
            half_h = screen.angular_size * 0.6 / 2.0
            if (abs(azimuth - screen.lateral_offset) <= half_w
                    and abs(elevation) <= half_h):
                return vergence_from_distance(screen.distance)
        return vergence_from_distance(layout.background_depth)

    def _buffer_gaze_sample(self, payload: dict, timestamp: float) -> None:
        scene = self._scene
        if scene is None or scene["id"] not in ("baseline", "matching_task"):
            return
        ts_ns = int(round(timestamp * 1e9))
        if scene["last_gaze_ns"] is not None and ts_ns <= scene["last_gaze_ns"]:
            return  # proxy resends stay out of the record
        scene["last_gaze_ns"] = ts_ns
        geometry = self.config.geometry
        deg_per_px = geometry.horizontal_fov / geometry.image_width
        x, y = payload.get("x"), payload.get("y")
        if isinstance(x, (int, float)) and isinstance(y, (int, float)):
            azimuth = math.radians((x + 0.5 - geometry.image_width / 2.0) * deg_per_px)
            elevation = -math.radians((y + 0.5 - geometry.image_height / 2.0) * deg_per_px)
        else:
            screen_name = payload.get("screen")
            match = [s for s in self.config.layout.screens
                     if s.name == screen_name]
            azimuth = math.radians(match[0].lateral_offset) if match else 0.0
            elevation = 0.0
        direction = (math.sin(azimuth) * math.cos(elevation),
                     math.sin(elevation),
                     math.cos(azimuth) * math.cos(elevation))
        combined = EyeData(origin=(0.0, 0.0, 0.0), direction=direction,
                           pupil_mm=self.config.pupil_mm, valid=True)
        extras = payload.get("screen") or ""
        scene["gaze_buffer"].append(GazeSample(
            timestamp_ns=ts_ns, left=EyeData.invalid(), right=EyeData.invalid(),
            combined=combined, vendor_extras=extras))

    def _msg_trial_response(self, payload: dict, timestamp: float) -> None:
        scene = self._scene
        if self.session is None:
            raise StateError("no active session; send session_start first")
        if scene is None or scene["id"] != "matching_task" or scene["trial"] is None:
            raise StateError("no matching-task trial awaiting a response")
        response = payload.get("response")
        if response not in ("match", "no_match"):
            raise ValidationError("trial_response 'response' must be "
                                  "'match' or 'no_match'")
        trial = scene["trial"]
        correct = (response == "match") == trial.is_match
        response_time = max(0.0, timestamp - scene["presented_ts"])
        scene["records"].append(
            (trial, TrialResponse(trial_id=trial.trial_id, response=response,
                                  correct=correct, response_time=response_time)))
        scene["trial"] = None
        if len(scene["records"]) < scene["n_trials"]:
            self._present_trial(timestamp)
        else:
            self.controller.step("next")
            self._after_transition(timestamp)

    def _msg_questionnaire_answers(self, payload: dict, timestamp: float) -> None:
        scene = self._scene
        if self.session is None:
            raise StateError("no active session; send session_start first")
        if scene is None or scene["id"] != "questionnaire":
            raise StateError("no questionnaire scene active")
        answers = payload.get("answers")
        if not isinstance(answers, dict):
            raise ValidationError("questionnaire_answers needs an 'answers' object")
        responses = ResponseSet(scene["questionnaire"], scene["name"])
        for item_id, value in answers.items():
            responses.answer(item_id, value)  # raises on unknown id or bad type
        responses.complete()  # raises listing unanswered required items
        record_responses(responses, self.session)
        self.controller.step("next")
        self._after_transition(timestamp)

    # ------------------------------------------------------------------
    # Periodic controller stepping for the live broadcast
    # ------------------------------------------------------------------

    def tick(self, now: float) -> List[dict]:
        """Advance the lens controller to wall time `now`; returns broadcasts.

        The live autofocal_state stream runs only while a task scene is
        active; trial records never depend on it.
        """
        self._outbox = []
        if self._last_tick is not None and self.config.autofocal is not None:
            dt = now - self._last_tick
            if dt > 0:
                self.focus = autofocal_update(self.config.autofocal, self.focus,
                                              self.target_vergence, dt)
        self._last_tick = now
        scene = self._scene
        if scene is not None and scene["id"] == "matching_task":
            self._send_autofocal_state()
        return self._outbox


def replay_trace(protocol: Protocol, messages, sessions_root, *,
                 data_root=None, seed: int = 0,
                 config: Optional[EngineConfig] = None):
    """Feed a recorded client trace through a fresh engine.

    Returns ``(session, server_messages)``; persisted trial records are
    identical to the run that produced the trace.
    """
    engine = SessionEngine(protocol, sessions_root, data_root=data_root,
                           seed=seed, config=config)
    collected: List[dict] = []
    for message in messages:
        collected.extend(engine.handle_message(message))
    return engine.session, collected


# ---------------------------------------------------------------------------
# Setup validation (CLI `validate`, service /api/validate)
# ---------------------------------------------------------------------------

def validate_setup(protocol_path=None, *, protocol: Optional[Protocol] = None,
                   data_root=None, devices_path=None) -> List[str]:
    """Collect human-readable problems with a run setup; empty means valid."""
    problems: List[str] = []
    data_root = Path(data_root) if data_root else PACKAGED_DATA_DIR
    if protocol is None and protocol_path is not None:
        try:
            protocol = load_protocol(protocol_path)
        except ValidationError as exc:
            return [str(exc)]
    if protocol is not None:
        for entry in protocol.scenes:
            if entry.scene_id not in SCENE_IDS:
                problems.append(f"unknown scene id {entry.scene_id!r} "
                                f"(known: {', '.join(SCENE_IDS)})")
            elif entry.scene_id == "questionnaire":
                abbrev = entry.parameter or "TLX"
                path = data_root / "questionnaires" / f"{abbrev}.json"
                if not path.exists():
                    problems.append(f"no questionnaire file at {path}")
                else:
                    try:
                        load_questionnaire(abbrev, data_root / "questionnaires")
                    except ValidationError as exc:
                        problems.append(str(exc))
            elif entry.scene_id == "matching_task" and entry.parameter:
                try:
                    n = int(entry.parameter)
                    if n < 1:
                        raise ValueError
                except ValueError:
                    problems.append(
                        f"matching_task parameter must be a positive trial "
                        f"count, got {entry.parameter!r}")
    if devices_path is not None:
        from .gaze import load_device_registry
        try:
            load_device_registry(devices_path)
        except (ValidationError, OSError, json.JSONDecodeError, KeyError) as exc:
            problems.append(f"device registry: {exc}")
    return problems
