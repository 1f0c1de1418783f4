"""Session engine: headless runs, the message protocol, and trace replay."""

import json

import pytest

from visionsim.engine import (
    DEFAULT_HEADLESS_TRIALS,
    PACKAGED_DATA_DIR,
    EngineConfig,
    SessionEngine,
    _scene_seed,
    replay_trace,
    validate_setup,
)
from visionsim.errors import StateError, ValidationError
from visionsim.experiment import Protocol, SceneEntry, load_protocol
from visionsim.gaze import load_gaze_file
from visionsim.optics import AutofocalConfig
from visionsim.task import read_trials_csv


@pytest.fixture
def protocol():
    return load_protocol(PACKAGED_DATA_DIR / "demo_protocol.json")


@pytest.fixture
def fast_config():
    return EngineConfig(n_trials=3, baseline_duration=0.2)


def make_engine(protocol, tmp_path, config, seed=0):
    return SessionEngine(protocol, tmp_path / "sessions", seed=seed, config=config)


class TraceClient:
    """Builds client envelopes with a running seq and timestamp."""

    def __init__(self, engine):
        self.engine = engine
        self.seq = 0
        self.t = 0.0
        self.sent = []
        self.received = []

    def send(self, msg_type, payload=None, dt=0.1):
        self.seq += 1
        self.t += dt
        envelope = {"type": msg_type, "seq": self.seq, "timestamp": self.t,
                    "payload": payload or {}}
        self.sent.append(envelope)
        replies = self.engine.handle_message(envelope)
        self.received.extend(replies)
        return replies

    def last_of(self, msg_type):
        matches = [m for m in self.received if m["type"] == msg_type]
        return matches[-1] if matches else None

    def run_session(self, subject="S01"):
        """Drive the demo protocol to the finished state."""
        self.send("session_start", {"subject": subject})
        self.send("command", {"command": "next"})  # main_menu -> baseline
        self.send("gaze_proxy", {"screen": "display"})
        replies = self.send("command", {"command": "next"})  # -> matching_task
        trial = [m for m in replies if m["type"] == "trial_present"][0]
        while trial is not None:
            self.send("gaze_proxy", {"screen": "smartphone"}, dt=0.01)
            replies = self.send("trial_response", {"response": "match"}, dt=0.5)
            presents = [m for m in replies if m["type"] == "trial_present"]
            trial = presents[0] if presents else None
        q = self.last_of("questionnaire_present")["payload"]
        answers = {item["id"]: (item["min"] + item["max"]) // 2
                   for item in q["items"]}
        self.send("questionnaire_answers", {"answers": answers})


class TestHeadlessRun:
    def test_writes_the_full_artifact_tree(self, protocol, tmp_path, fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        session = engine.run_headless()
        root = session.session_dir
        assert (root / "session.json").is_file()
        assert sorted(p.name for p in root.iterdir() if p.is_dir()) == [
            "baseline", "main_menu", "matching_task", "questionnaire"]
        assert (root / "baseline" / "gaze.csv").is_file()
        assert (root / "matching_task" / "trials.csv").is_file()
        assert (root / "matching_task" / "gaze.csv").is_file()
        assert (root / "matching_task" / "block_summary.json").is_file()
        assert (root / "questionnaire" / "responses_TLX.json").is_file()

    def test_artifact_contents_are_consistent(self, protocol, tmp_path, fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        session = engine.run_headless()
        root = session.session_dir
        trials = read_trials_csv(root / "matching_task" / "trials.csv")
        assert len(trials) == 3
        summary = json.loads((root / "matching_task" / "block_summary.json").read_text())
        assert summary["n_trials"] == 3
        correct = sum(t["correct"] for t in trials)
        assert summary["proportion_correct"] == pytest.approx(correct / 3)
        baseline = load_gaze_file(root / "baseline" / "gaze.csv")
        assert len(baseline) >= 20  # 0.2 s at 100 Hz, inclusive endpoints
        task_gaze = load_gaze_file(root / "matching_task" / "gaze.csv")
        assert len(task_gaze) > 100
        responses = json.loads((root / "questionnaire" / "responses_TLX.json").read_text())
        assert responses["abbreviation"] == "TLX"
        assert len(responses["answers"]) == 6

    def test_same_seed_same_records(self, protocol, tmp_path, fast_config):
        a = make_engine(protocol, tmp_path / "a", fast_config, seed=5).run_headless()
        b = make_engine(protocol, tmp_path / "b", fast_config, seed=5).run_headless()
        for rel in ("matching_task/trials.csv", "matching_task/gaze.csv",
                    "baseline/gaze.csv"):
            assert ((a.session_dir / rel).read_bytes()
                    == (b.session_dir / rel).read_bytes())

    def test_different_seeds_differ(self, protocol, tmp_path, fast_config):
        a = make_engine(protocol, tmp_path / "a", fast_config, seed=1).run_headless()
        b = make_engine(protocol, tmp_path / "b", fast_config, seed=2).run_headless()
        assert ((a.session_dir / "matching_task" / "trials.csv").read_bytes()
                != (b.session_dir / "matching_task" / "trials.csv").read_bytes())

    def test_repeated_subjects_get_suffixed_folders(self, protocol, tmp_path,
                                                    fast_config):
        a = make_engine(protocol, tmp_path, fast_config).run_headless("demo")
        b = make_engine(protocol, tmp_path, fast_config).run_headless("demo")
        assert a.session_dir.name == "demo"
        assert b.session_dir.name == "demo_1"

    def test_engine_is_single_shot(self, protocol, tmp_path, fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        engine.run_headless()
        with pytest.raises(StateError):
            engine.run_headless()

    def test_task_parameter_overrides_trial_count(self, tmp_path, fast_config):
        protocol = Protocol(name="short", scenes=(
            SceneEntry("matching_task", "2"),))
        session = make_engine(protocol, tmp_path, fast_config).run_headless()
        trials = read_trials_csv(session.session_dir / "matching_task" / "trials.csv")
        assert len(trials) == 2

    def test_default_trial_count(self, tmp_path):
        protocol = Protocol(name="short", scenes=(SceneEntry("matching_task"),))
        session = SessionEngine(protocol, tmp_path / "s").run_headless()
        trials = read_trials_csv(session.session_dir / "matching_task" / "trials.csv")
        assert len(trials) == DEFAULT_HEADLESS_TRIALS

    def test_bad_task_parameter_rejected(self, tmp_path, fast_config):
        protocol = Protocol(name="bad", scenes=(SceneEntry("matching_task", "lots"),))
        engine = make_engine(protocol, tmp_path, fast_config)
        with pytest.raises(ValidationError, match="trial count"):
            engine.run_headless()

    def test_repeated_scene_ids_get_distinct_folders(self, tmp_path, fast_config):
        protocol = Protocol(name="twice", scenes=(
            SceneEntry("matching_task", "2"), SceneEntry("matching_task", "2")))
        session = make_engine(protocol, tmp_path, fast_config).run_headless()
        dirs = sorted(p.name for p in session.session_dir.iterdir() if p.is_dir())
        assert dirs == ["matching_task", "matching_task_1"]
        first = (session.session_dir / "matching_task" / "trials.csv").read_bytes()
        second = (session.session_dir / "matching_task_1" / "trials.csv").read_bytes()
        assert first != second  # per-visit seeds differ


class TestSceneSeeds:
    def test_deterministic(self):
        assert _scene_seed(3, 1) == _scene_seed(3, 1)

    def test_distinct_across_counters_and_salts(self):
        seeds = {_scene_seed(0, c, salt) for c in range(5) for salt in (0, 7)}
        assert len(seeds) == 10


class TestMessageProtocol:
    def test_session_start_reports_first_scene(self, protocol, tmp_path, fast_config):
        client = TraceClient(make_engine(protocol, tmp_path, fast_config))
        replies = client.send("session_start", {"subject": "S01"})
        assert [m["type"] for m in replies] == ["scene_state"]
        state = replies[0]["payload"]
        assert state["status"] == "running"
        assert state["scene"] == "main_menu"
        assert state["position"] == 0
        assert state["total"] == 4
        assert state["layout"]["screens"][0]["name"] == "smartphone"
        assert state["geometry"]["image_width"] == 720

    def test_server_envelopes_carry_seq_and_client_time(self, protocol, tmp_path,
                                                        fast_config):
        client = TraceClient(make_engine(protocol, tmp_path, fast_config))
        client.send("session_start", {"subject": "S01"})
        client.send("command", {"command": "next"})
        seqs = [m["seq"] for m in client.received]
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)
        assert client.received[-1]["timestamp"] == client.t

    def test_duplicate_seq_is_ignored(self, protocol, tmp_path, fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        envelope = {"type": "session_start", "seq": 1, "timestamp": 0.1,
                    "payload": {"subject": "S01"}}
        first = engine.handle_message(envelope)
        assert len(first) == 1
        assert engine.handle_message(envelope) == []
        assert engine.handle_message(dict(envelope, payload={"subject": "S02"})) == []

    def test_malformed_envelopes_get_error_replies(self, protocol, tmp_path,
                                                   fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        for raw in (None, [], "hi",
                    {"seq": 1, "timestamp": 0.0},
                    {"type": "command", "timestamp": 0.0},
                    {"type": "command", "seq": True, "timestamp": 0.0},
                    {"type": "command", "seq": 1},
                    {"type": "command", "seq": 1, "timestamp": 0.0, "payload": 3}):
            replies = engine.handle_message(raw)
            assert [m["type"] for m in replies] == ["error"]

    def test_error_reply_echoes_client_seq(self, protocol, tmp_path, fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        replies = engine.handle_message(
            {"type": "bogus_type", "seq": 41, "timestamp": 0.5, "payload": {}})
        assert replies[0]["type"] == "error"
        assert replies[0]["payload"]["seq"] == 41

    def test_invalid_envelope_does_not_burn_its_seq(self, protocol, tmp_path,
                                                    fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        engine.handle_message({"type": "command", "seq": 1})  # invalid: no timestamp
        replies = engine.handle_message(
            {"type": "session_start", "seq": 1, "timestamp": 0.1,
             "payload": {"subject": "S01"}})
        assert [m["type"] for m in replies] == ["scene_state"]

    def test_command_requires_session(self, protocol, tmp_path, fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        replies = engine.handle_message(
            {"type": "command", "seq": 1, "timestamp": 0.0,
             "payload": {"command": "next"}})
        assert replies[0]["type"] == "error"
        assert "session_start" in replies[0]["payload"]["message"]

    def test_restart_alias_reloads_scene(self, protocol, tmp_path, fast_config):
        client = TraceClient(make_engine(protocol, tmp_path, fast_config))
        client.send("session_start", {"subject": "S01"})
        replies = client.send("command", {"command": "restart"})
        state = [m for m in replies if m["type"] == "scene_state"][0]["payload"]
        assert state["scene"] == "main_menu"
        assert state["scene_name"] == "main_menu_1"

    def test_trial_response_outside_task_is_guarded(self, protocol, tmp_path,
                                                    fast_config):
        client = TraceClient(make_engine(protocol, tmp_path, fast_config))
        client.send("session_start", {"subject": "S01"})
        replies = client.send("trial_response", {"response": "match"})
        assert replies[0]["type"] == "error"
        # the guard must not advance the experiment
        assert client.engine.controller.position == 0

    def test_gaze_proxy_screen_name_sets_target(self, protocol, tmp_path,
                                                fast_config):
        client = TraceClient(make_engine(protocol, tmp_path, fast_config))
        client.send("session_start", {"subject": "S01"})
        replies = client.send("gaze_proxy", {"screen": "smartphone"})
        state = [m for m in replies if m["type"] == "autofocal_state"][0]["payload"]
        assert state["target_vergence"] == pytest.approx(1.0 / 0.3)
        # default controller is instant, so the lens lands at once
        assert state["lens_power"] == pytest.approx(1.0 / 0.3)
        assert state["focus_distance"] == pytest.approx(0.3)
        assert state["algorithm"] == "instant"
        assert len(state["per_screen_blur"]) == 3

    def test_gaze_proxy_pixels_hit_screens(self, protocol, tmp_path, fast_config):
        client = TraceClient(make_engine(protocol, tmp_path, fast_config))
        client.send("session_start", {"subject": "S01"})
        # view center lands on the display screen (1 m straight ahead)
        replies = client.send("gaze_proxy", {"x": 360, "y": 225})
        state = [m for m in replies if m["type"] == "autofocal_state"][0]["payload"]
        assert state["target_vergence"] == pytest.approx(1.0)
        # top-left corner misses every screen: background depth
        replies = client.send("gaze_proxy", {"x": 0, "y": 0})
        state = [m for m in replies if m["type"] == "autofocal_state"][0]["payload"]
        assert state["target_vergence"] == pytest.approx(0.1)

    def test_gaze_proxy_rejects_out_of_view_coordinates(self, protocol, tmp_path,
                                                        fast_config):
        client = TraceClient(make_engine(protocol, tmp_path, fast_config))
        client.send("session_start", {"subject": "S01"})
        replies = client.send("gaze_proxy", {"x": 720, "y": 10})
        assert replies[0]["type"] == "error"
        replies = client.send("gaze_proxy", {"x": -1, "y": 10})
        assert replies[0]["type"] == "error"

    def test_gaze_proxy_unknown_screen(self, protocol, tmp_path, fast_config):
        client = TraceClient(make_engine(protocol, tmp_path, fast_config))
        client.send("session_start", {"subject": "S01"})
        replies = client.send("gaze_proxy", {"screen": "mirror"})
        assert replies[0]["type"] == "error"

    def test_trial_present_withholds_the_answer(self, protocol, tmp_path,
                                                fast_config):
        client = TraceClient(make_engine(protocol, tmp_path, fast_config))
        client.send("session_start", {"subject": "S01"})
        client.send("command", {"command": "next"})
        replies = client.send("command", {"command": "next"})
        present = [m for m in replies if m["type"] == "trial_present"][0]
        assert "is_match" not in present["payload"]
        assert set(present["payload"]["table"].keys()) == {
            "0", "45", "90", "135", "180", "225", "270", "315"}

    def test_full_session_writes_artifacts_and_scores(self, protocol, tmp_path,
                                                      fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        client = TraceClient(engine)
        client.run_session()
        state = client.last_of("scene_state")["payload"]
        assert state["status"] == "finished"
        root = engine.session.session_dir
        trials = read_trials_csv(root / "matching_task" / "trials.csv")
        assert len(trials) == 3
        # the scripted client always answers "match"
        assert all(t["response"] == "match" for t in trials)
        assert all(t["correct"] == t["is_match"] for t in trials)
        # response_time comes from client timestamps: 0.01 + 0.5 per trial
        assert all(t["response_time"] == pytest.approx(0.51) for t in trials)
        gaze = load_gaze_file(root / "matching_task" / "gaze.csv")
        assert len(gaze) == 3
        assert all(s.vendor_extras == "smartphone" for s in gaze)
        responses = json.loads(
            (root / "questionnaire" / "responses_TLX.json").read_text())
        assert all(v == 11 for v in responses["answers"].values())

    def test_questionnaire_rejects_incomplete_answers(self, protocol, tmp_path,
                                                      fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        client = TraceClient(engine)
        client.send("session_start", {"subject": "S01"})
        client.send("command", {"command": "jump", "jump_to": 3})
        replies = client.send("questionnaire_answers",
                              {"answers": {"mental_demand": 10}})
        assert replies[0]["type"] == "error"
        assert "physical_demand" in replies[0]["payload"]["message"]
        # still on the questionnaire scene
        assert client.engine.controller.position == 3

    def test_questionnaire_rejects_unknown_item(self, protocol, tmp_path,
                                                fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        client = TraceClient(engine)
        client.send("session_start", {"subject": "S01"})
        client.send("command", {"command": "jump", "jump_to": 3})
        replies = client.send("questionnaire_answers",
                              {"answers": {"vibes": 3}})
        assert replies[0]["type"] == "error"


class TestTicks:
    def test_no_broadcast_outside_task_scene(self, protocol, tmp_path, fast_config):
        engine = make_engine(protocol, tmp_path, fast_config)
        client = TraceClient(engine)
        client.send("session_start", {"subject": "S01"})
        assert engine.tick(0.0) == []
        assert engine.tick(0.05) == []

    def test_task_scene_broadcasts_autofocal_state(self, protocol, tmp_path):
        config = EngineConfig(n_trials=3,
                              autofocal=AutofocalConfig(algorithm="slew_limited",
                                                        slew_rate=10.0))
        engine = make_engine(protocol, tmp_path, config)
        client = TraceClient(engine)
        client.send("session_start", {"subject": "S01"})
        client.send("command", {"command": "jump", "jump_to": 2})
        client.send("gaze_proxy", {"screen": "smartphone"}, dt=1e-6)
        first = engine.tick(0.0)
        assert [m["type"] for m in first] == ["autofocal_state"]
        stepped = engine.tick(0.05)
        # slew limit: 10 D/s * 0.05 s = 0.5 D progress between ticks
        delta = (stepped[0]["payload"]["lens_power"]
                 - first[0]["payload"]["lens_power"])
        assert 0.0 < delta <= 0.5 + 1e-9


class TestTraceReplay:
    def test_replay_reproduces_records_and_replies(self, protocol, tmp_path,
                                                   fast_config):
        engine = make_engine(protocol, tmp_path / "live", fast_config, seed=3)
        client = TraceClient(engine)
        client.run_session()
        live_root = engine.session.session_dir

        session, replies = replay_trace(protocol, client.sent,
                                        tmp_path / "replayed" / "sessions",
                                        seed=3, config=fast_config)
        for rel in ("matching_task/trials.csv", "matching_task/gaze.csv",
                    "questionnaire/responses_TLX.json"):
            live = (live_root / rel).read_bytes()
            replayed = (session.session_dir / rel).read_bytes()
            if rel.endswith("responses_TLX.json"):
                # completion stamps are wall-clock; compare all but that line
                live = b"\n".join(l for l in live.splitlines()
                                  if b"completed_at" not in l)
                replayed = b"\n".join(l for l in replayed.splitlines()
                                      if b"completed_at" not in l)
            assert live == replayed, rel
        assert [m["type"] for m in replies] == [m["type"] for m in client.received]


class TestValidateSetup:
    def test_packaged_demo_is_clean(self, protocol):
        assert validate_setup(protocol=protocol) == []

    def test_unknown_scene_id(self):
        p = Protocol(name="x", scenes=(SceneEntry("warp_room"),))
        problems = validate_setup(protocol=p)
        assert any("warp_room" in s for s in problems)

    def test_missing_questionnaire_file(self):
        p = Protocol(name="x", scenes=(SceneEntry("questionnaire", "NOPE"),))
        problems = validate_setup(protocol=p)
        assert any("NOPE.json" in s for s in problems)

    def test_bad_task_parameter(self):
        p = Protocol(name="x", scenes=(SceneEntry("matching_task", "-3"),))
        problems = validate_setup(protocol=p)
        assert any("trial" in s for s in problems)

    def test_unreadable_protocol_path(self, tmp_path):
        problems = validate_setup(tmp_path / "missing.json")
        assert len(problems) == 1

    def test_broken_device_registry(self, protocol, tmp_path):
        bad = tmp_path / "devices.json"
        bad.write_text('[{"name": "a"}, {"name": "a"}]')
        problems = validate_setup(protocol=protocol, devices_path=bad)
        assert any("device registry" in s for s in problems)


class TestEngineConfig:
    def test_requires_exactly_one_focus_mode(self):
        with pytest.raises(ValidationError):
            EngineConfig(autofocal=None)
        with pytest.raises(ValidationError):
            EngineConfig(fixed_focus_m=1.0)

    def test_fixed_focus_variant(self):
        config = EngineConfig(autofocal=None, fixed_focus_m=0.5)
        assert config.fixed_focus_m == 0.5
