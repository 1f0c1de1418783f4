"""HTTP + WebSocket session service."""

import json

import pytest
from fastapi.testclient import TestClient

from visionsim import __version__
from visionsim.engine import EngineConfig
from visionsim.service import create_app
from visionsim.task import read_trials_csv


@pytest.fixture
def client(tmp_path):
    app = create_app(sessions_root=tmp_path / "sessions",
                     config=EngineConfig(n_trials=2))
    with TestClient(app) as c:
        c.sessions_root = tmp_path / "sessions"
        yield c


def envelope(msg_type, seq, t, payload=None):
    return {"type": msg_type, "seq": seq, "timestamp": t, "payload": payload or {}}


class TestRest:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert body["version"] == __version__

    def test_protocol_endpoint(self, client):
        body = client.get("/api/protocol").json()
        assert [s["scene"] for s in body["scenes"]] == [
            "main_menu", "baseline", "matching_task", "questionnaire"]
        assert body["order_mode"] == "sequential"

    def test_demographics_fields(self, client):
        body = client.get("/api/demographics-fields").json()
        assert [f["id"] for f in body] == ["age", "gender", "visual_aid"]
        assert body[1]["type"] == "choice"
        assert len(body[1]["options"]) >= 2

    def test_validate_default_protocol(self, client):
        response = client.post("/api/validate", json={})
        assert response.json() == {"valid": True, "problems": []}

    def test_validate_reports_problems(self, client, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"name": "x", "scenes": [{"scene": "void"}]}))
        body = client.post("/api/validate",
                           json={"protocol_path": str(bad)}).json()
        assert body["valid"] is False
        assert any("void" in p for p in body["problems"])


class TestWebSocket:
    def test_session_start_returns_scene_state(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.send_json(envelope("session_start", 1, 0.1, {"subject": "S01"}))
            msg = ws.receive_json()
            assert msg["type"] == "scene_state"
            assert msg["payload"]["scene"] == "main_menu"
            assert msg["payload"]["status"] == "running"

    def test_gaze_proxy_drives_the_lens(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.send_json(envelope("session_start", 1, 0.1, {"subject": "S01"}))
            ws.receive_json()
            ws.send_json(envelope("gaze_proxy", 2, 0.2, {"screen": "smartphone"}))
            msg = ws.receive_json()
            assert msg["type"] == "autofocal_state"
            assert msg["payload"]["target_vergence"] == pytest.approx(1.0 / 0.3)
            assert msg["payload"]["lens_power"] == pytest.approx(1.0 / 0.3)

    def test_malformed_json_yields_error_and_connection_survives(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.send_text("this is not json")
            msg = ws.receive_json()
            assert msg["type"] == "error"
            ws.send_json(envelope("session_start", 1, 0.1, {"subject": "S01"}))
            assert ws.receive_json()["type"] == "scene_state"

    def test_guarded_response_outside_task(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.send_json(envelope("session_start", 1, 0.1, {"subject": "S01"}))
            ws.receive_json()
            ws.send_json(envelope("trial_response", 2, 0.2, {"response": "match"}))
            msg = ws.receive_json()
            assert msg["type"] == "error"
            assert "trial" in msg["payload"]["message"]

    def test_full_trial_flow_persists_records(self, client):
        with client.websocket_connect("/ws") as ws:
            seq, t = 0, 0.0

            def send(msg_type, payload):
                nonlocal seq, t
                seq += 1
                t += 0.25
                ws.send_json(envelope(msg_type, seq, t, payload))

            send("session_start", {"subject": "S01"})
            ws.receive_json()
            send("command", {"command": "jump", "jump_to": 2})
            state = ws.receive_json()
            assert state["payload"]["scene"] == "matching_task"
            present = ws.receive_json()
            assert present["type"] == "trial_present"
            assert "is_match" not in present["payload"]
            send("trial_response", {"response": "no_match"})
            second = ws.receive_json()
            assert second["type"] == "trial_present"
            assert second["payload"]["trial_id"] == 1
            send("trial_response", {"response": "match"})
            after = ws.receive_json()
            assert after["type"] == "scene_state"
            assert after["payload"]["scene"] == "questionnaire"
            assert ws.receive_json()["type"] == "questionnaire_present"
        trials = read_trials_csv(client.sessions_root / "S01" / "matching_task"
                                 / "trials.csv")
        assert [t["response"] for t in trials] == ["no_match", "match"]
        assert all(t["response_time"] == pytest.approx(0.25) for t in trials)

    def test_disconnect_flushes_open_scene(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.send_json(envelope("session_start", 1, 0.1, {"subject": "S02"}))
            ws.receive_json()
            ws.send_json(envelope("command", 2, 0.2,
                                  {"command": "jump", "jump_to": 2}))
            ws.receive_json()
            ws.receive_json()
            ws.send_json(envelope("trial_response", 3, 0.4, {"response": "match"}))
            ws.receive_json()
        # context exit disconnects mid-task; the partial record must be on disk
        trials = read_trials_csv(client.sessions_root / "S02" / "matching_task"
                                 / "trials.csv")
        assert len(trials) == 1

    def test_each_connection_gets_its_own_session(self, client):
        for subject in ("A1", "A2"):
            with client.websocket_connect("/ws") as ws:
                ws.send_json(envelope("session_start", 1, 0.1,
                                      {"subject": subject}))
                assert ws.receive_json()["type"] == "scene_state"
        assert (client.sessions_root / "A1").is_dir()
        assert (client.sessions_root / "A2").is_dir()

    def test_duplicate_seq_over_socket_is_dropped(self, client):
        with client.websocket_connect("/ws") as ws:
            ws.send_json(envelope("session_start", 1, 0.1, {"subject": "S01"}))
            ws.receive_json()
            ws.send_json(envelope("gaze_proxy", 1, 0.2, {"screen": "tv"}))
            # duplicate seq: no reply; the next distinct message answers first
            ws.send_json(envelope("gaze_proxy", 2, 0.3, {"screen": "display"}))
            msg = ws.receive_json()
            assert msg["payload"]["target_vergence"] == pytest.approx(1.0)


class TestStaticMount:
    def test_static_dir_served_at_root(self, tmp_path):
        static = tmp_path / "dist"
        static.mkdir()
        (static / "index.html").write_text("<html><body>shell</body></html>")
        app = create_app(sessions_root=tmp_path / "sessions", static_dir=static)
        with TestClient(app) as client:
            response = client.get("/")
            assert response.status_code == 200
            assert "shell" in response.text
            assert client.get("/health").json()["status"] == "ok"

    def test_no_static_dir_leaves_root_unmounted(self, client):
        assert client.get("/").status_code == 404
