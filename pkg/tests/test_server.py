"""WebSocket host: handshake, roles, live loop, recorded file integrity."""

from __future__ import annotations

import io
import time

import pytest
from fastapi.testclient import TestClient

from fishtank.capture import RawSample
from fishtank.protocol import (
    ERR_MALFORMED,
    ERR_UNAUTHORIZED,
    ERR_UNSUPPORTED_VERSION,
    Control,
    Error,
    EventNotice,
    Hello,
    InputSample,
    StateUpdate,
    TherapistOverride,
    Welcome,
    decode,
    encode,
)
from fishtank.server import create_app
from fishtank.session import load_session, replay_session


def text(msg) -> str:
    return encode(msg).decode()


def drain_until(ws, predicate, limit: int = 600):
    for _ in range(limit):
        msg = decode(ws.receive_text())
        if predicate(msg):
            return msg
    raise AssertionError("expected message never arrived")


def open_session(client, session_id: str, kind: str = "patient"):
    ws = client.websocket_connect(f"/session/{session_id}")
    sock = ws.__enter__()
    sock.send_text(text(Hello(client_kind=kind)))
    welcome = decode(sock.receive_text())
    assert isinstance(welcome, Welcome)
    assert welcome.session_id == session_id
    return ws, sock


class TestHandshake:
    def test_welcome_carries_config(self, tmp_path):
        app = create_app(data_dir=str(tmp_path))
        with TestClient(app) as client:
            with client.websocket_connect("/session/h1") as ws:
                ws.send_text(text(Hello(client_kind="patient")))
                welcome = decode(ws.receive_text())
                assert isinstance(welcome, Welcome)
                assert welcome.config["tick_rate"] == 60.0

    def test_version_mismatch_rejected(self, tmp_path):
        app = create_app(data_dir=str(tmp_path))
        with TestClient(app) as client:
            with client.websocket_connect("/session/h2") as ws:
                ws.send_text(text(Hello(client_kind="patient", protocol_version="mrr/2")))
                err = decode(ws.receive_text())
                assert isinstance(err, Error)
                assert err.code == ERR_UNSUPPORTED_VERSION

    def test_first_message_must_be_hello(self, tmp_path):
        app = create_app(data_dir=str(tmp_path))
        with TestClient(app) as client:
            with client.websocket_connect("/session/h3") as ws:
                ws.send_text(text(Control(action="start")))
                err = decode(ws.receive_text())
                assert isinstance(err, Error)
                assert err.code == ERR_MALFORMED

    def test_garbage_after_hello(self, tmp_path):
        app = create_app(data_dir=str(tmp_path))
        with TestClient(app) as client:
            ws, sock = open_session(client, "h4")
            try:
                sock.send_text("{not json")
                err = drain_until(sock, lambda m: isinstance(m, Error))
                assert err.code == ERR_MALFORMED
            finally:
                ws.__exit__(None, None, None)


class TestRoles:
    def test_patient_cannot_override(self, tmp_path):
        app = create_app(data_dir=str(tmp_path))
        with TestClient(app) as client:
            ws, sock = open_session(client, "r1", kind="patient")
            try:
                sock.send_text(text(TherapistOverride(patch={"v_min": 0.05})))
                err = drain_until(sock, lambda m: isinstance(m, Error))
                assert err.code == ERR_UNAUTHORIZED
            finally:
                ws.__exit__(None, None, None)
            # the connection died, the session did not
            live = app.state.sessions["r1"]
            assert not live.finished
            ws2, sock2 = open_session(client, "r1", kind="therapist")
            ws2.__exit__(None, None, None)

    def test_therapist_override_applies(self, tmp_path):
        app = create_app(data_dir=str(tmp_path))
        with TestClient(app) as client:
            ws, sock = open_session(client, "r2", kind="therapist")
            try:
                sock.send_text(text(TherapistOverride(patch={"v_min": 0.07})))
                sock.send_text(text(Control(action="start")))
                drain_until(sock, lambda m: isinstance(m, EventNotice))
            finally:
                ws.__exit__(None, None, None)
            live = app.state.sessions["r2"]
            assert live.cfg.difficulty.v_min == 0.07
            assert live.engine.cfg.difficulty.v_min == 0.07


class TestLiveLoop:
    def test_samples_drive_state_and_file_replays(self, tmp_path):
        app = create_app(data_dir=str(tmp_path))
        with TestClient(app) as client:
            ws, sock = open_session(client, "live1", kind="patient")
            try:
                sock.send_text(text(Control(action="start")))
                started = drain_until(
                    sock,
                    lambda m: isinstance(m, EventNotice)
                    and m.event.kind.value == "session_started",
                )
                assert started.event.t == 0.0
                # hand parked at (0.5, 0.3): the estimate should settle there
                for _ in range(40):
                    sock.send_text(
                        text(InputSample(RawSample(t=0.0, u=0.5, v=0.3, valid=True)))
                    )
                    update = drain_until(sock, lambda m: isinstance(m, StateUpdate))
                    if update.tick >= 30:
                        break
                assert update.tick >= 30
                assert update.hand_pos.x == pytest.approx(0.5, abs=0.05)
                assert update.hand_pos.y == pytest.approx(0.3, abs=0.05)
                sock.send_text(text(Control(action="end")))
                drain_until(
                    sock,
                    lambda m: isinstance(m, EventNotice)
                    and m.event.kind.value == "session_ended",
                )
            finally:
                ws.__exit__(None, None, None)

        record = load_session(io.StringIO((tmp_path / "live1.jsonl").read_text()))
        assert record.ok and not record.truncated
        assert record.raw
        kinds = [ev.kind.value for ev in record.events]
        assert "session_started" in kinds and "session_ended" in kinds
        assert "tracking_recovered" in kinds
        result = replay_session(record)
        assert result.ok

    def test_pause_stops_ticking(self, tmp_path):
        app = create_app(data_dir=str(tmp_path))
        with TestClient(app) as client:
            ws, sock = open_session(client, "live2", kind="patient")
            try:
                sock.send_text(text(Control(action="start")))
                first = drain_until(sock, lambda m: isinstance(m, StateUpdate))
                sock.send_text(text(Control(action="pause")))
                live = app.state.sessions["live2"]
                deadline = time.time() + 2.0
                while live.running and time.time() < deadline:
                    time.sleep(0.01)
                assert not live.running
                sock.send_text(text(Control(action="resume")))
                later = drain_until(
                    sock, lambda m: isinstance(m, StateUpdate) and m.tick > first.tick
                )
                assert later.t > first.t
            finally:
                ws.__exit__(None, None, None)

    def test_shutdown_finalizes_open_sessions(self, tmp_path):
        app = create_app(data_dir=str(tmp_path))
        with TestClient(app) as client:
            ws, sock = open_session(client, "live3", kind="patient")
            sock.send_text(text(Control(action="start")))
            drain_until(sock, lambda m: isinstance(m, StateUpdate))
            ws.__exit__(None, None, None)
        record = load_session(io.StringIO((tmp_path / "live3.jsonl").read_text()))
        assert record.ok and not record.truncated
        ended = [ev for ev in record.events if ev.kind.value == "session_ended"]
        assert len(ended) == 1
        assert ended[0].data["reason"] == "shutdown"
