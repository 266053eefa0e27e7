"""WebSocket session host.

One endpoint: /session/{id}. A client introduces itself with Hello (role and
protocol version), gets Welcome back, then patient/simulator clients stream
InputSamples while therapist clients may patch the difficulty config; everyone
receives the downsampled StateUpdates and every event. The game runs here,
authoritatively: one tick loop per session, paced by the wall clock.

Incoming samples are re-stamped with the receiving tick's time, so the session
clock is the server's and recorded sessions replay exactly.
"""

from __future__ import annotations

import asyncio
import os
from contextlib import asynccontextmanager
from dataclasses import replace

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .config import GameConfig
from .game import Engine
from .protocol import (
    ERR_MALFORMED,
    ERR_SLOW_CONSUMER,
    ERR_UNAUTHORIZED,
    ERR_UNSUPPORTED_VERSION,
    Broadcaster,
    Control,
    Error,
    Hello,
    InputSample,
    MalformedMessage,
    TherapistOverride,
    UnauthorizedMessageKind,
    UnsupportedVersion,
    Welcome,
    check_authorized,
    check_version,
    decode,
    encode,
)
from .session import SessionWriter

OUTBOX_LIMIT = 256


class LiveSession:
    def __init__(self, session_id: str, cfg: GameConfig, data_dir: str) -> None:
        self.session_id = session_id
        self.cfg = cfg
        self.engine = Engine(cfg)
        self.broadcaster = Broadcaster(cfg.tick_rate, rate=20.0)
        self.subscribers: list[asyncio.Queue[str]] = []
        self.pending: list[InputSample] = []
        self.running = False
        self.finished = False
        self._task: asyncio.Task | None = None
        path = os.path.join(data_dir, f"{session_id}.jsonl")
        self._fp = open(path, "w", encoding="utf-8")
        self.writer = SessionWriter(self._fp, session_id=session_id, cfg=cfg)

    def subscribe(self) -> asyncio.Queue[str]:
        q: asyncio.Queue[str] = asyncio.Queue(maxsize=OUTBOX_LIMIT)
        self.subscribers.append(q)
        return q

    def unsubscribe(self, q: asyncio.Queue[str]) -> None:
        if q in self.subscribers:
            self.subscribers.remove(q)

    def _publish(self, text: str) -> None:
        for q in list(self.subscribers):
            try:
                q.put_nowait(text)
            except asyncio.QueueFull:
                # slow consumer: cut it loose rather than stall the session
                self.subscribers.remove(q)
                try:
                    q.put_nowait(encode(Error(ERR_SLOW_CONSUMER, "outbound buffer overflow")).decode())
                except asyncio.QueueFull:
                    pass

    def start(self) -> None:
        if self.running or self.finished:
            return
        self.running = True
        if self._task is None:
            for ev in self.engine.start():
                self.writer.record_event(ev)
                self._publish(encode_notice(ev))
            self.writer.record_state(self.engine.state)
            self._task = asyncio.get_running_loop().create_task(self._run())

    def pause(self) -> None:
        self.running = False

    def resume(self) -> None:
        if not self.finished:
            self.running = True

    def end(self, reason: str = "control") -> None:
        if self.finished:
            return
        self.finished = True
        self.running = False
        for ev in self.engine.end(reason):
            self.writer.record_event(ev)
            self._publish(encode_notice(ev))
        self.writer.record_state(self.engine.state, force=True)
        self.writer.close()
        self._fp.close()
        if self._task is not None:
            self._task.cancel()

    def apply_override(self, patch) -> None:
        difficulty = replace(self.cfg.difficulty, **dict(patch))
        self.cfg = replace(self.cfg, difficulty=difficulty)
        self.engine.cfg = self.cfg
        self.writer.record_override(self.engine.state.tick + 1, dict(patch))

    async def _run(self) -> None:
        loop = asyncio.get_running_loop()
        dt = self.cfg.dt
        deadline = loop.time()
        while not self.finished:
            deadline += dt
            await asyncio.sleep(max(0.0, deadline - loop.time()))
            if not self.running:
                deadline = loop.time()
                continue
            batch, self.pending = self.pending, []
            next_t = (self.engine.state.tick + 1) / self.cfg.tick_rate
            samples = []
            for msg in batch:
                s = msg.sample
                samples.append(replace(s, t=next_t))
            tick = self.engine.state.tick + 1
            for s in samples:
                self.writer.record_raw(tick, s)
            state, events = self.engine.tick(samples)
            for ev in events:
                self.writer.record_event(ev)
            self.writer.record_state(state)
            for out in self.broadcaster.feed(state, events):
                self._publish(encode(out).decode())


def encode_notice(ev) -> str:
    from .protocol import EventNotice

    return encode(EventNotice(ev)).decode()


def create_app(data_dir: str = ".", config: GameConfig | None = None) -> FastAPI:
    base_cfg = config or GameConfig()
    sessions: dict[str, LiveSession] = {}

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        for live in sessions.values():
            if not live.finished:
                live.end("shutdown")

    app = FastAPI(lifespan=lifespan)
    app.state.sessions = sessions

    @app.websocket("/session/{session_id}")
    async def session_socket(ws: WebSocket, session_id: str) -> None:
        await ws.accept()
        try:
            hello = decode(await ws.receive_text())
            if not isinstance(hello, Hello):
                raise MalformedMessage("first message must be hello")
            check_version(hello)
        except UnsupportedVersion as exc:
            await ws.send_text(encode(Error(ERR_UNSUPPORTED_VERSION, str(exc))).decode())
            await ws.close()
            return
        except MalformedMessage as exc:
            await ws.send_text(encode(Error(ERR_MALFORMED, str(exc))).decode())
            await ws.close()
            return

        role = hello.client_kind
        live = sessions.get(session_id)
        if live is None:
            live = LiveSession(session_id, base_cfg, data_dir)
            sessions[session_id] = live
        await ws.send_text(encode(Welcome(session_id, live.cfg.to_dict())).decode())

        outbox = live.subscribe()

        async def pump() -> None:
            while True:
                await ws.send_text(await outbox.get())

        sender = asyncio.get_running_loop().create_task(pump())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = decode(raw)
                    check_authorized(role, msg)
                except (MalformedMessage, UnauthorizedMessageKind) as exc:
                    code = (
                        ERR_UNAUTHORIZED
                        if isinstance(exc, UnauthorizedMessageKind)
                        else ERR_MALFORMED
                    )
                    await ws.send_text(encode(Error(code, str(exc))).decode())
                    break
                if isinstance(msg, InputSample):
                    live.pending.append(msg)
                elif isinstance(msg, Control):
                    if msg.action == "start":
                        live.start()
                    elif msg.action == "pause":
                        live.pause()
                    elif msg.action == "resume":
                        live.resume()
                    elif msg.action == "end":
                        live.end()
                elif isinstance(msg, TherapistOverride):
                    live.apply_override(msg.patch)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            live.unsubscribe(outbox)

    return app


def serve(cfg: GameConfig, host: str, port: int, data_dir: str) -> None:
    import uvicorn

    app = create_app(data_dir=data_dir, config=cfg)
    print(f"listening on ws://{host}:{port}/session/{{id}}")
    uvicorn.run(app, host=host, port=port, log_level="warning")
