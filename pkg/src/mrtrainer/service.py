"""Live training sessions: event-sourced state, SSE streaming, HTTP facade.

Every session is an append-only event log; the in-memory session (assembly
state + agent memory) is a fold over that log, so persisted logs rebuild to
identical snapshots after a restart. Per-session processing is serialized
through one lock; distinct sessions run concurrently.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, StreamingResponse

from . import agent as agent_mod
from .backends import LlmBackend
from .manuals import InstructionManual, chunk_manual
from .simulator import (
    AssemblySession,
    StepOutOfRange,
    ToolCall,
    ToolResponse,
    new_session,
    registry_json,
    set_step_completed,
)
from .vision import VisionBackend

logger = logging.getLogger(__name__)

GREETING = (
    "Hello! I'm your assembly trainer. I will guide you through this manual "
    "step by step. Say something like \"let's begin\" when you are ready to start."
)

EVENT_TYPES = (
    "state", "trainer_message", "trainee_message",
    "tool_call", "tool_response", "vlm_result", "error",
)


class ServiceError(Exception):
    code = "ServiceError"
    http_status = 500


class UnknownManual(ServiceError):
    code = "UnknownManual"
    http_status = 404


class UnknownSession(ServiceError):
    code = "UnknownSession"
    http_status = 404


class SessionFinished(ServiceError):
    code = "SessionFinished"
    http_status = 409


class BadRequest(ServiceError):
    code = "BadRequest"
    http_status = 400


class UnknownAsset(ServiceError):
    code = "UnknownAsset"
    http_status = 404


@dataclass(frozen=True)
class Event:
    type: str
    seq: int
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.type, "seq": self.seq, "payload": self.payload}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Event":
        return cls(type=d["type"], seq=d["seq"], payload=d["payload"])


@dataclass
class LiveSession:
    session_id: str
    manual: InstructionManual
    chunk_index: int
    assembly: AssemblySession
    memory: agent_mod.Memory
    llm: LlmBackend
    vlm: VisionBackend | None
    created_at: str
    events: list[Event] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)
    cond: threading.Condition = field(default_factory=threading.Condition)
    log_path: Path | None = None

    @property
    def last_seq(self) -> int:
        return self.events[-1].seq if self.events else 0

    def handle(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "manual_id": self.manual.id,
            "chunk_index": self.chunk_index,
            "created_at": self.created_at,
            "last_seq": self.last_seq,
            "state": self.assembly.snapshot(),
        }


class SessionManager:
    """Owns every live session; the HTTP layer and the terminal chat sit on top.

    backend_factory is called once per session and returns (llm, vlm); this
    keeps scripted backends independent across sessions.
    """

    def __init__(
        self,
        manuals: Iterable[InstructionManual],
        backend_factory: Callable[[], tuple[LlmBackend, VisionBackend | None]],
        data_dir: str | Path | None = None,
        heartbeat_seconds: float = 15.0,
    ) -> None:
        self.manuals = {m.id: m for m in manuals}
        self.backend_factory = backend_factory
        self.data_dir = Path(data_dir) if data_dir else None
        self.heartbeat_seconds = heartbeat_seconds
        self._sessions: dict[str, LiveSession] = {}
        self._registry_lock = threading.Lock()
        if self.data_dir:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            self._restore_all()

    # -- events ------------------------------------------------------------

    def _emit(self, sess: LiveSession, type_: str, payload: dict[str, Any]) -> Event:
        event = Event(type=type_, seq=sess.last_seq + 1, payload=payload)
        with sess.cond:
            sess.events.append(event)
            if sess.log_path is not None:
                with open(sess.log_path, "a", encoding="utf-8", newline="\n") as fh:
                    fh.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")
            sess.cond.notify_all()
        return event

    def _emit_state(self, sess: LiveSession) -> Event:
        payload = sess.assembly.snapshot()
        payload["chunk_index"] = sess.chunk_index
        step = sess.assembly.current_step
        payload["image_ref"] = sess.manual.step(step).image_ref if step >= 1 else None
        return self._emit(sess, "state", payload)

    # -- operations ----------------------------------------------------------

    def create_session(
        self,
        manual_id: str,
        chunk_index: int = 0,
        session_id: str | None = None,
    ) -> LiveSession:
        manual = self.manuals.get(manual_id)
        if manual is None:
            raise UnknownManual(f"no manual with id {manual_id!r}")
        chunks = chunk_manual(manual)
        if not 0 <= chunk_index < len(chunks):
            raise BadRequest(f"chunk_index {chunk_index} outside 0..{len(chunks) - 1}")
        sid = session_id or uuid.uuid4().hex
        if sid in self._sessions:
            raise BadRequest(f"session id {sid!r} already exists")
        llm, vlm = self.backend_factory()
        sess = LiveSession(
            session_id=sid,
            manual=manual,
            chunk_index=chunk_index,
            assembly=new_session(sid, manual),
            memory=agent_mod.Memory.open(chunks[chunk_index]),
            llm=llm,
            vlm=vlm,
            created_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            log_path=(self.data_dir / f"{sid}.jsonl") if self.data_dir else None,
        )
        with self._registry_lock:
            self._sessions[sid] = sess
        sess.memory.append(agent_mod.ROLE_TRAINER, GREETING)
        self._emit(sess, "trainer_message", {"text": GREETING})
        self._emit_state(sess)
        return sess

    def get_session(self, session_id: str) -> LiveSession:
        sess = self._sessions.get(session_id)
        if sess is None:
            raise UnknownSession(f"no session with id {session_id!r}")
        return sess

    def post_message(self, session_id: str, text: str) -> dict[str, Any]:
        """Run one agent turn; events stream out as the turn progresses."""
        sess = self.get_session(session_id)
        if not text or not text.strip():
            raise BadRequest("message text must not be empty")
        with sess.lock:  # serializes turns; arrival order under contention
            if sess.assembly.finished:
                raise SessionFinished("session is finished; start a new one")

            def observer(kind: str, payload: dict[str, Any]) -> None:
                self._emit(sess, kind, payload)

            agent_mod.run_turn(
                sess.memory, sess.assembly, text.strip(),
                sess.llm, sess.vlm, observer=observer,
            )
            self._emit_state(sess)
            return {"accepted": True, "last_seq": sess.last_seq}

    def control_step(self, session_id: str, step: int, done: bool) -> Event:
        sess = self.get_session(session_id)
        with sess.lock:
            try:
                set_step_completed(sess.assembly, step, done)
            except StepOutOfRange as exc:
                raise BadRequest(str(exc)) from exc
            return self._emit_state(sess)

    def events_since(self, session_id: str, from_seq: int) -> list[Event]:
        sess = self.get_session(session_id)
        with sess.cond:
            return [e for e in sess.events if e.seq > from_seq]

    def stream_events(
        self,
        session_id: str,
        from_seq: int = 0,
        follow: bool = True,
        stop: threading.Event | None = None,
    ) -> Iterator[str]:
        """SSE frames: replay events past from_seq, then live-tail.

        Emits a ": heartbeat" comment whenever heartbeat_seconds pass with
        no event. With follow=False the replay ends the stream.
        """
        sess = self.get_session(session_id)
        cursor = from_seq
        while True:
            with sess.cond:
                pending = [e for e in sess.events if e.seq > cursor]
                if not pending and follow and (stop is None or not stop.is_set()):
                    sess.cond.wait(timeout=self.heartbeat_seconds)
                    pending = [e for e in sess.events if e.seq > cursor]
            if not pending:
                if not follow or (stop is not None and stop.is_set()):
                    return
                yield ": heartbeat\n\n"
                continue
            for event in pending:
                cursor = event.seq
                data = json.dumps(event.to_dict(), ensure_ascii=False)
                yield f"id: {event.seq}\nevent: {event.type}\ndata: {data}\n\n"

    def list_manuals(self) -> list[dict[str, Any]]:
        return [
            {"id": m.id, "title": m.title, "steps": len(m.steps)}
            for m in sorted(self.manuals.values(), key=lambda m: m.id)
        ]

    # -- event-sourced rebuild ----------------------------------------------

    def _restore_all(self) -> None:
        for path in sorted(self.data_dir.glob("*.jsonl")):
            try:
                self.restore_session(path)
            except Exception:
                logger.exception("could not restore session log %s", path)

    def restore_session(self, log_path: Path) -> LiveSession:
        """Rebuild a session by folding its persisted event log."""
        events = [
            Event.from_dict(json.loads(line))
            for line in log_path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if not events:
            raise ValueError(f"{log_path}: empty event log")
        first_state = next(e for e in events if e.type == "state")
        manual_id = first_state.payload["manual_id"]
        sid = first_state.payload["session_id"]
        manual = self.manuals.get(manual_id)
        if manual is None:
            raise UnknownManual(f"log {log_path} references unknown manual {manual_id!r}")
        chunk_index = int(first_state.payload.get("chunk_index", 0))
        llm, vlm = self.backend_factory()
        sess = LiveSession(
            session_id=sid,
            manual=manual,
            chunk_index=chunk_index,
            assembly=new_session(sid, manual),
            memory=agent_mod.Memory.open(chunk_manual(manual)[chunk_index]),
            llm=llm,
            vlm=vlm,
            created_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            events=events,
            log_path=log_path,
        )
        replay_into_memory(sess.memory, events)
        last_state = [e for e in events if e.type == "state"][-1]
        sess.assembly.restore(last_state.payload)
        rebuild_trace(sess.assembly, events)
        with self._registry_lock:
            self._sessions[sid] = sess
        return sess


def replay_into_memory(memory: agent_mod.Memory, events: Iterable[Event]) -> None:
    """Fold message-bearing events into agent memory turns."""
    for event in events:
        p = event.payload
        if event.type == "trainer_message":
            memory.append(agent_mod.ROLE_TRAINER, p["text"])
        elif event.type == "trainee_message":
            memory.append(agent_mod.ROLE_TRAINEE, p["text"])
        elif event.type == "tool_call":
            memory.append(agent_mod.ROLE_TRAINER, p["raw"], ToolCall.from_dict(p["call"]))
        elif event.type in ("tool_response", "vlm_result"):
            role = agent_mod.ROLE_VLM if event.type == "vlm_result" else agent_mod.ROLE_TOOL
            content = json.dumps(p["response"], ensure_ascii=False, sort_keys=True)
            memory.append(role, content, ToolCall.from_dict(p["call"]))
        elif event.type == "error" and p.get("code") == "MalformedToolBlock":
            memory.append(agent_mod.ROLE_SYSTEM, p["note"])


def rebuild_trace(assembly: AssemblySession, events: Iterable[Event]) -> None:
    for event in events:
        if event.type in ("tool_response", "vlm_result"):
            assembly.tool_trace.append(
                (
                    ToolCall.from_dict(event.payload["call"]),
                    ToolResponse.from_dict(event.payload["response"]),
                )
            )


# ---------------------------------------------------------------------------
# HTTP facade


def build_app(manager: SessionManager, assets_dir: str | Path | None = None):
    """FastAPI app exposing the documented session API.

    assets_dir, when given, backs the step-image route GET /assets/{ref};
    refs without a file answer 404 and the UI falls back to a placeholder.
    """
    app = FastAPI(title="mrtrainer session service")
    app.state.manager = manager
    assets_root = Path(assets_dir).resolve() if assets_dir else None

    @app.exception_handler(ServiceError)
    async def service_error_handler(request: Request, exc: ServiceError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"error": exc.code, "message": str(exc)},
        )

    @app.get("/tools")
    def get_tools():
        return registry_json()

    @app.get("/manuals")
    def get_manuals():
        return manager.list_manuals()

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        sess = manager.create_session(
            manual_id=body.get("manual_id", ""),
            chunk_index=int(body.get("chunk_index", 0)),
        )
        return sess.handle()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return manager.get_session(session_id).handle()

    @app.post("/sessions/{session_id}/messages", status_code=202)
    async def post_message(session_id: str, request: Request):
        body = await request.json()
        return manager.post_message(session_id, body.get("text", ""))

    @app.post("/sessions/{session_id}/steps/{step}")
    async def control_step(session_id: str, step: int, request: Request):
        body = await request.json()
        done = body.get("done")
        if not isinstance(done, bool):
            raise BadRequest("body must be {\"done\": true|false}")
        return manager.control_step(session_id, step, done).to_dict()

    @app.get("/sessions/{session_id}/events")
    def stream(session_id: str, from_seq: int = 0, follow: bool = True):
        manager.get_session(session_id)  # 404 before the stream starts
        return StreamingResponse(
            manager.stream_events(session_id, from_seq=from_seq, follow=follow),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache"},
        )

    @app.get("/assets/{ref:path}")
    def asset(ref: str):
        if assets_root is not None:
            candidate = (assets_root / ref).resolve()
            if candidate.is_file() and candidate.is_relative_to(assets_root):
                return FileResponse(candidate)
        raise UnknownAsset(f"no asset for ref {ref!r}")

    return app
