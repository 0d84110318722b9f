"""HTTP service exposing live practice sessions to a learner client.

Every session is persisted as an append-only event-log file named by its
session id; after a restart any session replays from disk to exactly its
pre-restart state. Per-session operations are serialized by a lock, while
distinct sessions proceed in parallel.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .agent import AgentBackends, UserEvent, step
from .backends import BackendConfig, make_backend
from .core import (
    ChatRole,
    Message,
    Perspective,
    Role,
    Topic,
    TopicRegistry,
    Utterance,
    load_default_registry,
    render_messages,
)
from .errors import StateError, ValidationError
from .prompts import TemplateSet, default_templates
from .state import DialogueState, append_utterance, event_from_json, event_to_json, new_state


@dataclass(frozen=True)
class ServiceConfig:
    backends: dict[str, BackendConfig]
    log_dir: Path
    templates: TemplateSet = field(default_factory=default_templates)
    registry: TopicRegistry = field(default_factory=load_default_registry)
    openers: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "log_dir", Path(self.log_dir))

    def require_backends(self) -> None:
        for role in ("agent", "eod"):
            if role not in self.backends:
                raise ValidationError(f"service config lacks the {role!r} backend")


def service_config_from_file(path, registry: TopicRegistry | None = None) -> ServiceConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    backends = {
        role: BackendConfig.from_dict(cfg, path.parent)
        for role, cfg in payload["backends"].items()
    }
    return ServiceConfig(
        backends=backends,
        log_dir=Path(payload.get("log_dir", "sessions")),
        registry=registry or load_default_registry(),
        openers=payload.get("openers", {}),
    )


@dataclass
class SessionHandle:
    session_id: str
    topic: Topic
    created_at: str
    state: DialogueState
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """In-memory session map backed by per-session event-log files."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.sessions: dict[str, SessionHandle] = {}
        self._registry_lock = threading.Lock()
        config.log_dir.mkdir(parents=True, exist_ok=True)

    def _log_path(self, session_id: str) -> Path:
        return self.config.log_dir / f"{session_id}.jsonl"

    def create(self, topic: Topic, state: DialogueState) -> SessionHandle:
        handle = SessionHandle(
            session_id=uuid.uuid4().hex,
            topic=topic,
            created_at=datetime.now(timezone.utc).isoformat(),
            state=state,
        )
        with open(self._log_path(handle.session_id), "w", encoding="utf-8") as fh:
            header = {
                "session_id": handle.session_id,
                "topic_id": topic.id,
                "created_at": handle.created_at,
            }
            fh.write(json.dumps(header, ensure_ascii=False, separators=(",", ":")) + "\n")
            for event in state.events:
                fh.write(event_to_json(event) + "\n")
        with self._registry_lock:
            self.sessions[handle.session_id] = handle
        return handle

    def persist_delta(self, handle: SessionHandle, previous: DialogueState) -> None:
        new_events = handle.state.events[len(previous.events):]
        if not new_events:
            return
        with open(self._log_path(handle.session_id), "a", encoding="utf-8") as fh:
            for event in new_events:
                fh.write(event_to_json(event) + "\n")

    def get(self, session_id: str) -> SessionHandle:
        with self._registry_lock:
            handle = self.sessions.get(session_id)
            if handle is not None:
                return handle
        handle = self._recover(session_id)
        with self._registry_lock:
            return self.sessions.setdefault(session_id, handle)

    def _recover(self, session_id: str) -> SessionHandle:
        from .state import replay_events

        path = self._log_path(session_id)
        if not path.exists():
            raise KeyError(session_id)
        with open(path, encoding="utf-8") as fh:
            lines = [line for line in fh.read().splitlines() if line.strip()]
        header = json.loads(lines[0])
        topic = self.config.registry.get(header["topic_id"])
        events = tuple(event_from_json(line) for line in lines[1:])
        return SessionHandle(
            session_id=header["session_id"],
            topic=topic,
            created_at=header["created_at"],
            state=replay_events(topic, events),
        )


class CreateSessionRequest(BaseModel):
    topic_id: str


class PostMessageRequest(BaseModel):
    text: str


def _opening_instruction(config: ServiceConfig, topic: Topic) -> str:
    return config.openers.get(
        topic.id,
        f"Open the conversation about {topic.title} with a short greeting "
        "and one simple question.",
    )


def create_app(config: ServiceConfig, backends: AgentBackends | None = None) -> FastAPI:
    app = FastAPI(title="situdial", version="0.1.0")
    # the learner UI may be served from another origin during development
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(config)
    if backends is None:
        config.require_backends()
        backends = AgentBackends(
            chat=make_backend(config.backends["agent"]),
            eod=make_backend(config.backends["eod"]),
        )
    templates = config.templates

    def fetch(session_id: str) -> SessionHandle:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session") from None

    @app.get("/topics")
    def topics():
        return {
            "topics": [
                {"id": t.id, "title": t.title, "split": t.split.value}
                for t in config.registry.topics
            ]
        }

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest):
        try:
            topic = config.registry.get(request.topic_id)
        except ValidationError:
            raise HTTPException(status_code=404, detail="unknown topic") from None
        state = new_state(topic)
        rendered = render_messages(state, Perspective.AGENT_VIEW, templates.response)
        system = rendered[0].content + "\n\n" + _opening_instruction(config, topic)
        opening = backends.chat.complete([Message(ChatRole.SYSTEM, system)])
        state = append_utterance(state, Utterance(Role.AGENT, opening))
        handle = store.create(topic, state)
        return {"session_id": handle.session_id, "opening_agent_message": opening}

    @app.post("/sessions/{session_id}/messages")
    def post_message(session_id: str, request: PostMessageRequest):
        if not request.text.strip():
            raise HTTPException(status_code=422, detail="text must be non-empty")
        handle = fetch(session_id)
        with handle.lock:
            if handle.state.terminated:
                raise HTTPException(status_code=409, detail="session is terminated")
            previous = handle.state
            try:
                handle.state, output = step(
                    previous, UserEvent.utterance(request.text), backends, templates
                )
            except StateError:
                raise HTTPException(status_code=409, detail="session is terminated") from None
            store.persist_delta(handle, previous)
        return {
            "kind": output.kind.value,
            "text": output.text,
            "terminated": output.terminated,
        }

    @app.post("/sessions/{session_id}/suggestion")
    def request_suggestion(session_id: str):
        handle = fetch(session_id)
        with handle.lock:
            if handle.state.terminated:
                raise HTTPException(status_code=409, detail="session is terminated")
            previous = handle.state
            handle.state, output = step(
                previous, UserEvent.suggestion_request(), backends, templates
            )
            store.persist_delta(handle, previous)
        return {"suggestion_text": output.text}

    @app.get("/sessions/{session_id}/transcript")
    def transcript(session_id: str):
        handle = fetch(session_id)
        with handle.lock:
            state = handle.state
        return {
            "session_id": handle.session_id,
            "topic_id": handle.topic.id,
            "terminated": state.terminated,
            "history": [{"role": u.role.value, "text": u.text} for u in state.history],
            "events": [e.as_dict() for e in state.events],
        }

    return app
