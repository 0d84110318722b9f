"""Live dialogue state and its append-only transcript log.

States are immutable values; every operation returns a new state and emits
transcript events. Suggestion exchanges are the one deliberate asymmetry:
they are recorded in the transcript (the evaluator judges them) but never
enter ``history`` (the dialogue model must not see them).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from enum import Enum

from .core import Role, Topic, Utterance
from .errors import ProtocolError, StateError, ValidationError


class EventKind(str, Enum):
    USER_MSG = "user_msg"
    AGENT_MSG = "agent_msg"
    SUGGESTION_REQUEST = "suggestion_request"
    SUGGESTION = "suggestion"
    TERMINATION = "termination"


@dataclass(frozen=True)
class TranscriptEvent:
    kind: EventKind
    text: str
    timestamp: float

    def as_dict(self) -> dict:
        return {"kind": self.kind.value, "text": self.text, "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, payload: dict) -> "TranscriptEvent":
        return cls(EventKind(payload["kind"]), payload["text"], float(payload["timestamp"]))


def event_to_json(event: TranscriptEvent) -> str:
    return json.dumps(event.as_dict(), ensure_ascii=False, separators=(",", ":"))


def event_from_json(line: str) -> TranscriptEvent:
    return TranscriptEvent.from_dict(json.loads(line))


@dataclass(frozen=True)
class DialogueState:
    """Snapshot of one live conversation.

    ``history`` holds only real utterances; roles of neighbors always
    differ, though either party may have opened. Once ``terminated`` is
    true the state accepts no further appends.
    """

    topic: Topic
    history: tuple[Utterance, ...] = ()
    terminated: bool = False
    pending_suggestion: tuple[str, str] | None = None
    events: tuple[TranscriptEvent, ...] = ()

    @property
    def topic_id(self) -> str:
        return self.topic.id

    def last_role(self) -> Role | None:
        return self.history[-1].role if self.history else None


def new_state(topic: Topic) -> DialogueState:
    return DialogueState(topic=topic)


def append_utterance(
    state: DialogueState, utterance: Utterance, at: float | None = None
) -> DialogueState:
    """Append one utterance; rejects appends after termination and
    consecutive same-role utterances."""
    if state.terminated:
        raise StateError("cannot append to a terminated dialogue")
    if state.last_role() is utterance.role:
        raise ProtocolError(
            f"consecutive {utterance.role.value!r} utterances are not allowed"
        )
    kind = EventKind.USER_MSG if utterance.role is Role.USER else EventKind.AGENT_MSG
    event = TranscriptEvent(kind, utterance.text, time.time() if at is None else at)
    return replace(
        state,
        history=state.history + (utterance,),
        events=state.events + (event,),
    )


def record_suggestion(
    state: DialogueState,
    request_text: str,
    suggestion_text: str,
    at: float | None = None,
) -> DialogueState:
    """Log a suggestion exchange without touching history.

    The request and the generated suggestion exist only as transcript
    events; the returned state's history is identical to the input's.
    """
    if state.terminated:
        raise StateError("cannot record a suggestion on a terminated dialogue")
    if not suggestion_text.strip():
        raise ValidationError("suggestion_text must be non-empty")
    stamp = time.time() if at is None else at
    events = state.events + (
        TranscriptEvent(EventKind.SUGGESTION_REQUEST, request_text, stamp),
        TranscriptEvent(EventKind.SUGGESTION, suggestion_text, stamp),
    )
    return replace(state, events=events, pending_suggestion=None)


def mark_terminated(state: DialogueState, at: float | None = None) -> DialogueState:
    """Set the terminated flag; idempotent, and never reversible."""
    if state.terminated:
        return state
    event = TranscriptEvent(EventKind.TERMINATION, "", time.time() if at is None else at)
    return replace(state, terminated=True, events=state.events + (event,))


def replay_events(topic: Topic, events: tuple[TranscriptEvent, ...]) -> DialogueState:
    """Rebuild the exact final state from its transcript log."""
    history: list[Utterance] = []
    terminated = False
    last_role: Role | None = None
    for event in events:
        if event.kind in (EventKind.USER_MSG, EventKind.AGENT_MSG):
            if terminated:
                raise StateError("transcript appends an utterance after termination")
            role = Role.USER if event.kind is EventKind.USER_MSG else Role.AGENT
            if role is last_role:
                raise ProtocolError("transcript holds consecutive same-role utterances")
            history.append(Utterance(role, event.text))
            last_role = role
        elif event.kind is EventKind.TERMINATION:
            terminated = True
        # suggestion_request / suggestion events never touch history
    return DialogueState(
        topic=topic,
        history=tuple(history),
        terminated=terminated,
        pending_suggestion=None,
        events=tuple(events),
    )
