"""The dialogue agent: routes user events through the suggestion branch or
the response branch with its two end-of-dialogue checks.

A suggestion request goes straight to the model from the user's perspective
and never touches the detector. A real utterance triggers check #1 (did the
user just end the chat?); if not, the agent responds and check #2 decides
whether that response concluded things.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .backends import ChatBackend, detect_eod
from .core import ChatRole, Message, Perspective, Role, Utterance, render_messages
from .errors import StateError, ValidationError
from .prompts import TemplateSet
from .state import DialogueState, append_utterance, mark_terminated, record_suggestion


class UserEventKind(str, Enum):
    UTTERANCE = "utterance"
    SUGGESTION_REQUEST = "suggestion_request"


@dataclass(frozen=True)
class UserEvent:
    kind: UserEventKind
    text: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", UserEventKind(self.kind))
        if self.kind is UserEventKind.UTTERANCE and not (self.text or "").strip():
            raise ValidationError("utterance events require text")
        if self.kind is UserEventKind.SUGGESTION_REQUEST and self.text is not None:
            raise ValidationError("suggestion_request events carry no text")

    @classmethod
    def utterance(cls, text: str) -> "UserEvent":
        return cls(UserEventKind.UTTERANCE, text)

    @classmethod
    def suggestion_request(cls) -> "UserEvent":
        return cls(UserEventKind.SUGGESTION_REQUEST)


class AgentOutputKind(str, Enum):
    RESPONSE = "response"
    SUGGESTION = "suggestion"
    CLOSING = "closing"


@dataclass(frozen=True)
class AgentOutput:
    kind: AgentOutputKind
    text: str
    terminated: bool

    def __post_init__(self):
        if self.kind is AgentOutputKind.SUGGESTION and self.terminated:
            raise ValidationError("suggestions never terminate a dialogue")
        if self.kind is AgentOutputKind.CLOSING and not self.terminated:
            raise ValidationError("closings always terminate a dialogue")


@dataclass(frozen=True)
class AgentBackends:
    """Backend bindings the agent needs: one chat model, one detector."""

    chat: ChatBackend
    eod: ChatBackend


def _closing_messages(state: DialogueState, templates: TemplateSet) -> list[Message]:
    messages = render_messages(state, Perspective.AGENT_VIEW, templates.response)
    system = messages[0].content + "\n\n" + templates.closing_note
    return [Message(ChatRole.SYSTEM, system)] + messages[1:]


def step(
    state: DialogueState,
    event: UserEvent,
    backends: AgentBackends,
    templates: TemplateSet,
) -> tuple[DialogueState, AgentOutput]:
    """Advance the conversation by one user event.

    Suggestion branch: complete from the user's perspective and scrub the
    exchange, leaving history untouched; the detector never runs.

    Response branch: append the utterance, run detector check #1, and on a
    natural end emit one farewell and terminate. Otherwise respond, append
    the response, and let detector check #2 set the terminated flag.
    """
    if state.terminated:
        raise StateError("cannot step a terminated dialogue")

    if event.kind is UserEventKind.SUGGESTION_REQUEST:
        messages = render_messages(state, Perspective.USER_VIEW, templates.suggestion)
        suggestion = backends.chat.complete(messages)
        next_state = record_suggestion(state, templates.request_text, suggestion)
        return next_state, AgentOutput(AgentOutputKind.SUGGESTION, suggestion, False)

    with_user = append_utterance(state, Utterance(Role.USER, event.text))
    if detect_eod(backends.eod, templates.eod, with_user):
        closing = backends.chat.complete(_closing_messages(with_user, templates))
        closed = append_utterance(with_user, Utterance(Role.AGENT, closing))
        return mark_terminated(closed), AgentOutput(AgentOutputKind.CLOSING, closing, True)

    response = backends.chat.complete(
        render_messages(with_user, Perspective.AGENT_VIEW, templates.response)
    )
    with_response = append_utterance(with_user, Utterance(Role.AGENT, response))
    ended = detect_eod(backends.eod, templates.eod, with_response)
    final_state = mark_terminated(with_response) if ended else with_response
    return final_state, AgentOutput(AgentOutputKind.RESPONSE, response, ended)
