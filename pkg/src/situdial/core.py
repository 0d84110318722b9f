"""Domain types for topics, utterances, turns, and dialogues.

Also owns the canonical line-delimited dataset serialization and the
chat-message rendering that turns a live conversation into a prompt for
either party (the role-swap trick: one chat model serves both the agent's
responses and user-side suggestions, depending on which perspective the
history is rendered from).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import TYPE_CHECKING, Iterable, Mapping

from .errors import DatasetParseError, ValidationError

if TYPE_CHECKING:
    from .prompts import PromptTemplate
    from .state import DialogueState


class Split(str, Enum):
    IN_DOMAIN = "in_domain"
    OUT_OF_DOMAIN = "out_of_domain"


class Role(str, Enum):
    USER = "user"
    AGENT = "agent"


class Provenance(str, Enum):
    GENERATED = "generated"
    CURATED = "curated"
    SYNTHETIC_FIXTURE = "synthetic_fixture"


class ChatRole(str, Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


class Perspective(str, Enum):
    AGENT_VIEW = "agent_view"
    USER_VIEW = "user_view"


#: Fixed instruction a user sends when asking the agent to draft their next
#: message. Configurable wherever it is consumed; this is the default.
SUGGESTION_REQUEST_TEXT = "Please suggest what I could say next."


@dataclass(frozen=True)
class Topic:
    """A conversation scenario: stable slug id, display title, domain split."""

    id: str
    title: str
    split: Split

    def __post_init__(self):
        if not self.id:
            raise ValidationError("Topic.id must be non-empty")
        obj_split = Split(self.split)
        object.__setattr__(self, "split", obj_split)


@dataclass(frozen=True)
class Utterance:
    """One message from one party; text must be non-empty after trimming."""

    role: Role
    text: str

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if not self.text.strip():
            raise ValidationError("Utterance.text must be non-empty")


@dataclass(frozen=True)
class Turn:
    """A (user, agent) utterance pair; roles are fixed."""

    user: Utterance
    agent: Utterance

    def __post_init__(self):
        if self.user.role is not Role.USER:
            raise ValidationError("Turn.user must have role 'user'")
        if self.agent.role is not Role.AGENT:
            raise ValidationError("Turn.agent must have role 'agent'")

    @classmethod
    def of(cls, user_text: str, agent_text: str) -> "Turn":
        return cls(Utterance(Role.USER, user_text), Utterance(Role.AGENT, agent_text))


@dataclass(frozen=True)
class Dialogue:
    """An ordered, non-empty list of turns on one topic."""

    topic_id: str
    turns: tuple[Turn, ...]
    provenance: Provenance = Provenance.GENERATED

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if not self.turns:
            raise ValidationError("Dialogue.turns must be non-empty")

    @property
    def n_turns(self) -> int:
        return len(self.turns)

    def utterances(self) -> tuple[Utterance, ...]:
        """Flatten to the alternating utterance sequence U1, A1, U2, A2, ..."""
        out: list[Utterance] = []
        for turn in self.turns:
            out.append(turn.user)
            out.append(turn.agent)
        return tuple(out)


# --- suggestion-annotated dialogues -----------------------------------------


@dataclass(frozen=True)
class UserTurn:
    text: str


@dataclass(frozen=True)
class AgentTurn:
    text: str


@dataclass(frozen=True)
class SuggestionTurn:
    """A user position replaced by a suggestion request.

    ``target_suggestion_text`` is the original user utterance, kept as the
    ideal suggestion the model should produce at this position.
    """

    request_text: str
    target_suggestion_text: str

    def __post_init__(self):
        if not self.target_suggestion_text.strip():
            raise ValidationError("SuggestionTurn.target_suggestion_text must be non-empty")


AnnotationEvent = UserTurn | AgentTurn | SuggestionTurn


@dataclass(frozen=True)
class SuggestionAnnotatedDialogue:
    """A dialogue whose user positions may carry suggestion requests.

    Provenance is carried over from the source dialogue so that
    substituting every target back reproduces the source exactly.
    """

    topic_id: str
    events: tuple[AnnotationEvent, ...]
    provenance: Provenance = Provenance.GENERATED

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    def suggestion_count(self) -> int:
        return sum(1 for e in self.events if isinstance(e, SuggestionTurn))


# --- topic registry ----------------------------------------------------------


def slugify(title: str) -> str:
    """Lowercase a title into a hyphen slug: 'Best day' -> 'best-day'."""
    slug = re.sub(r"[^a-z0-9]+", "-", title.lower()).strip("-")
    if not slug:
        raise ValidationError(f"title {title!r} produces an empty slug")
    return slug


class TopicRegistry:
    """Lookup table of topics; ids are unique, collisions get numeric suffixes."""

    def __init__(self, topics: Iterable[Topic]):
        self.topics: tuple[Topic, ...] = tuple(topics)
        self.by_id: dict[str, Topic] = {}
        for topic in self.topics:
            if topic.id in self.by_id:
                raise ValidationError(f"duplicate topic id {topic.id!r}")
            self.by_id[topic.id] = topic

    def __len__(self) -> int:
        return len(self.topics)

    def __contains__(self, topic_id: str) -> bool:
        return topic_id in self.by_id

    def get(self, topic_id: str) -> Topic:
        try:
            return self.by_id[topic_id]
        except KeyError:
            raise ValidationError(f"unknown topic_id {topic_id!r}") from None

    def split(self, split: Split) -> tuple[Topic, ...]:
        return tuple(t for t in self.topics if t.split is split)

    @classmethod
    def from_titles(
        cls,
        in_domain: Iterable[str],
        out_of_domain: Iterable[str] = (),
    ) -> "TopicRegistry":
        topics: list[Topic] = []
        seen: dict[str, int] = {}
        for split, titles in ((Split.IN_DOMAIN, in_domain), (Split.OUT_OF_DOMAIN, out_of_domain)):
            for title in titles:
                base = slugify(title)
                seen[base] = seen.get(base, 0) + 1
                tid = base if seen[base] == 1 else f"{base}-{seen[base]}"
                topics.append(Topic(tid, title, split))
        return cls(topics)


def load_registry(path) -> TopicRegistry:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return TopicRegistry(
        Topic(t["id"], t["title"], Split(t["split"])) for t in payload["topics"]
    )


@lru_cache(maxsize=1)
def load_default_registry() -> TopicRegistry:
    """Load the bundled registry: 51 in-domain and 20 out-of-domain topics."""
    ref = resources.files("situdial").joinpath("data/topics.json")
    with resources.as_file(ref) as path:
        return load_registry(path)


# --- dataset serialization ----------------------------------------------------

_RECORD_FIELDS = ("topic_id", "provenance", "turns")


def serialize_dialogue_record(dialogue: Dialogue) -> str:
    """Render one dialogue as its canonical single-line JSON record."""
    payload = {
        "topic_id": dialogue.topic_id,
        "provenance": dialogue.provenance.value,
        "turns": [{"user": t.user.text, "agent": t.agent.text} for t in dialogue.turns],
    }
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


def parse_dialogue_record(
    line: str,
    registry: TopicRegistry | None = None,
    line_number: int | None = None,
) -> Dialogue:
    """Parse one line of the dataset format back into a Dialogue.

    Field order in the input is irrelevant; serialization normalizes it, so
    parse-then-serialize is byte-identical up to that normalization.
    """
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetParseError(f"malformed record: {exc.msg}", line_number) from exc
    if not isinstance(payload, dict):
        raise DatasetParseError("record is not an object", line_number)
    for key in _RECORD_FIELDS:
        if key not in payload:
            raise ValidationError(f"record missing field {key!r}")
    raw_turns = payload["turns"]
    if not isinstance(raw_turns, list) or not raw_turns:
        raise ValidationError("turns non-empty")
    turns = []
    for raw in raw_turns:
        if not isinstance(raw, dict) or "user" not in raw or "agent" not in raw:
            raise ValidationError("turns entries need 'user' and 'agent' fields")
        turns.append(Turn.of(raw["user"], raw["agent"]))
    topic_id = payload["topic_id"]
    if registry is not None and topic_id not in registry:
        raise ValidationError(f"unknown topic_id {topic_id!r}")
    try:
        provenance = Provenance(payload["provenance"])
    except ValueError:
        raise ValidationError(f"unknown provenance {payload['provenance']!r}") from None
    return Dialogue(topic_id=topic_id, turns=tuple(turns), provenance=provenance)


def serialize_annotated_record(annotated: SuggestionAnnotatedDialogue) -> str:
    events = []
    for event in annotated.events:
        if isinstance(event, UserTurn):
            events.append({"kind": "user", "text": event.text})
        elif isinstance(event, AgentTurn):
            events.append({"kind": "agent", "text": event.text})
        else:
            events.append(
                {
                    "kind": "suggestion",
                    "request": event.request_text,
                    "target": event.target_suggestion_text,
                }
            )
    payload = {
        "topic_id": annotated.topic_id,
        "provenance": annotated.provenance.value,
        "events": events,
    }
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


def parse_annotated_record(line: str, line_number: int | None = None) -> SuggestionAnnotatedDialogue:
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetParseError(f"malformed record: {exc.msg}", line_number) from exc
    events: list[AnnotationEvent] = []
    for raw in payload["events"]:
        kind = raw.get("kind")
        if kind == "user":
            events.append(UserTurn(raw["text"]))
        elif kind == "agent":
            events.append(AgentTurn(raw["text"]))
        elif kind == "suggestion":
            events.append(SuggestionTurn(raw["request"], raw["target"]))
        else:
            raise ValidationError(f"unknown event kind {kind!r}")
    return SuggestionAnnotatedDialogue(
        topic_id=payload["topic_id"],
        events=tuple(events),
        provenance=Provenance(payload.get("provenance", "generated")),
    )


def write_dialogues(path, dialogues: Iterable[Dialogue]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for d in dialogues:
            fh.write(serialize_dialogue_record(d))
            fh.write("\n")
            n += 1
    return n


def read_dialogues(path, registry: TopicRegistry | None = None) -> list[Dialogue]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if line.strip():
                out.append(parse_dialogue_record(line, registry=registry, line_number=i))
    return out


# --- message rendering --------------------------------------------------------


@dataclass(frozen=True)
class Message:
    """One chat-completion message; content non-empty for user/assistant."""

    role: ChatRole
    content: str

    def __post_init__(self):
        object.__setattr__(self, "role", ChatRole(self.role))
        if self.role is not ChatRole.SYSTEM and not self.content.strip():
            raise ValidationError("Message.content must be non-empty for user/assistant")

    def as_dict(self) -> dict:
        return {"role": self.role.value, "content": self.content}


MessageList = list[Message]


def render_messages(
    state: "DialogueState",
    perspective: Perspective,
    template: "PromptTemplate",
) -> MessageList:
    """Render live history as a prompt from one party's perspective.

    The system message carries the topic instruction. In ``agent_view`` the
    agent's utterances map to the assistant role; in ``user_view`` the
    mapping is swapped, so the same backend can complete the user's next
    message. Suggestion exchanges never appear: the state tracker scrubs
    them before they reach history.
    """
    perspective = Perspective(perspective)
    messages = [Message(ChatRole.SYSTEM, template.render_system(topic=state.topic.title))]
    own_role = Role.AGENT if perspective is Perspective.AGENT_VIEW else Role.USER
    for utterance in state.history:
        chat_role = ChatRole.ASSISTANT if utterance.role is own_role else ChatRole.USER
        messages.append(Message(chat_role, utterance.text))
    return messages


def transcript_text(history: Iterable[Utterance]) -> str:
    """Flatten history into labeled lines for classifier prompts."""
    return "\n".join(
        f"{'User' if u.role is Role.USER else 'Agent'}: {u.text}" for u in history
    )
