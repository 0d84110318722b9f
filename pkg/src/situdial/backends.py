"""Chat-completion backends and the classifier wrappers built on them.

Two backend kinds share one interface: ``http`` talks to any chat-completion
endpoint with an OpenAI-style wire format; ``scripted`` replays fixtures and
stands in for a fine-tuned model in every test. The judge and the
end-of-dialogue detector are prompted binary classifiers layered on
``complete``.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import httpx

from .core import ChatRole, Message, MessageList, transcript_text
from .errors import BackendError, FixtureError, LabelParseError, ValidationError

if TYPE_CHECKING:
    from .prompts import PromptTemplate
    from .state import DialogueState


@dataclass(frozen=True)
class BackendConfig:
    """Declarative description of one backend binding.

    ``endpoint_url`` is required exactly when ``kind == "http"`` and
    ``script_path`` exactly when ``kind == "scripted"``.
    """

    kind: str
    endpoint_url: str | None = None
    model_name: str = "default"
    temperature: float = 0.7
    max_output_tokens: int = 256
    timeout: float = 30.0
    retry_limit: int = 2
    backoff_base: float = 0.5
    script_path: str | None = None
    response_path: str = "choices.0.message.content"
    auth_token_env: str = "CHAT_API_TOKEN"

    def __post_init__(self):
        if self.kind not in ("http", "scripted"):
            raise ValidationError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http":
            if not self.endpoint_url:
                raise ValidationError("http backend requires endpoint_url")
            if self.script_path is not None:
                raise ValidationError("script_path is only valid for scripted backends")
        else:
            if not self.script_path:
                raise ValidationError("scripted backend requires script_path")
            if self.endpoint_url is not None:
                raise ValidationError("endpoint_url is only valid for http backends")
        if self.temperature < 0:
            raise ValidationError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValidationError("max_output_tokens must be > 0")
        if self.retry_limit < 0:
            raise ValidationError("retry_limit must be >= 0")

    def as_dict(self) -> dict:
        payload = {
            "kind": self.kind,
            "model_name": self.model_name,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "timeout": self.timeout,
            "retry_limit": self.retry_limit,
        }
        if self.kind == "http":
            payload["endpoint_url"] = self.endpoint_url
            payload["response_path"] = self.response_path
        else:
            payload["script_path"] = str(self.script_path)
        return payload

    @classmethod
    def from_dict(cls, payload: dict, base_dir: Path | None = None) -> "BackendConfig":
        payload = dict(payload)
        script_path = payload.get("script_path")
        if script_path is not None and base_dir is not None:
            candidate = Path(script_path)
            if not candidate.is_absolute():
                payload["script_path"] = str(base_dir / candidate)
        return cls(**payload)


@dataclass(frozen=True)
class JudgeVerdict:
    """Binary appropriateness verdict plus the completion it was parsed from."""

    appropriate: bool
    raw_label: str


# Requests to remote endpoints across all http backends share one in-flight
# cap so a large evaluation cannot stampede the serving side.
_inflight = threading.BoundedSemaphore(8)


def set_inflight_limit(limit: int) -> None:
    global _inflight
    if limit < 1:
        raise ValidationError("in-flight limit must be >= 1")
    _inflight = threading.BoundedSemaphore(limit)


def canonical_messages_hash(messages: MessageList) -> str:
    """Stable fingerprint of a message list, used as the fixture map key."""
    payload = json.dumps(
        [m.as_dict() for m in messages],
        ensure_ascii=False,
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _check_messages(messages: MessageList) -> None:
    if not messages:
        raise ValidationError("messages must be non-empty")
    if messages[0].role is not ChatRole.SYSTEM:
        raise ValidationError("first message must have the system role")


class ChatBackend:
    """Interface: a message list in, one completion string out."""

    def complete(self, messages: MessageList) -> str:
        raise NotImplementedError


class HttpChatBackend(ChatBackend):
    """Client for OpenAI-compatible chat-completion endpoints.

    Retries transport failures and 5xx responses with exponential backoff,
    up to ``retry_limit`` retries. An auth token is read from the
    environment variable named in the config, when present.
    """

    def __init__(self, config: BackendConfig):
        if config.kind != "http":
            raise ValidationError("HttpChatBackend requires kind='http'")
        self.config = config

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.getenv(self.config.auth_token_env, "").strip()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _extract(self, payload: object) -> str:
        node = payload
        for part in self.config.response_path.split("."):
            try:
                node = node[int(part)] if part.isdigit() else node[part]
            except (KeyError, IndexError, TypeError) as exc:
                raise BackendError(
                    f"response is missing {self.config.response_path!r} at {part!r}"
                ) from exc
        if not isinstance(node, str):
            raise BackendError("completion at response_path is not a string")
        return node

    def complete(self, messages: MessageList) -> str:
        _check_messages(messages)
        body = {
            "model": self.config.model_name,
            "messages": [m.as_dict() for m in messages],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_output_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self.config.retry_limit + 1):
            if attempt:
                time.sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                with _inflight:
                    response = httpx.post(
                        self.config.endpoint_url,
                        json=body,
                        headers=self._headers(),
                        timeout=self.config.timeout,
                    )
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = BackendError(f"server error {response.status_code}")
                continue
            if response.status_code >= 400:
                raise BackendError(
                    f"request rejected: {response.status_code} {response.text[:200]}"
                )
            completion = self._extract(response.json())
            if not completion.strip():
                raise BackendError("backend returned an empty completion")
            return completion
        raise BackendError(
            f"transport failure after {self.config.retry_limit + 1} attempts: {last_error}"
        )


@dataclass
class ScriptedRule:
    """Fixture rule: fires when every listed substring occurs in the prompt."""

    contains: tuple[str, ...]
    completion: str

    def matches(self, haystack: str) -> bool:
        return all(needle in haystack for needle in self.contains)


class ScriptedChatBackend(ChatBackend):
    """Deterministic fixture-driven backend.

    Three modes:
      * ``map``: completions keyed by :func:`canonical_messages_hash`,
        with an optional default for unmatched prompts;
      * ``sequence``: an ordered completion list consumed call by call
        (optionally cycling);
      * ``rules``: substring-triggered completions with a default,
        used by fixtures that must react to conversation content.
    """

    def __init__(
        self,
        mapping: dict[str, str] | None = None,
        sequence: Sequence[str] | None = None,
        rules: Sequence[ScriptedRule] | None = None,
        default: str | None = None,
        cycle: bool = False,
    ):
        modes = [m is not None for m in (mapping, sequence, rules)]
        if sum(modes) != 1:
            raise ValidationError("exactly one of mapping, sequence, rules is required")
        self.mapping = dict(mapping) if mapping is not None else None
        self.sequence = list(sequence) if sequence is not None else None
        self.rules = list(rules) if rules is not None else None
        self.default = default
        self.cycle = cycle
        self._cursor = 0
        self.call_count = 0

    @classmethod
    def from_file(cls, path) -> "ScriptedChatBackend":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls.from_payload(payload)

    @classmethod
    def from_payload(cls, payload) -> "ScriptedChatBackend":
        if isinstance(payload, list):
            return cls(sequence=payload)
        if not isinstance(payload, dict):
            raise ValidationError("scripted fixture must be a JSON object or list")
        mode = payload.get("mode")
        if mode is None:
            return cls(mapping=payload)
        if mode == "map":
            return cls(mapping=payload["entries"], default=payload.get("default"))
        if mode == "sequence":
            return cls(sequence=payload["completions"], cycle=payload.get("cycle", False))
        if mode == "rules":
            rules = [
                ScriptedRule(
                    contains=tuple(
                        [r["contains"]] if isinstance(r["contains"], str) else r["contains"]
                    ),
                    completion=r["completion"],
                )
                for r in payload["rules"]
            ]
            return cls(rules=rules, default=payload.get("default"))
        raise ValidationError(f"unknown fixture mode {mode!r}")

    def complete(self, messages: MessageList) -> str:
        _check_messages(messages)
        self.call_count += 1
        if self.sequence is not None:
            if self._cursor >= len(self.sequence):
                if not self.cycle:
                    raise FixtureError(
                        f"sequential fixture exhausted after {len(self.sequence)} entries"
                    )
                self._cursor = 0
            completion = self.sequence[self._cursor]
            self._cursor += 1
        elif self.mapping is not None:
            key = canonical_messages_hash(messages)
            if key in self.mapping:
                completion = self.mapping[key]
            elif self.default is not None:
                completion = self.default
            else:
                raise FixtureError(f"no fixture entry for message hash {key}")
        else:
            haystack = "\n".join(m.content for m in messages)
            completion = self.default
            for rule in self.rules:
                if rule.matches(haystack):
                    completion = rule.completion
                    break
            if completion is None:
                raise FixtureError("no fixture rule matched and no default is set")
        if not completion.strip():
            raise BackendError("backend returned an empty completion")
        return completion


def make_backend(config: BackendConfig) -> ChatBackend:
    if config.kind == "http":
        return HttpChatBackend(config)
    return ScriptedChatBackend.from_file(config.script_path)


def complete(backend: ChatBackend, messages: MessageList) -> str:
    """Free-function alias; build instances from configs via make_backend."""
    return backend.complete(messages)


# --- prompted classifiers -----------------------------------------------------

_EOD_POSITIVE_LABEL = "ended"


def parse_label(completion: str, allowed: Iterable[str]) -> str | None:
    """First-token, case-insensitive label match; None when nothing matches."""
    tokens = completion.strip().split()
    if not tokens:
        return None
    first = tokens[0].strip(".,!?:;\"'()[]").lower()
    for label in allowed:
        if first == label.lower():
            return label
    return None


def _classify(
    backend: ChatBackend,
    messages: MessageList,
    allowed: tuple[str, ...],
) -> tuple[str, str]:
    """Run a constrained classification, reprompting once on a bad label."""
    completion = backend.complete(messages)
    label = parse_label(completion, allowed)
    if label is None:
        choices = " or ".join(allowed)
        retry = messages + [
            Message(ChatRole.ASSISTANT, completion),
            Message(ChatRole.USER, f"Answer with exactly one word: {choices}."),
        ]
        completion = backend.complete(retry)
        label = parse_label(completion, allowed)
    if label is None:
        raise LabelParseError(
            f"completion {completion!r} does not match labels {allowed}"
        )
    return label, completion


def judge(
    backend: ChatBackend,
    template: "PromptTemplate",
    topic: str,
    context: str,
    utterance: str,
) -> JudgeVerdict:
    """Ask whether ``utterance`` appropriately continues ``context``."""
    if not utterance.strip():
        raise ValidationError("utterance must be non-empty")
    allowed = template.allowed_labels or ("yes", "no")
    messages = template.render(topic=topic, context=context, utterance=utterance)
    label, completion = _classify(backend, messages, tuple(allowed))
    return JudgeVerdict(appropriate=(label == "yes"), raw_label=completion)


def detect_eod(
    backend: ChatBackend,
    template: "PromptTemplate",
    state: "DialogueState",
) -> bool:
    """True when the classifier says the conversation has concluded."""
    if not state.history:
        raise ValidationError("end-of-dialogue detection needs at least one utterance")
    allowed = template.allowed_labels or ("ended", "ongoing")
    messages = template.render(
        topic=state.topic.title, context=transcript_text(state.history)
    )
    label, _ = _classify(backend, messages, tuple(allowed))
    return label == _EOD_POSITIVE_LABEL
