"""Self-play evaluation: agent vs. talker sessions gated by the judge and the
end-of-dialogue detector, aggregated into response / suggestion / session
success rates, plus confusion-matrix metrics for the classifiers.

Sessions are independent and may run on a bounded worker pool; every
random draw comes from a per-session generator derived from the run seed,
so concurrency never perturbs results. With scripted backends an entire
evaluation is a pure function of (config, seed).
"""

from __future__ import annotations

import hashlib
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .agent import AgentBackends, UserEvent, AgentOutputKind, step
from .backends import BackendConfig, ChatBackend, JudgeVerdict, judge, make_backend
from .core import (
    Perspective,
    Role,
    Split,
    Topic,
    TopicRegistry,
    Utterance,
    load_default_registry,
    render_messages,
    transcript_text,
)
from .errors import BackendError, LabelParseError, ValidationError
from .prompts import PromptTemplate, TemplateSet, default_templates
from .state import append_utterance, new_state

BACKEND_ROLES = ("agent", "talker", "judge", "eod")


class EvalMode(str, Enum):
    AGENT = "agent"
    TALKER = "talker"


class SuggestionAdoption(str, Enum):
    SCRUB_AND_CONTINUE = "scrub_and_continue"
    ADOPT_AS_USER_UTTERANCE = "adopt_as_user_utterance"


class Termination(str, Enum):
    NATURAL_EOD = "natural_eod"
    RESPONSE_ERROR = "response_error"
    SUGGESTION_ERROR = "suggestion_error"
    TALKER_ERROR = "talker_error"
    MAX_TURNS = "max_turns"
    BACKEND_FAILURE = "backend_failure"


class JudgedKind(str, Enum):
    AGENT_RESPONSE = "agent_response"
    AGENT_SUGGESTION = "agent_suggestion"
    TALKER_UTTERANCE = "talker_utterance"


@dataclass(frozen=True)
class JudgedEvent:
    kind: JudgedKind
    text: str
    verdict: JudgeVerdict
    turn_index: int

    def as_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "text": self.text,
            "appropriate": self.verdict.appropriate,
            "raw_label": self.verdict.raw_label,
            "turn_index": self.turn_index,
        }


@dataclass(frozen=True)
class SessionRecord:
    """One evaluated conversation: its judged events and how it ended.

    ``success`` holds exactly when the session concluded naturally and
    every verdict along the way was appropriate.
    """

    topic_id: str
    session_index: int
    events: tuple[JudgedEvent, ...]
    termination: Termination
    success: bool
    failure_reason: str | None = None


@dataclass(frozen=True)
class EvalConfig:
    """Everything one evaluation run depends on.

    ``initial_prompts`` maps a topic id to the agent's opening utterances;
    session ``i`` uses entry ``i % len``. Topics without an entry get a
    generic opener derived from the title.
    """

    topics: tuple[Topic, ...]
    backends: Mapping[str, BackendConfig]
    sessions_per_topic: int = 30
    suggestion_rate: float = 0.5
    max_turns: int = 20
    seed: int = 0
    suggestion_adoption: SuggestionAdoption = SuggestionAdoption.SCRUB_AND_CONTINUE
    judge_closing_utterance: bool = False
    templates: TemplateSet = field(default_factory=default_templates)
    initial_prompts: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    max_workers: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "topics", tuple(self.topics))
        object.__setattr__(
            self, "suggestion_adoption", SuggestionAdoption(self.suggestion_adoption)
        )
        if not self.topics:
            raise ValidationError("config needs at least one topic")
        if self.sessions_per_topic < 1:
            raise ValidationError("sessions_per_topic must be >= 1")
        if not 0.0 <= self.suggestion_rate <= 1.0:
            raise ValidationError("suggestion_rate must be in [0, 1]")
        if self.max_turns < 1:
            raise ValidationError("max_turns must be >= 1")
        missing = [role for role in BACKEND_ROLES if role not in self.backends]
        if missing:
            raise ValidationError(f"config lacks backend bindings for {missing}")


def session_seed(seed: int, topic_id: str, session_index: int) -> int:
    """Stable per-session RNG seed; part of the reproducibility contract."""
    digest = hashlib.sha256(f"{seed}|{topic_id}|{session_index}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def opening_for(config: EvalConfig, topic: Topic, session_index: int) -> str:
    prompts = config.initial_prompts.get(topic.id)
    if prompts:
        return prompts[session_index % len(prompts)]
    return f"Let's talk about {topic.title}. What comes to your mind first?"


def run_session(
    topic: Topic,
    config: EvalConfig,
    backends: Mapping[str, ChatBackend],
    initial_prompt: str,
    session_index: int = 0,
    mode: EvalMode = EvalMode.AGENT,
) -> SessionRecord:
    """Play one agent-talker session and judge it along the way.

    Each loop iteration is one talker move: a Bernoulli(suggestion_rate)
    draw decides between a suggestion request (judged, then scrubbed or
    adopted) and a user utterance. The agent's response is judged; the
    first inappropriate verdict ends the session with the matching cause,
    a natural conclusion ends it via the detector, and ``max_turns`` is
    the hard stop. Backend faults mark the session ``backend_failure``.
    """
    rng = random.Random(session_seed(config.seed, topic.id, session_index))
    templates = config.templates
    agent_backends = AgentBackends(chat=backends["agent"], eod=backends["eod"])
    judge_backend = backends["judge"]
    talker_backend = backends["talker"]

    state = append_utterance(new_state(topic), Utterance(Role.AGENT, initial_prompt))
    events: list[JudgedEvent] = []
    termination = Termination.MAX_TURNS
    failure_reason: str | None = None

    def judged(kind: JudgedKind, context: str, text: str, turn_index: int) -> JudgeVerdict:
        verdict = judge(judge_backend, templates.judge, topic.title, context, text)
        events.append(JudgedEvent(kind, text, verdict, turn_index))
        return verdict

    try:
        for turn_index in range(config.max_turns):
            if rng.random() < config.suggestion_rate:
                after, out = step(
                    state, UserEvent.suggestion_request(), agent_backends, templates
                )
                verdict = judged(
                    JudgedKind.AGENT_SUGGESTION,
                    transcript_text(state.history),
                    out.text,
                    turn_index,
                )
                if not verdict.appropriate:
                    termination = Termination.SUGGESTION_ERROR
                    break
                state = after
                if config.suggestion_adoption is SuggestionAdoption.ADOPT_AS_USER_UTTERANCE:
                    user_text = out.text
                else:
                    user_text = talker_backend.complete(
                        render_messages(state, Perspective.USER_VIEW, templates.talker)
                    )
            else:
                user_text = talker_backend.complete(
                    render_messages(state, Perspective.USER_VIEW, templates.talker)
                )

            if mode is EvalMode.TALKER:
                verdict = judged(
                    JudgedKind.TALKER_UTTERANCE,
                    transcript_text(state.history),
                    user_text,
                    turn_index,
                )
                if not verdict.appropriate:
                    termination = Termination.TALKER_ERROR
                    break

            state, out = step(
                state, UserEvent.utterance(user_text), agent_backends, templates
            )

            if out.kind is AgentOutputKind.CLOSING:
                termination = Termination.NATURAL_EOD
                if config.judge_closing_utterance:
                    verdict = judged(
                        JudgedKind.AGENT_RESPONSE,
                        transcript_text(state.history[:-1]),
                        out.text,
                        turn_index,
                    )
                    if not verdict.appropriate:
                        termination = Termination.RESPONSE_ERROR
                break

            verdict = judged(
                JudgedKind.AGENT_RESPONSE,
                transcript_text(state.history[:-1]),
                out.text,
                turn_index,
            )
            if not verdict.appropriate:
                termination = Termination.RESPONSE_ERROR
                break
            if out.terminated:
                termination = Termination.NATURAL_EOD
                break
    except (BackendError, LabelParseError) as exc:
        termination = Termination.BACKEND_FAILURE
        failure_reason = f"{type(exc).__name__}: {exc}"

    success = termination is Termination.NATURAL_EOD and all(
        e.verdict.appropriate for e in events
    )
    return SessionRecord(
        topic_id=topic.id,
        session_index=session_index,
        events=tuple(events),
        termination=termination,
        success=success,
        failure_reason=failure_reason,
    )


# --- aggregation ---------------------------------------------------------------


@dataclass
class Counts:
    responses: int = 0
    correct_responses: int = 0
    suggestions: int = 0
    correct_suggestions: int = 0
    sessions: int = 0
    successful_sessions: int = 0
    talker_utterances: int = 0
    correct_talker_utterances: int = 0
    backend_failures: int = 0
    excluded_sessions: int = 0

    def add(self, record: SessionRecord, mode: EvalMode) -> None:
        if record.termination is Termination.BACKEND_FAILURE:
            self.backend_failures += 1
            return
        self.sessions += 1
        if record.success:
            self.successful_sessions += 1
        for event in record.events:
            if event.kind is JudgedKind.AGENT_RESPONSE:
                self.responses += 1
                self.correct_responses += event.verdict.appropriate
            elif event.kind is JudgedKind.AGENT_SUGGESTION:
                self.suggestions += 1
                self.correct_suggestions += event.verdict.appropriate
        if mode is EvalMode.TALKER:
            agent_erred = any(
                e.kind is JudgedKind.AGENT_RESPONSE and not e.verdict.appropriate
                for e in record.events
            )
            if agent_erred:
                self.excluded_sessions += 1
            else:
                for event in record.events:
                    if event.kind is JudgedKind.TALKER_UTTERANCE:
                        self.talker_utterances += 1
                        self.correct_talker_utterances += event.verdict.appropriate

    def merge(self, other: "Counts") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def as_dict(self, mode: EvalMode) -> dict:
        counts = {
            "responses": self.responses,
            "correct_responses": self.correct_responses,
            "suggestions": self.suggestions,
            "correct_suggestions": self.correct_suggestions,
            "sessions": self.sessions,
            "successful_sessions": self.successful_sessions,
            "backend_failures": self.backend_failures,
        }
        if mode is EvalMode.TALKER:
            counts["talker_utterances"] = self.talker_utterances
            counts["correct_talker_utterances"] = self.correct_talker_utterances
            counts["excluded_sessions"] = self.excluded_sessions
        return counts

    def rates(self, mode: EvalMode) -> dict:
        rates = {
            "response_success_rate": _ratio(self.correct_responses, self.responses),
            "suggestion_success_rate": _ratio(self.correct_suggestions, self.suggestions),
            "session_success_rate": _ratio(self.successful_sessions, self.sessions),
        }
        if mode is EvalMode.TALKER:
            rates["talker_success_rate"] = _ratio(
                self.correct_talker_utterances, self.talker_utterances
            )
        return rates


def _ratio(numerator: int, denominator: int) -> float | None:
    return None if denominator == 0 else numerator / denominator


@dataclass(frozen=True)
class EvalReport:
    """Aggregated rates per topic and overall, plus the run configuration."""

    mode: EvalMode
    seed: int
    config: dict
    overall: dict
    per_topic: dict

    def to_json(self) -> str:
        payload = {
            "mode": self.mode.value,
            "seed": self.seed,
            "config": self.config,
            "overall": self.overall,
            "per_topic": self.per_topic,
        }
        return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2)

    def to_json_bytes(self) -> bytes:
        return self.to_json().encode("utf-8")

    @property
    def backend_failures(self) -> int:
        return self.overall["counts"]["backend_failures"]


def _config_echo(config: EvalConfig) -> dict:
    return {
        "topics": [t.id for t in config.topics],
        "sessions_per_topic": config.sessions_per_topic,
        "suggestion_rate": config.suggestion_rate,
        "max_turns": config.max_turns,
        "seed": config.seed,
        "suggestion_adoption": config.suggestion_adoption.value,
        "judge_closing_utterance": config.judge_closing_utterance,
        "backends": {role: config.backends[role].as_dict() for role in sorted(config.backends)},
        "initial_prompts": {tid: list(v) for tid, v in sorted(config.initial_prompts.items())},
        "templates": {
            "response": config.templates.response.name,
            "suggestion": config.templates.suggestion.name,
            "talker": config.templates.talker.name,
            "eod": config.templates.eod.name,
            "judge": config.templates.judge.name,
        },
    }


def run_evaluation(config: EvalConfig, mode: EvalMode = EvalMode.AGENT) -> EvalReport:
    """Run sessions_per_topic sessions per topic and aggregate the rates.

    Backends are instantiated fresh for every session so stateful scripted
    fixtures replay from the top and concurrent sessions cannot interfere;
    records are reduced in (topic, session_index) order.
    """
    jobs = [
        (topic, index)
        for topic in config.topics
        for index in range(config.sessions_per_topic)
    ]

    def play(job: tuple[Topic, int]) -> SessionRecord:
        topic, index = job
        backends = {role: make_backend(cfg) for role, cfg in config.backends.items()}
        return run_session(
            topic, config, backends, opening_for(config, topic, index), index, mode
        )

    workers = config.max_workers or min(len(jobs), 8)
    if workers <= 1:
        records = [play(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(play, jobs))

    order = {topic.id: i for i, topic in enumerate(config.topics)}
    records.sort(key=lambda r: (order[r.topic_id], r.session_index))

    per_topic_counts = {topic.id: Counts() for topic in config.topics}
    for record in records:
        per_topic_counts[record.topic_id].add(record, mode)
    overall = Counts()
    for counts in per_topic_counts.values():
        overall.merge(counts)

    splits = {topic.id: topic.split.value for topic in config.topics}
    per_topic = {
        tid: {
            "split": splits[tid],
            "counts": counts.as_dict(mode),
            "rates": counts.rates(mode),
        }
        for tid, counts in per_topic_counts.items()
    }
    return EvalReport(
        mode=mode,
        seed=config.seed,
        config=_config_echo(config),
        overall={"counts": overall.as_dict(mode), "rates": overall.rates(mode)},
        per_topic=per_topic,
    )


def run_talker_eval(config: EvalConfig) -> EvalReport:
    """Evaluate the talker: suggestion rate forced to 0, talker utterances
    judged, and sessions with erroneous agent responses excluded."""
    forced = replace(config, suggestion_rate=0.0)
    return run_evaluation(forced, mode=EvalMode.TALKER)


# --- classifier metrics -----------------------------------------------------------


def classifier_metrics(
    labels: Sequence[bool], predictions: Sequence[bool]
) -> dict[str, float | None]:
    """Accuracy / precision / recall / F1 from boolean labels and predictions.

    Positives are True. Any metric whose denominator is zero is None.
    """
    if len(labels) != len(predictions):
        raise ValidationError("labels and predictions must have equal length")
    if not labels:
        raise ValidationError("labels must be non-empty")
    tp = fp = fn = tn = 0
    for label, prediction in zip(labels, predictions):
        if prediction:
            if label:
                tp += 1
            else:
                fp += 1
        else:
            if label:
                fn += 1
            else:
                tn += 1
    total = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return {
        "accuracy": (tp + tn) / total,
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


# --- report rendering ----------------------------------------------------------------


def _fmt(rate: float | None) -> str:
    return "-" if rate is None else f"{rate:.3f}"


def render_report_table(report: EvalReport) -> str:
    """Text table with Response / Suggestion / Session columns per topic,
    per split, and overall (talker column added in talker mode)."""
    talker = report.mode is EvalMode.TALKER
    headers = ["Topic", "Split", "Response", "Suggestion", "Session"]
    if talker:
        headers.append("Talker")
    rows = []
    for tid, block in sorted(report.per_topic.items()):
        rates = block["rates"]
        row = [
            tid,
            block["split"],
            _fmt(rates["response_success_rate"]),
            _fmt(rates["suggestion_success_rate"]),
            _fmt(rates["session_success_rate"]),
        ]
        if talker:
            row.append(_fmt(rates.get("talker_success_rate")))
        rows.append(row)

    for split in (Split.IN_DOMAIN.value, Split.OUT_OF_DOMAIN.value):
        agg = Counts()
        seen = 0
        for block in report.per_topic.values():
            if block["split"] == split:
                seen += 1
                for key, value in block["counts"].items():
                    setattr(agg, key, getattr(agg, key) + value)
        if seen:
            rates = agg.rates(report.mode)
            row = [
                f"[{split}]",
                "",
                _fmt(rates["response_success_rate"]),
                _fmt(rates["suggestion_success_rate"]),
                _fmt(rates["session_success_rate"]),
            ]
            if talker:
                row.append(_fmt(rates.get("talker_success_rate")))
            rows.append(row)

    overall_rates = report.overall["rates"]
    row = [
        "[overall]",
        "",
        _fmt(overall_rates["response_success_rate"]),
        _fmt(overall_rates["suggestion_success_rate"]),
        _fmt(overall_rates["session_success_rate"]),
    ]
    if talker:
        row.append(_fmt(overall_rates.get("talker_success_rate")))
    rows.append(row)

    widths = [max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(len(headers))]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(widths[i]) for i, c in enumerate(row)) for row in rows]
    return "\n".join(lines)


# --- config files ----------------------------------------------------------------------


def _template_from_dict(payload: dict) -> PromptTemplate:
    return PromptTemplate(
        name=payload["name"],
        system_template=payload["system_template"],
        user_template=payload.get("user_template", ""),
        allowed_labels=(
            tuple(payload["allowed_labels"]) if payload.get("allowed_labels") else None
        ),
    )


def eval_config_from_dict(
    payload: dict,
    base_dir: Path | None = None,
    registry: TopicRegistry | None = None,
) -> EvalConfig:
    registry = registry or load_default_registry()
    topics = tuple(registry.get(tid) for tid in payload["topics"])
    backends = {
        role: BackendConfig.from_dict(cfg, base_dir)
        for role, cfg in payload["backends"].items()
    }
    templates = default_templates()
    overrides = payload.get("templates", {})
    template_slots = {
        slot: _template_from_dict(overrides[slot])
        for slot in ("response", "suggestion", "talker", "eod", "judge")
        if slot in overrides
    }
    if "closing_note" in overrides:
        template_slots["closing_note"] = overrides["closing_note"]
    if "request_text" in overrides:
        template_slots["request_text"] = overrides["request_text"]
    if template_slots:
        templates = templates.with_overrides(**template_slots)
    return EvalConfig(
        topics=topics,
        backends=backends,
        sessions_per_topic=payload.get("sessions_per_topic", 30),
        suggestion_rate=payload.get("suggestion_rate", 0.5),
        max_turns=payload.get("max_turns", 20),
        seed=payload.get("seed", 0),
        suggestion_adoption=SuggestionAdoption(
            payload.get("suggestion_adoption", "scrub_and_continue")
        ),
        judge_closing_utterance=payload.get("judge_closing_utterance", False),
        templates=templates,
        initial_prompts={
            tid: tuple(prompts)
            for tid, prompts in payload.get("initial_prompts", {}).items()
        },
        max_workers=payload.get("max_workers"),
    )


def eval_config_from_file(path, registry: TopicRegistry | None = None) -> EvalConfig:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    return eval_config_from_dict(payload, base_dir=path.parent, registry=registry)


def load_bundled_eval_config() -> EvalConfig:
    """The bundled scripted end-to-end fixture: 2 topics x 5 sessions with
    one response error and one suggestion error at known positions."""
    ref = resources.files("situdial").joinpath("data/fixtures/eval/config.json")
    with resources.as_file(ref) as path:
        return eval_config_from_file(path)
