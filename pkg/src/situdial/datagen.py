"""Dataset procedures: topic-driven dialogue generation, suggestion-turn
insertion, end-of-dialogue example construction, and judge pair construction.

Everything here is seeded and deterministic: identical inputs and seed give
byte-identical outputs, and parallel callers must derive their own
sub-seeds rather than share a generator.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from .backends import ChatBackend
from .core import (
    SUGGESTION_REQUEST_TEXT,
    AgentTurn,
    Dialogue,
    Provenance,
    Role,
    SuggestionAnnotatedDialogue,
    SuggestionTurn,
    Topic,
    Turn,
    Utterance,
    UserTurn,
)
from .errors import GenerationError, SamplingError, ValidationError
from .prompts import SIMPLE_LANGUAGE_NOTE, PromptTemplate

log = logging.getLogger(__name__)


# --- dialogue generation --------------------------------------------------------

_LINE_RE = re.compile(r"^(user|agent)\s*:\s*(.+)$", re.IGNORECASE)


def parse_generated_dialogue(text: str) -> tuple[Turn, ...] | None:
    """Parse 'User:'/'Agent:' alternating lines into turns.

    Returns None for anything malformed: wrong first speaker, broken
    alternation, an unpaired trailing user line, or no complete turn.
    """
    utterances: list[tuple[str, str]] = []
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        match = _LINE_RE.match(line)
        if not match:
            return None
        utterances.append((match.group(1).lower(), match.group(2).strip()))
    if len(utterances) < 2 or len(utterances) % 2 != 0:
        return None
    turns = []
    for i in range(0, len(utterances), 2):
        (first_role, user_text), (second_role, agent_text) = utterances[i], utterances[i + 1]
        if first_role != "user" or second_role != "agent":
            return None
        if not user_text or not agent_text:
            return None
        turns.append(Turn.of(user_text, agent_text))
    return tuple(turns)


@dataclass
class GenerationResult:
    dialogues: list[Dialogue]
    dropped: int
    errors: list[str]

    @property
    def dropped_count(self) -> int:
        return self.dropped


def generate_topic_dialogues(
    topic: Topic,
    n: int,
    backend: ChatBackend,
    template: PromptTemplate,
    rng_seed: int = 0,
) -> GenerationResult:
    """Ask the backend for ``n`` dialogues on one topic.

    Completions that fail dialogue-format parsing are dropped and counted;
    backend failures abort the remaining calls and are reported alongside
    the partial result. The template must carry the simple-language
    instruction, since generated data targets language learners.

    ``rng_seed`` is accepted for interface uniformity across the pipeline;
    variation between completions comes from backend sampling.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if SIMPLE_LANGUAGE_NOTE not in template.system_template:
        raise ValidationError(
            f"generation template must include the instruction {SIMPLE_LANGUAGE_NOTE!r}"
        )
    del rng_seed
    messages = template.render(topic=topic.title)
    dialogues: list[Dialogue] = []
    dropped = 0
    errors: list[str] = []
    for _ in range(n):
        try:
            completion = backend.complete(list(messages))
        except Exception as exc:  # backend gave up after its own retries
            errors.append(str(exc))
            break
        turns = parse_generated_dialogue(completion)
        if turns is None:
            dropped += 1
            continue
        dialogues.append(
            Dialogue(topic_id=topic.id, turns=turns, provenance=Provenance.GENERATED)
        )
    if not dialogues:
        raise GenerationError(
            f"no parseable dialogues for topic {topic.id!r} "
            f"({dropped} dropped, {len(errors)} backend errors)"
        )
    return GenerationResult(dialogues=dialogues, dropped=dropped, errors=errors)


# --- curation filters -----------------------------------------------------------


def no_op_filter(dialogues: Iterable[Dialogue]) -> list[Dialogue]:
    """Stand-in for the manual curation pass; keeps everything."""
    return list(dialogues)


def rule_filter(
    min_turns: int = 2,
    max_turns: int = 8,
    blocked_words: Sequence[str] = (),
) -> Callable[[Iterable[Dialogue]], list[Dialogue]]:
    """Cheap rule-based curation: turn-count bounds and a blocklist."""
    lowered = tuple(w.lower() for w in blocked_words)

    def apply(dialogues: Iterable[Dialogue]) -> list[Dialogue]:
        kept = []
        for d in dialogues:
            if not (min_turns <= d.n_turns <= max_turns):
                continue
            text = " ".join(u.text.lower() for u in d.utterances())
            if any(word in text for word in lowered):
                continue
            kept.append(d)
        return kept

    return apply


# --- suggestion-turn insertion ----------------------------------------------------


def insert_suggestion_turns(
    dialogue: Dialogue,
    insertion_prob: float,
    rng_seed: int = 0,
    request_text: str = SUGGESTION_REQUEST_TEXT,
) -> SuggestionAnnotatedDialogue:
    """Independently replace each user utterance with a suggestion turn.

    A selected user utterance U becomes SuggestionTurn(request, target=U);
    the original text is kept as the ideal suggestion, so substituting every
    target back reproduces the source dialogue exactly.
    """
    if not 0.0 <= insertion_prob <= 1.0:
        raise ValidationError("insertion_prob must be in [0, 1]")
    rng = random.Random(rng_seed)
    events: list = []
    for turn in dialogue.turns:
        if rng.random() < insertion_prob:
            events.append(SuggestionTurn(request_text, turn.user.text))
        else:
            events.append(UserTurn(turn.user.text))
        events.append(AgentTurn(turn.agent.text))
    return SuggestionAnnotatedDialogue(
        topic_id=dialogue.topic_id,
        events=tuple(events),
        provenance=dialogue.provenance,
    )


def reconstruct_dialogue(annotated: SuggestionAnnotatedDialogue) -> Dialogue:
    """Substitute every suggestion target back into its user position."""
    turns: list[Turn] = []
    pending_user: str | None = None
    for event in annotated.events:
        if isinstance(event, (UserTurn, SuggestionTurn)):
            if pending_user is not None:
                raise ValidationError("two user positions without an agent turn between")
            pending_user = (
                event.text if isinstance(event, UserTurn) else event.target_suggestion_text
            )
        else:
            if pending_user is None:
                raise ValidationError("agent turn without a preceding user position")
            turns.append(Turn.of(pending_user, event.text))
            pending_user = None
    if pending_user is not None:
        raise ValidationError("trailing user position without an agent turn")
    return Dialogue(
        topic_id=annotated.topic_id,
        turns=tuple(turns),
        provenance=annotated.provenance,
    )


# --- end-of-dialogue examples ------------------------------------------------------


class EodLabel(str, Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"


@dataclass(frozen=True)
class EodExample:
    """A detector training/testing sample: a history and whether it is whole."""

    history: tuple[Utterance, ...]
    label: EodLabel

    def as_dict(self) -> dict:
        return {
            "label": self.label.value,
            "history": [{"role": u.role.value, "text": u.text} for u in self.history],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EodExample":
        return cls(
            history=tuple(Utterance(Role(u["role"]), u["text"]) for u in payload["history"]),
            label=EodLabel(payload["label"]),
        )


def build_eod_examples(
    dialogues: Sequence[Dialogue],
    per_dialogue: int = 2,
    rng_seed: int = 0,
) -> list[EodExample]:
    """Emit balanced complete/incomplete detector examples.

    Each source dialogue contributes ``per_dialogue // 2`` whole histories
    and as many strict prefixes, cut at a uniformly random utterance
    boundary strictly before the end. Dialogues with fewer than two turns
    are skipped with a warning.
    """
    if per_dialogue < 2 or per_dialogue % 2 != 0:
        raise ValidationError("per_dialogue must be an even number >= 2")
    rng = random.Random(rng_seed)
    examples: list[EodExample] = []
    skipped = 0
    for dialogue in dialogues:
        if dialogue.n_turns < 2:
            skipped += 1
            continue
        flat = dialogue.utterances()
        for _ in range(per_dialogue // 2):
            examples.append(EodExample(history=flat, label=EodLabel.COMPLETE))
            cut = rng.randint(1, len(flat) - 1)
            examples.append(EodExample(history=flat[:cut], label=EodLabel.INCOMPLETE))
    if skipped:
        log.warning("skipped %d dialogues with fewer than 2 turns", skipped)
    return examples


# --- judge pairs --------------------------------------------------------------------


class PairKind(str, Enum):
    RESPONSE_PAIR = "response_pair"
    SUGGESTION_PAIR = "suggestion_pair"


class PairLabel(str, Enum):
    APPROPRIATE = "appropriate"
    INAPPROPRIATE = "inappropriate"


class NegativeSource(str, Enum):
    OTHER_CONVERSATION = "other_conversation"
    SAME_CONVERSATION = "same_conversation"


@dataclass(frozen=True)
class JudgePair:
    """A (context, utterance) sample with its appropriateness label."""

    topic_id: str
    context: tuple[Utterance, ...]
    utterance: Utterance
    kind: PairKind
    label: PairLabel
    negative_source: NegativeSource | None = None

    def __post_init__(self):
        if self.label is PairLabel.INAPPROPRIATE and self.negative_source is None:
            raise ValidationError("inappropriate pairs must record their negative_source")
        if self.label is PairLabel.APPROPRIATE and self.negative_source is not None:
            raise ValidationError("appropriate pairs carry no negative_source")

    def as_dict(self) -> dict:
        return {
            "topic_id": self.topic_id,
            "kind": self.kind.value,
            "label": self.label.value,
            "negative_source": self.negative_source.value if self.negative_source else None,
            "context": [{"role": u.role.value, "text": u.text} for u in self.context],
            "utterance": {"role": self.utterance.role.value, "text": self.utterance.text},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "JudgePair":
        return cls(
            topic_id=payload["topic_id"],
            context=tuple(Utterance(Role(u["role"]), u["text"]) for u in payload["context"]),
            utterance=Utterance(
                Role(payload["utterance"]["role"]), payload["utterance"]["text"]
            ),
            kind=PairKind(payload["kind"]),
            label=PairLabel(payload["label"]),
            negative_source=(
                NegativeSource(payload["negative_source"])
                if payload.get("negative_source")
                else None
            ),
        )


def _positions(dialogue: Dialogue, kind: PairKind) -> list[int]:
    """Utterance indices that can serve as the judged continuation."""
    flat_len = 2 * dialogue.n_turns
    if kind is PairKind.RESPONSE_PAIR:
        return list(range(1, flat_len, 2))  # agent utterances, any turn
    return list(range(2, flat_len, 2))  # user utterances with non-empty context


def _role_pool(
    dialogues: Sequence[Dialogue], role: Role
) -> list[tuple[int, int, Utterance]]:
    pool = []
    for d_idx, dialogue in enumerate(dialogues):
        for u_idx, utterance in enumerate(dialogue.utterances()):
            if utterance.role is role:
                pool.append((d_idx, u_idx, utterance))
    return pool


def build_judge_pairs(
    dialogues: Sequence[Dialogue],
    n_pairs: int,
    kind_mix: float = 0.5,
    rng_seed: int = 0,
) -> list[JudgePair]:
    """Construct balanced appropriate/inappropriate judge pairs.

    Positives pair a context with its true continuation. Negatives swap in
    an utterance of the same role drawn either from another conversation or
    from a different position of the same one, never equal to the ground
    truth. ``kind_mix`` is the fraction of response pairs; the remainder
    are suggestion pairs, whose judged utterance is user-side.
    """
    if len(dialogues) < 2:
        raise SamplingError("judge pairs need at least 2 dialogues for negative donors")
    if n_pairs < 1:
        raise ValidationError("n_pairs must be >= 1")
    if not 0.0 <= kind_mix <= 1.0:
        raise ValidationError("kind_mix must be in [0, 1]")

    rng = random.Random(rng_seed)
    n_positive = n_pairs - n_pairs // 2
    n_negative = n_pairs // 2
    quotas = {
        (PairLabel.APPROPRIATE, PairKind.RESPONSE_PAIR): round(n_positive * kind_mix),
        (PairLabel.INAPPROPRIATE, PairKind.RESPONSE_PAIR): round(n_negative * kind_mix),
    }
    quotas[(PairLabel.APPROPRIATE, PairKind.SUGGESTION_PAIR)] = (
        n_positive - quotas[(PairLabel.APPROPRIATE, PairKind.RESPONSE_PAIR)]
    )
    quotas[(PairLabel.INAPPROPRIATE, PairKind.SUGGESTION_PAIR)] = (
        n_negative - quotas[(PairLabel.INAPPROPRIATE, PairKind.RESPONSE_PAIR)]
    )

    pools = {
        PairKind.RESPONSE_PAIR: _role_pool(dialogues, Role.AGENT),
        PairKind.SUGGESTION_PAIR: _role_pool(dialogues, Role.USER),
    }
    eligible = {
        kind: [i for i, d in enumerate(dialogues) if _positions(d, kind)]
        for kind in PairKind
    }

    pairs: list[JudgePair] = []
    for (label, kind), quota in quotas.items():
        candidates = eligible[kind]
        if quota and not candidates:
            raise SamplingError(f"no dialogue can host a {kind.value}")
        for _ in range(quota):
            d_idx = candidates[rng.randrange(len(candidates))]
            dialogue = dialogues[d_idx]
            flat = dialogue.utterances()
            position = rng.choice(_positions(dialogue, kind))
            context = flat[:position]
            truth = flat[position]
            if label is PairLabel.APPROPRIATE:
                pairs.append(
                    JudgePair(dialogue.topic_id, context, truth, kind, label)
                )
                continue
            utterance, source = _draw_negative(
                rng, pools[kind], d_idx, position, truth
            )
            pairs.append(
                JudgePair(dialogue.topic_id, context, utterance, kind, label, source)
            )
    return pairs


def _draw_negative(
    rng: random.Random,
    pool: list[tuple[int, int, Utterance]],
    d_idx: int,
    position: int,
    truth: Utterance,
) -> tuple[Utterance, NegativeSource]:
    """Pick a same-role utterance that is not the ground truth.

    Tries the randomly chosen source first and falls back to the other;
    candidates equal to the truth's text are rejected outright so a
    coincidental duplicate can never leak the answer.
    """
    sources = [NegativeSource.OTHER_CONVERSATION, NegativeSource.SAME_CONVERSATION]
    if rng.random() < 0.5:
        sources.reverse()
    for source in sources:
        if source is NegativeSource.OTHER_CONVERSATION:
            candidates = [u for di, _, u in pool if di != d_idx and u.text != truth.text]
        else:
            candidates = [
                u
                for di, ui, u in pool
                if di == d_idx and ui != position and u.text != truth.text
            ]
        if candidates:
            return candidates[rng.randrange(len(candidates))], source
    raise SamplingError("no negative candidate differs from the ground truth")


# --- synthetic fixture corpus ---------------------------------------------------------

_FIXTURE_OPENERS = [
    "Hello! Can we talk about {title}?",
    "Hi there. I want to practice talking about {title}.",
    "Good morning! {title} is on my mind today.",
    "Hey! May I ask you about {title}?",
]
_FIXTURE_USER_LINES = [
    "I think {title} is very interesting, number {i}.",
    "Yesterday I read about {title}; fact {i} surprised me.",
    "My friend loves {title}; she mentions it {i} times a day.",
    "Can you tell me more about {title}? Question {i}.",
    "In my country, {title} feels different. Note {i}.",
]
_FIXTURE_AGENT_LINES = [
    "That is a nice thought about {title} (reply {i}).",
    "Sure! Here is something about {title}: point {i}.",
    "Interesting! {title} has many sides; take {i}.",
    "Good question. About {title}, consider idea {i}.",
    "I see. Many people enjoy {title}; example {i} is café terraces.",
]


def synthesize_fixture_dialogues(
    topics: Sequence[Topic],
    count: int,
    rng_seed: int = 0,
) -> list[Dialogue]:
    """Deterministically manufacture a test corpus without any backend.

    Texts embed the record and turn indices so every utterance in the
    corpus is unique, which the leak-scan oracles rely on. Records cycle
    through the given topics and vary between 2 and 5 turns.
    """
    if count < 1:
        raise ValidationError("count must be >= 1")
    rng = random.Random(rng_seed)
    dialogues = []
    for i in range(count):
        topic = topics[i % len(topics)]
        n_turns = rng.randint(2, 5)
        turns = [
            Turn.of(
                _FIXTURE_OPENERS[i % len(_FIXTURE_OPENERS)].format(title=topic.title)
                + f" (record {i})",
                _FIXTURE_AGENT_LINES[0].format(title=topic.title, i=f"{i}.0"),
            )
        ]
        for t in range(1, n_turns):
            turns.append(
                Turn.of(
                    _FIXTURE_USER_LINES[t % len(_FIXTURE_USER_LINES)].format(
                        title=topic.title, i=f"{i}.{t}"
                    ),
                    _FIXTURE_AGENT_LINES[t % len(_FIXTURE_AGENT_LINES)].format(
                        title=topic.title, i=f"{i}.{t}"
                    ),
                )
            )
        dialogues.append(
            Dialogue(
                topic_id=topic.id,
                turns=tuple(turns),
                provenance=Provenance.SYNTHETIC_FIXTURE,
            )
        )
    return dialogues


# --- jsonl helpers ---------------------------------------------------------------------


def write_jsonl(path, records: Iterable[dict]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
            n += 1
    return n
