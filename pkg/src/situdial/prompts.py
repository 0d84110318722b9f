"""Prompt templates for generation and for the two prompted classifiers.

The default texts below are original to this project. Classifier templates
constrain the model to a fixed label set; generation templates only set the
scene and rely on rendered history for context.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field, replace

from .core import SUGGESTION_REQUEST_TEXT, ChatRole, Message, MessageList
from .errors import ValidationError


class _StrictDict(dict):
    def __missing__(self, key):
        raise ValidationError(f"template placeholder {{{key}}} was not supplied")


@dataclass(frozen=True)
class PromptTemplate:
    """A named template with a system part and an optional user part.

    Placeholders: ``{topic}``, ``{context}``, ``{utterance}``. Classifier
    templates also declare the labels a completion may carry.
    """

    name: str
    system_template: str
    user_template: str = ""
    allowed_labels: tuple[str, ...] | None = None

    def render_system(self, **subs: str) -> str:
        return string.Formatter().vformat(self.system_template, (), _StrictDict(subs))

    def render(self, **subs: str) -> MessageList:
        messages = [Message(ChatRole.SYSTEM, self.render_system(**subs))]
        if self.user_template:
            user = string.Formatter().vformat(self.user_template, (), _StrictDict(subs))
            messages.append(Message(ChatRole.USER, user))
        return messages


#: Instruction required in every dialogue-generation template, because the
#: target users are second language learners.
SIMPLE_LANGUAGE_NOTE = "Use simple words and sentences."

AGENT_RESPONSE_TEMPLATE = PromptTemplate(
    name="agent_response",
    system_template=(
        "You are a friendly conversation partner helping a second language "
        "learner practice English. Keep the conversation strictly on the "
        "topic: {topic}. Reply with one or two short sentences. "
        + SIMPLE_LANGUAGE_NOTE
    ),
)

SUGGESTION_TEMPLATE = PromptTemplate(
    name="suggestion",
    system_template=(
        "You are helping a second language learner who is stuck in a "
        "conversation about {topic}. Draft one short message the learner "
        "could send next, written in the learner's own voice. "
        + SIMPLE_LANGUAGE_NOTE
    ),
)

TALKER_TEMPLATE = PromptTemplate(
    name="talker",
    system_template=(
        "You are a second language learner having a conversation about "
        "{topic}. Write your next message. Keep it short. "
        + SIMPLE_LANGUAGE_NOTE
    ),
)

EOD_TEMPLATE = PromptTemplate(
    name="end_of_dialogue",
    system_template=(
        "You judge whether a conversation about {topic} has naturally "
        "concluded, meaning the speakers have said goodbye or clearly have "
        "nothing left to exchange."
    ),
    user_template=(
        "Conversation so far:\n{context}\n\n"
        "Answer with exactly one word: ended or ongoing."
    ),
    allowed_labels=("ended", "ongoing"),
)

JUDGE_TEMPLATE = PromptTemplate(
    name="judge",
    system_template=(
        "You grade messages from a conversation about {topic}. Decide "
        "whether the candidate message is a sensible, coherent and "
        "consistent continuation of the context."
    ),
    user_template=(
        "Context:\n{context}\n\n"
        "Candidate message:\n{utterance}\n\n"
        "Answer with exactly one word: yes or no."
    ),
    allowed_labels=("yes", "no"),
)

DIALOGUE_GENERATION_TEMPLATE = PromptTemplate(
    name="dialogue_generation",
    system_template=(
        "Write a short example conversation between a learner (User) and a "
        "conversation partner (Agent) about {topic}. "
        + SIMPLE_LANGUAGE_NOTE
        + " Write one utterance per line, alternating 'User:' and 'Agent:' "
        "lines, starting with 'User:'. Produce between two and six full "
        "exchanges and end with an 'Agent:' line."
    ),
    user_template="Write the conversation now.",
)

#: Appended to the agent's system message when the user's last message ended
#: the conversation and the agent should produce one farewell.
CLOSING_NOTE = (
    "The learner's last message ends the conversation. "
    "Say a short, warm goodbye and do not ask another question."
)


@dataclass(frozen=True)
class TemplateSet:
    """The full template binding one deployment uses, one slot per role."""

    response: PromptTemplate = AGENT_RESPONSE_TEMPLATE
    suggestion: PromptTemplate = SUGGESTION_TEMPLATE
    talker: PromptTemplate = TALKER_TEMPLATE
    eod: PromptTemplate = EOD_TEMPLATE
    judge: PromptTemplate = JUDGE_TEMPLATE
    generation: PromptTemplate = DIALOGUE_GENERATION_TEMPLATE
    closing_note: str = CLOSING_NOTE
    request_text: str = SUGGESTION_REQUEST_TEXT

    def with_overrides(self, **kwargs) -> "TemplateSet":
        return replace(self, **kwargs)


def default_templates() -> TemplateSet:
    return TemplateSet()
