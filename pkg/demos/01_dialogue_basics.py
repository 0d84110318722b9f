"""
Dialogues, topics, and the two prompt perspectives
==================================================

The bundled registry, the dialogue record format, and how one chat model
serves both sides of the conversation through role-swapped rendering.
"""

from situdial import (
    Dialogue,
    Perspective,
    Role,
    Split,
    Turn,
    Utterance,
    load_default_registry,
    new_state,
    append_utterance,
    parse_dialogue_record,
    render_messages,
    serialize_dialogue_record,
)
from situdial.prompts import AGENT_RESPONSE_TEMPLATE, SUGGESTION_TEMPLATE

# The registry ships 51 in-domain and 20 out-of-domain topics.
registry = load_default_registry()
print(f"{len(registry)} topics, e.g.:")
for topic in registry.topics[:3]:
    print(f"  {topic.id:<12} {topic.title!r} ({topic.split.value})")
print(f"  ... plus {len(registry.split(Split.OUT_OF_DOMAIN))} out-of-domain topics")

# A dialogue is a non-empty list of (user, agent) turns on one topic.
dialogue = Dialogue(
    topic_id="weather",
    turns=(
        Turn.of("Hi! Is it sunny today?", "Yes, not a cloud in the sky."),
        Turn.of("Great, I will walk to school.", "Enjoy the sunshine!"),
    ),
)

# Datasets are stored one dialogue per line; parsing a serialized record
# gives back an equal value.
line = serialize_dialogue_record(dialogue)
print("\nrecord:", line[:70], "...")
assert parse_dialogue_record(line, registry) == dialogue

# Live conversations render into chat messages from either perspective.
state = new_state(registry.get("weather"))
state = append_utterance(state, Utterance(Role.AGENT, "Hello! How is the weather?"))
state = append_utterance(state, Utterance(Role.USER, "It is raining again."))

agent_view = render_messages(state, Perspective.AGENT_VIEW, AGENT_RESPONSE_TEMPLATE)
user_view = render_messages(state, Perspective.USER_VIEW, SUGGESTION_TEMPLATE)

print("\nagent view (model answers as the agent):")
for message in agent_view:
    print(f"  {message.role.value:<9} {message.content[:60]}")
print("user view (same texts, labels swapped; the model drafts the user's line):")
for message in user_view:
    print(f"  {message.role.value:<9} {message.content[:60]}")
