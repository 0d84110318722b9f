"""
The dialogue agent, one step at a time
======================================

`step` routes each user event: suggestion requests go straight to the model
(from the user's perspective, no detector); real utterances trigger detector
check #1, a response, and detector check #2. When the user's message already
ends the chat, the agent says one goodbye and the session locks.
"""

from situdial import (
    AgentBackends,
    Role,
    ScriptedChatBackend,
    UserEvent,
    Utterance,
    append_utterance,
    load_default_registry,
    new_state,
    step,
)
from situdial.prompts import default_templates

templates = default_templates()
topic = load_default_registry().get("weather")

backends = AgentBackends(
    chat=ScriptedChatBackend(
        sequence=[
            "You could say: it rained all morning.",   # suggestion
            "I love rainy days, the air smells great.",  # response
            "Goodbye! Stay dry out there.",            # closing
        ]
    ),
    eod=ScriptedChatBackend(sequence=["ongoing", "ongoing", "ended"]),
)

state = append_utterance(
    new_state(topic), Utterance(Role.AGENT, "How is the weather today?")
)

# 1. The learner asks for help; history is unchanged afterwards.
state, suggestion = step(state, UserEvent.suggestion_request(), backends, templates)
print("suggestion:", suggestion.text)
print("history length still:", len(state.history))

# 2. An ordinary turn: two detector checks around the response.
state, response = step(state, UserEvent.utterance("It rained all morning."), backends, templates)
print("\nresponse:", response.text, "| terminated:", response.terminated)

# 3. A farewell: check #1 fires, the agent closes, the state terminates.
state, closing = step(state, UserEvent.utterance("I have to go now. Bye!"), backends, templates)
print("\nclosing:", closing.text, "| terminated:", closing.terminated)

print("\nfinal conversation:")
for utterance in state.history:
    print(f"  {utterance.role.value:>5}: {utterance.text}")
