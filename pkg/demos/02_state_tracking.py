"""
State tracking and suggestion scrubbing
=======================================

The state tracker appends utterances, enforces role alternation, and keeps
suggestion exchanges out of the model-visible history while logging them in
the transcript. Replaying the transcript rebuilds the exact state.
"""

from situdial import (
    Role,
    Utterance,
    append_utterance,
    load_default_registry,
    mark_terminated,
    new_state,
    record_suggestion,
    replay_events,
)

topic = load_default_registry().get("my-hobbies")

# The agent opens; roles must alternate from there on.
state = new_state(topic)
state = append_utterance(state, Utterance(Role.AGENT, "What do you like to do?"))

# The learner is stuck and asks for help. The exchange is recorded as two
# transcript events but history is untouched.
before = state.history
state = record_suggestion(
    state, "Please suggest what I could say next.", "You could say: I like painting."
)
assert state.history == before
print("history after suggestion:", [u.text for u in state.history])
print("transcript so far:       ", [e.kind.value for e in state.events])

# The learner adopts the suggestion (that is just an ordinary utterance).
state = append_utterance(state, Utterance(Role.USER, "I like painting."))
state = append_utterance(state, Utterance(Role.AGENT, "Lovely! What do you paint?"))

# Termination is final: once marked, the state accepts no appends.
state = mark_terminated(state)
assert mark_terminated(state) == state  # idempotent

# The transcript is the durable record: replaying it reconstructs the state,
# including what the history itself forgot.
rebuilt = replay_events(topic, state.events)
assert rebuilt == state
print("replay reconstructs the state exactly:", rebuilt == state)
