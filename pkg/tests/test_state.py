import random

import pytest

from situdial.core import Role, Utterance
from situdial.errors import ProtocolError, StateError
from situdial.state import (
    EventKind,
    append_utterance,
    event_from_json,
    event_to_json,
    mark_terminated,
    new_state,
    record_suggestion,
    replay_events,
)


@pytest.fixture
def topic(registry):
    return registry.get("weather")


def test_append_to_empty(topic):
    state = append_utterance(new_state(topic), Utterance(Role.USER, "Hi"))
    assert [u.text for u in state.history] == ["Hi"]
    assert state.events[-1].kind is EventKind.USER_MSG


def test_agent_may_open(topic):
    state = append_utterance(new_state(topic), Utterance(Role.AGENT, "Welcome!"))
    assert state.history[0].role is Role.AGENT


def test_consecutive_same_role_rejected(topic):
    state = append_utterance(new_state(topic), Utterance(Role.USER, "Hi"))
    with pytest.raises(ProtocolError):
        append_utterance(state, Utterance(Role.USER, "Hi again"))


def test_ten_alternating_appends_match_list_oracle(topic):
    state = new_state(topic)
    oracle = []
    role = Role.USER
    for i in range(10):
        text = f"msg {i}"
        state = append_utterance(state, Utterance(role, text))
        oracle.append((role, text))
        role = Role.AGENT if role is Role.USER else Role.USER
    assert [(u.role, u.text) for u in state.history] == oracle
    assert len(state.history) == 10


def test_scrub_is_identity_on_history(topic):
    state = append_utterance(new_state(topic), Utterance(Role.AGENT, "Hello"))
    before = state.history
    state = record_suggestion(state, "Please suggest what I could say next.", "Say hi back")
    assert state.history == before
    assert state.pending_suggestion is None


def test_two_suggestion_exchanges_emit_four_events(topic):
    state = append_utterance(new_state(topic), Utterance(Role.AGENT, "Hello"))
    events_before = len(state.events)
    state = record_suggestion(state, "req", "sugg one")
    state = record_suggestion(state, "req", "sugg two")
    new_events = state.events[events_before:]
    assert [e.kind for e in new_events] == [
        EventKind.SUGGESTION_REQUEST,
        EventKind.SUGGESTION,
        EventKind.SUGGESTION_REQUEST,
        EventKind.SUGGESTION,
    ]
    assert len(state.history) == 1


def test_termination_is_idempotent_and_monotone(topic):
    state = mark_terminated(new_state(topic))
    assert state.terminated
    again = mark_terminated(state)
    assert again == state  # no extra event
    with pytest.raises(StateError):
        append_utterance(state, Utterance(Role.USER, "hi"))
    with pytest.raises(StateError):
        record_suggestion(state, "req", "sugg")


def random_walk(topic, rng, n_ops):
    """Drive a state with random ops; return state and the appends-only oracle."""
    state = new_state(topic)
    oracle = []
    next_role = rng.choice([Role.USER, Role.AGENT])
    for i in range(n_ops):
        if rng.random() < 0.4:
            state = record_suggestion(state, "req", f"sugg {i}")
        else:
            text = f"utterance {i}"
            state = append_utterance(state, Utterance(next_role, text))
            oracle.append((next_role, text))
            next_role = Role.AGENT if next_role is Role.USER else Role.USER
    return state, oracle


def test_scrub_invariance_random_sequences(topic):
    rng = random.Random(99)
    for _ in range(500):
        state, oracle = random_walk(topic, rng, rng.randint(1, 30))
        assert [(u.role, u.text) for u in state.history] == oracle


def test_replay_reconstructs_state_exactly(topic):
    rng = random.Random(7)
    for _ in range(200):
        state, _ = random_walk(topic, rng, rng.randint(1, 20))
        if rng.random() < 0.5:
            state = mark_terminated(state)
        assert replay_events(topic, state.events) == state


def test_event_json_round_trip(topic):
    state = append_utterance(new_state(topic), Utterance(Role.USER, "héllo ☀"))
    event = state.events[0]
    assert event_from_json(event_to_json(event)) == event
