import json

import pytest

from situdial.backends import (
    BackendConfig,
    HttpChatBackend,
    ScriptedChatBackend,
    ScriptedRule,
    canonical_messages_hash,
    detect_eod,
    judge,
    make_backend,
    parse_label,
)
from situdial.core import ChatRole, Message, Role, Utterance
from situdial.datagen import build_eod_examples, synthesize_fixture_dialogues, EodLabel
from situdial.errors import BackendError, FixtureError, LabelParseError, ValidationError
from situdial.evaluation import classifier_metrics
from situdial.prompts import EOD_TEMPLATE, JUDGE_TEMPLATE
from situdial.state import DialogueState

from conftest import CaptureStub

SYS = Message(ChatRole.SYSTEM, "sys")


def msgs(*contents):
    out = [SYS]
    role = ChatRole.USER
    for content in contents:
        out.append(Message(role, content))
        role = ChatRole.ASSISTANT if role is ChatRole.USER else ChatRole.USER
    return out


# --- config validation -----------------------------------------------------------


def test_http_config_requires_endpoint():
    with pytest.raises(ValidationError, match="endpoint_url"):
        BackendConfig(kind="http")


def test_scripted_config_requires_script_path():
    with pytest.raises(ValidationError, match="script_path"):
        BackendConfig(kind="scripted")


def test_kind_specific_fields_are_exclusive():
    with pytest.raises(ValidationError):
        BackendConfig(kind="http", endpoint_url="http://x", script_path="y.json")
    with pytest.raises(ValidationError):
        BackendConfig(kind="scripted", script_path="y.json", endpoint_url="http://x")


def test_config_bounds():
    with pytest.raises(ValidationError):
        BackendConfig(kind="http", endpoint_url="http://x", temperature=-0.1)
    with pytest.raises(ValidationError):
        BackendConfig(kind="http", endpoint_url="http://x", max_output_tokens=0)


# --- scripted backend --------------------------------------------------------------


def test_map_mode_lookup_and_miss():
    prompt = msgs("hello")
    backend = ScriptedChatBackend(mapping={canonical_messages_hash(prompt): "Hello!"})
    assert backend.complete(prompt) == "Hello!"
    other = msgs("different")
    with pytest.raises(FixtureError, match=canonical_messages_hash(other)):
        backend.complete(other)


def test_map_mode_default():
    backend = ScriptedChatBackend(mapping={}, default="fallback")
    assert backend.complete(msgs("anything")) == "fallback"


def test_sequence_mode_orders_and_exhausts():
    backend = ScriptedChatBackend(sequence=["a", "b"])
    assert backend.complete(msgs("x")) == "a"
    assert backend.complete(msgs("x")) == "b"
    with pytest.raises(FixtureError, match="exhausted"):
        backend.complete(msgs("x"))


def test_sequence_mode_cycles_when_enabled():
    backend = ScriptedChatBackend(sequence=["a", "b"], cycle=True)
    assert [backend.complete(msgs("x")) for _ in range(5)] == ["a", "b", "a", "b", "a"]


def test_rules_mode_first_match_and_and_lists():
    backend = ScriptedChatBackend(
        rules=[
            ScriptedRule(("alpha", "beta"), "both"),
            ScriptedRule(("alpha",), "just alpha"),
        ],
        default="neither",
    )
    assert backend.complete(msgs("alpha and beta here")) == "both"
    assert backend.complete(msgs("alpha only")) == "just alpha"
    assert backend.complete(msgs("nothing")) == "neither"


def test_rules_mode_without_default_errors():
    backend = ScriptedChatBackend(rules=[ScriptedRule(("alpha",), "a")])
    with pytest.raises(FixtureError):
        backend.complete(msgs("nothing"))


def test_fixture_file_forms(tmp_path):
    list_path = tmp_path / "list.json"
    list_path.write_text(json.dumps(["one", "two"]))
    seq = ScriptedChatBackend.from_file(list_path)
    assert seq.complete(msgs("x")) == "one"

    map_path = tmp_path / "map.json"
    prompt = msgs("keyed")
    map_path.write_text(json.dumps({canonical_messages_hash(prompt): "value"}))
    mapped = ScriptedChatBackend.from_file(map_path)
    assert mapped.complete(prompt) == "value"

    rules_path = tmp_path / "rules.json"
    rules_path.write_text(
        json.dumps(
            {
                "mode": "rules",
                "rules": [{"contains": "ping", "completion": "pong"}],
                "default": "dunno",
            }
        )
    )
    ruled = make_backend(BackendConfig(kind="scripted", script_path=str(rules_path)))
    assert ruled.complete(msgs("ping!")) == "pong"
    assert ruled.complete(msgs("other")) == "dunno"


def test_scripted_map_is_pure():
    prompt = msgs("hello")
    backend = ScriptedChatBackend(mapping={canonical_messages_hash(prompt): "Hi"})
    assert [backend.complete(prompt) for _ in range(3)] == ["Hi", "Hi", "Hi"]


def test_complete_preconditions():
    backend = ScriptedChatBackend(sequence=["a"])
    with pytest.raises(ValidationError):
        backend.complete([])
    with pytest.raises(ValidationError):
        backend.complete([Message(ChatRole.USER, "no system first")])


def test_empty_completion_is_backend_error():
    backend = ScriptedChatBackend(sequence=["   "])
    with pytest.raises(BackendError, match="empty"):
        backend.complete(msgs("x"))


# --- label parsing and classifiers -----------------------------------------------


@pytest.mark.parametrize(
    "completion,expected",
    [
        ("yes", "yes"),
        ("Yes, definitely.", "yes"),
        ("No.", "no"),
        ('"no"', "no"),
        ("maybe", None),
        ("", None),
    ],
)
def test_parse_label(completion, expected):
    assert parse_label(completion, ("yes", "no")) == expected


def test_judge_yes_and_no():
    yes = judge(ScriptedChatBackend(sequence=["yes"]), JUDGE_TEMPLATE, "Weather", "ctx", "utt")
    assert yes.appropriate and yes.raw_label == "yes"
    no = judge(ScriptedChatBackend(sequence=["No."]), JUDGE_TEMPLATE, "Weather", "ctx", "utt")
    assert not no.appropriate


def test_judge_reprompts_once_then_errors():
    flaky = ScriptedChatBackend(sequence=["maybe", "yes"])
    assert judge(flaky, JUDGE_TEMPLATE, "Weather", "ctx", "utt").appropriate

    stubborn = ScriptedChatBackend(sequence=["maybe", "maybe"])
    with pytest.raises(LabelParseError):
        judge(stubborn, JUDGE_TEMPLATE, "Weather", "ctx", "utt")
    assert stubborn.call_count == 2


def test_judge_requires_utterance():
    with pytest.raises(ValidationError):
        judge(ScriptedChatBackend(sequence=["yes"]), JUDGE_TEMPLATE, "Weather", "ctx", " ")


def test_detect_eod_labels(registry):
    topic = registry.get("weather")
    state = DialogueState(
        topic=topic,
        history=(Utterance(Role.USER, "Goodbye!"), Utterance(Role.AGENT, "Bye, see you!")),
    )
    assert detect_eod(ScriptedChatBackend(sequence=["ended"]), EOD_TEMPLATE, state) is True
    assert detect_eod(ScriptedChatBackend(sequence=["ongoing"]), EOD_TEMPLATE, state) is False
    with pytest.raises(ValidationError):
        detect_eod(ScriptedChatBackend(sequence=["ended"]), EOD_TEMPLATE, DialogueState(topic=topic))


def test_eod_gold_label_replay_accuracy(registry):
    """Full parse path over a 500-example labeled set built by the pipeline."""
    dialogues = synthesize_fixture_dialogues(registry.topics, 250, rng_seed=5)
    examples = build_eod_examples(dialogues, per_dialogue=2, rng_seed=5)
    assert len(examples) == 500
    gold = [ex.label is EodLabel.COMPLETE for ex in examples]
    backend = ScriptedChatBackend(
        sequence=["ended" if g else "ongoing" for g in gold]
    )
    topic = registry.get("weather")
    predictions = [
        detect_eod(backend, EOD_TEMPLATE, DialogueState(topic=topic, history=ex.history))
        for ex in examples
    ]
    metrics = classifier_metrics(gold, predictions)
    assert metrics["accuracy"] == 1.0


# --- http backend -------------------------------------------------------------------


def test_http_echo_and_wire_capture():
    def echo(body):
        return body["messages"][-1]["content"]

    with CaptureStub(responder=echo) as stub:
        backend = HttpChatBackend(
            BackendConfig(kind="http", endpoint_url=stub.url, model_name="test-model")
        )
        prompt = msgs("echo me")
        assert backend.complete(prompt) == "echo me"
        assert len(stub.requests) == 1
        body = stub.requests[0]["body"]
        assert body["model"] == "test-model"
        assert body["messages"] == [m.as_dict() for m in prompt]
        assert body["temperature"] == 0.7
        assert body["max_tokens"] == 256


def test_http_retries_transport_failures():
    with CaptureStub(failures_before_success=1) as stub:
        backend = HttpChatBackend(
            BackendConfig(
                kind="http", endpoint_url=stub.url, retry_limit=2, backoff_base=0.01
            )
        )
        assert backend.complete(msgs("x")) == "ok"
        assert len(stub.requests) == 2


def test_http_gives_up_after_retry_limit():
    with CaptureStub(failures_before_success=5) as stub:
        backend = HttpChatBackend(
            BackendConfig(
                kind="http", endpoint_url=stub.url, retry_limit=1, backoff_base=0.01
            )
        )
        with pytest.raises(BackendError, match="after 2 attempts"):
            backend.complete(msgs("x"))
        assert len(stub.requests) == 2


def test_http_extraction_failure_does_not_retry():
    with CaptureStub() as stub:
        backend = HttpChatBackend(
            BackendConfig(
                kind="http",
                endpoint_url=stub.url,
                retry_limit=3,
                backoff_base=0.01,
                response_path="missing.path",
            )
        )
        with pytest.raises(BackendError, match="missing.path"):
            backend.complete(msgs("x"))
        assert len(stub.requests) == 1


def test_http_sends_auth_token_from_env(monkeypatch):
    monkeypatch.setenv("CHAT_API_TOKEN", "sekrit")
    with CaptureStub() as stub:
        backend = HttpChatBackend(BackendConfig(kind="http", endpoint_url=stub.url))
        backend.complete(msgs("x"))
        assert stub.requests[0]["headers"]["Authorization"] == "Bearer sekrit"


def test_inflight_limit_is_validated_and_adjustable():
    from situdial.backends import set_inflight_limit

    with pytest.raises(ValidationError):
        set_inflight_limit(0)
    try:
        set_inflight_limit(1)
        with CaptureStub() as stub:
            backend = HttpChatBackend(BackendConfig(kind="http", endpoint_url=stub.url))
            assert backend.complete(msgs("x")) == "ok"
    finally:
        set_inflight_limit(8)
