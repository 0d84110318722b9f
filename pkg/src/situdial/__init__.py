"""Situational dialogue practice engine and self-play evaluation harness.

The package splits into: domain types and serialization (:mod:`core`), the
live state tracker (:mod:`state`), chat backends with the judge and
end-of-dialogue classifiers (:mod:`backends`), the dialogue agent
(:mod:`agent`), dataset procedures (:mod:`datagen`), the evaluation
harness (:mod:`evaluation`), and an HTTP service plus CLI
(:mod:`service`, :mod:`cli`).
"""

from .agent import AgentBackends, AgentOutput, AgentOutputKind, UserEvent, UserEventKind, step
from .backends import (
    BackendConfig,
    ChatBackend,
    HttpChatBackend,
    JudgeVerdict,
    ScriptedChatBackend,
    ScriptedRule,
    canonical_messages_hash,
    complete,
    detect_eod,
    judge,
    make_backend,
    set_inflight_limit,
)
from .core import (
    SUGGESTION_REQUEST_TEXT,
    AgentTurn,
    ChatRole,
    Dialogue,
    Message,
    Perspective,
    Provenance,
    Role,
    Split,
    SuggestionAnnotatedDialogue,
    SuggestionTurn,
    Topic,
    TopicRegistry,
    Turn,
    UserTurn,
    Utterance,
    load_default_registry,
    load_registry,
    parse_annotated_record,
    parse_dialogue_record,
    render_messages,
    serialize_annotated_record,
    serialize_dialogue_record,
    transcript_text,
)
from .datagen import (
    EodExample,
    EodLabel,
    GenerationResult,
    JudgePair,
    NegativeSource,
    PairKind,
    PairLabel,
    build_eod_examples,
    build_judge_pairs,
    generate_topic_dialogues,
    insert_suggestion_turns,
    parse_generated_dialogue,
    reconstruct_dialogue,
    synthesize_fixture_dialogues,
)
from .errors import (
    BackendError,
    DatasetParseError,
    FixtureError,
    GenerationError,
    LabelParseError,
    ProtocolError,
    SamplingError,
    SitudialError,
    StateError,
    ValidationError,
)
from .evaluation import (
    EvalConfig,
    EvalMode,
    EvalReport,
    JudgedEvent,
    JudgedKind,
    SessionRecord,
    SuggestionAdoption,
    Termination,
    classifier_metrics,
    eval_config_from_file,
    load_bundled_eval_config,
    render_report_table,
    run_evaluation,
    run_session,
    run_talker_eval,
    session_seed,
)
from .prompts import (
    PromptTemplate,
    TemplateSet,
    default_templates,
)
from .state import (
    DialogueState,
    EventKind,
    TranscriptEvent,
    append_utterance,
    mark_terminated,
    new_state,
    record_suggestion,
    replay_events,
)

__version__ = "0.1.0"
