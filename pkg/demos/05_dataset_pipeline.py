"""
Dataset procedures
==================

Topic-driven dialogue generation (here: scripted), suggestion-turn
insertion with exact reconstruction, balanced end-of-dialogue examples,
and balanced judge pairs with leak-free negatives.
"""

import collections

from situdial import (
    ScriptedChatBackend,
    build_eod_examples,
    build_judge_pairs,
    generate_topic_dialogues,
    insert_suggestion_turns,
    load_default_registry,
    reconstruct_dialogue,
    synthesize_fixture_dialogues,
)
from situdial.prompts import DIALOGUE_GENERATION_TEMPLATE

registry = load_default_registry()
topic = registry.get("weather")

# --- generation: completions are parsed, malformed ones dropped -----------------

scripted_model = ScriptedChatBackend(
    sequence=[
        "User: Is it cold outside?\nAgent: Yes, wear a coat.",
        "this one is not a dialogue and will be dropped",
        "User: Do you like snow?\nAgent: I do! It makes everything quiet.",
    ]
)
result = generate_topic_dialogues(topic, 3, scripted_model, DIALOGUE_GENERATION_TEMPLATE)
print(f"generated {len(result.dialogues)} dialogues, dropped {result.dropped}")

# --- suggestion-turn insertion: a reversible rewrite ------------------------------

corpus = synthesize_fixture_dialogues(registry.topics, 500, rng_seed=42)
annotated = insert_suggestion_turns(corpus[0], insertion_prob=0.5, rng_seed=1)
print(f"\n{annotated.suggestion_count()} of {corpus[0].n_turns} user turns became "
      "suggestion turns; substitution restores the original:",
      reconstruct_dialogue(annotated) == corpus[0])

# --- end-of-dialogue examples: balanced whole dialogues vs. strict prefixes -------

examples = build_eod_examples(corpus, per_dialogue=2, rng_seed=7)
by_label = collections.Counter(e.label.value for e in examples)
print("\nend-of-dialogue examples:", dict(by_label))

# --- judge pairs: positives are true continuations, negatives never leak ----------

pairs = build_judge_pairs(corpus, n_pairs=1000, kind_mix=0.5, rng_seed=7)
by_kind = collections.Counter((p.label.value, p.kind.value) for p in pairs)
print("judge pairs:", dict(by_kind))
