"""
Chat backends, the judge, and the end-of-dialogue detector
==========================================================

Backends share one interface: a message list in, a completion out. Scripted
backends replay fixtures (by prompt hash, in sequence, or by content rules)
and make everything reproducible without a model. The judge and detector
are prompted binary classifiers on top.
"""

from situdial import (
    Role,
    ScriptedChatBackend,
    ScriptedRule,
    Utterance,
    canonical_messages_hash,
    detect_eod,
    judge,
    load_default_registry,
    new_state,
    append_utterance,
)
from situdial.core import ChatRole, Message
from situdial.prompts import EOD_TEMPLATE, JUDGE_TEMPLATE

topic = load_default_registry().get("weather")

# --- three fixture modes ------------------------------------------------------

prompt = [Message(ChatRole.SYSTEM, "sys"), Message(ChatRole.USER, "Hello?")]
mapped = ScriptedChatBackend(mapping={canonical_messages_hash(prompt): "Hi there!"})
print("map mode:     ", mapped.complete(prompt))

sequential = ScriptedChatBackend(sequence=["first", "second"])
print("sequence mode:", sequential.complete(prompt), "then", sequential.complete(prompt))

ruled = ScriptedChatBackend(
    rules=[ScriptedRule(("rain",), "Take an umbrella!")], default="Sounds good."
)
print("rules mode:   ", ruled.complete([prompt[0], Message(ChatRole.USER, "It may rain.")]))

# --- the judge -----------------------------------------------------------------

context = "Agent: How is the weather?\nUser: Very sunny."
good = judge(ScriptedChatBackend(sequence=["yes"]), JUDGE_TEMPLATE, "Weather",
             context, "Perfect day for a picnic!")
bad = judge(ScriptedChatBackend(sequence=["No."]), JUDGE_TEMPLATE, "Weather",
            context, "My favorite dinosaur is blue.")
print("\njudge on a sensible reply:  ", good.appropriate)
print("judge on an off-topic reply:", bad.appropriate)

# --- the end-of-dialogue detector ------------------------------------------------

state = new_state(topic)
state = append_utterance(state, Utterance(Role.USER, "Goodbye!"))
state = append_utterance(state, Utterance(Role.AGENT, "Bye, see you!"))
ended = detect_eod(ScriptedChatBackend(sequence=["ended"]), EOD_TEMPLATE, state)
print("\ndetector on a farewell exchange:", ended)
