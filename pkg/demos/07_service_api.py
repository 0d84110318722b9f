"""
The practice-session HTTP service
=================================

POST /sessions opens a conversation, POST /sessions/{id}/messages talks,
POST /sessions/{id}/suggestion asks for a draft (scrubbed from history),
GET /sessions/{id}/transcript shows everything. This demo drives the app
in-process with scripted backends; `situdial serve --config ...` runs the
same app with real ones.
"""

import tempfile

from fastapi.testclient import TestClient

from situdial import AgentBackends, ScriptedChatBackend, ScriptedRule
from situdial.service import ServiceConfig, create_app

backends = AgentBackends(
    chat=ScriptedChatBackend(
        rules=[
            ScriptedRule(("Open the conversation",), "Hello! How is the weather where you are?"),
            ScriptedRule(("Draft one short message",), "You could say: I feel great today."),
            ScriptedRule(("goodbye",), "Goodbye! Talk soon."),
        ],
        default="Nice! Tell me more about that.",
    ),
    eod=ScriptedChatBackend(
        rules=[ScriptedRule(("Bye for now",), "ended")], default="ongoing"
    ),
)

with tempfile.TemporaryDirectory() as log_dir:
    app = create_app(ServiceConfig(backends={}, log_dir=log_dir), backends)
    client = TestClient(app)

    topics = client.get("/topics").json()["topics"]
    print(f"service lists {len(topics)} topics")

    session = client.post("/sessions", json={"topic_id": "weather"}).json()
    session_id = session["session_id"]
    print("agent opens:", session["opening_agent_message"])

    reply = client.post(f"/sessions/{session_id}/messages", json={"text": "It is sunny!"})
    print("agent replies:", reply.json()["text"])

    draft = client.post(f"/sessions/{session_id}/suggestion").json()["suggestion_text"]
    print("suggestion draft:", draft)

    closing = client.post(f"/sessions/{session_id}/messages", json={"text": "Bye for now!"})
    print("closing:", closing.json())

    transcript = client.get(f"/sessions/{session_id}/transcript").json()
    print("\ntranscript events:", [e["kind"] for e in transcript["events"]])
    print("history (suggestion scrubbed):")
    for entry in transcript["history"]:
        print(f"  {entry['role']:>5}: {entry['text']}")
