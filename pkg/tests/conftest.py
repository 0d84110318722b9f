import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from situdial.backends import ChatBackend
from situdial.core import load_default_registry
from situdial.datagen import synthesize_fixture_dialogues


@pytest.fixture(scope="session")
def registry():
    return load_default_registry()


@pytest.fixture(scope="session")
def corpus_3000(registry):
    """The 3,000-record synthetic corpus used by round-trip and builder tests."""
    return synthesize_fixture_dialogues(registry.topics, 3000, rng_seed=1234)


class CountingBackend(ChatBackend):
    """Wraps a backend, counting calls and keeping every rendered prompt."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0
        self.seen = []

    def complete(self, messages):
        self.calls += 1
        self.seen.append(list(messages))
        return self.inner.complete(messages)


class CaptureStub:
    """Minimal local chat-completion endpoint that records request bodies.

    ``responder`` maps a request body to the completion text;
    ``failures_before_success`` makes the first N requests return 503.
    """

    def __init__(self, responder=None, failures_before_success=0):
        self.requests = []
        self.responder = responder or (lambda body: "ok")
        self.failures_left = failures_before_success
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                stub.requests.append({"body": body, "headers": dict(self.headers)})
                if stub.failures_left > 0:
                    stub.failures_left -= 1
                    self.send_response(503)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                completion = stub.responder(body)
                payload = json.dumps(
                    {"choices": [{"message": {"role": "assistant", "content": completion}}]}
                ).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *_args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def url(self):
        return f"http://127.0.0.1:{self.server.server_port}/v1/chat/completions"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *_exc):
        self.server.shutdown()
        self.server.server_close()
