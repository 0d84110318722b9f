import { describe, expect, it } from "vitest";

import { ApiError, PracticeApi, Topic, Transcript, TranscriptEvent } from "../src/api.js";
import {
  COMPLETION_NOTICE,
  ChatController,
  groupTopicsBySplit,
  renderTranscript,
} from "../src/chat-view.js";

const WEATHER: Topic = { id: "weather", title: "Weather", split: "in_domain" };

/** In-memory stand-in for the service with the same scrub semantics. */
class FakeApi extends PracticeApi {
  events: TranscriptEvent[] = [];
  terminated = false;
  down = false;
  replies: string[];

  constructor(replies: string[] = []) {
    super("");
    this.replies = replies;
  }

  private push(kind: TranscriptEvent["kind"], text: string) {
    this.events.push({ kind, text, timestamp: this.events.length });
  }

  override async getTopics() {
    if (this.down) throw new ApiError("service unreachable", null, true);
    return { topics: [WEATHER] };
  }

  override async createSession(topicId: string) {
    if (this.down) throw new ApiError("service unreachable", null, true);
    this.push("agent_msg", `Let's talk about ${topicId}.`);
    return { session_id: "s1", opening_agent_message: `Let's talk about ${topicId}.` };
  }

  override async postMessage(_sessionId: string, text: string) {
    if (this.down) throw new ApiError("service unreachable", null, true);
    if (this.terminated) throw new ApiError("session is terminated", 409, false);
    this.push("user_msg", text);
    const reply = this.replies.shift() ?? "Tell me more.";
    this.push("agent_msg", reply);
    if (reply.includes("Goodbye")) {
      this.terminated = true;
      this.push("termination", "");
      return { kind: "closing" as const, text: reply, terminated: true };
    }
    return { kind: "response" as const, text: reply, terminated: false };
  }

  override async requestSuggestion(_sessionId: string) {
    if (this.terminated) throw new ApiError("session is terminated", 409, false);
    this.push("suggestion_request", "Please suggest what I could say next.");
    this.push("suggestion", "You could say: it is sunny.");
    return { suggestion_text: "You could say: it is sunny." };
  }

  override async getTranscript(): Promise<Transcript> {
    return {
      session_id: "s1",
      topic_id: WEATHER.id,
      terminated: this.terminated,
      history: [],
      events: [...this.events],
    };
  }
}

describe("renderTranscript", () => {
  it("maps every event kind one-to-one", () => {
    const events: TranscriptEvent[] = [
      { kind: "agent_msg", text: "hi", timestamp: 0 },
      { kind: "suggestion_request", text: "req", timestamp: 1 },
      { kind: "suggestion", text: "try this", timestamp: 2 },
      { kind: "user_msg", text: "ok", timestamp: 3 },
      { kind: "termination", text: "", timestamp: 4 },
    ];
    expect(renderTranscript(events)).toEqual([
      { kind: "agent", text: "hi" },
      { kind: "suggestion_request", text: "req" },
      { kind: "suggestion", text: "try this" },
      { kind: "user", text: "ok" },
      { kind: "notice", text: COMPLETION_NOTICE },
    ]);
  });
});

describe("groupTopicsBySplit", () => {
  it("buckets topics by split, preserving order", () => {
    const topics: Topic[] = [
      WEATHER,
      { id: "charity", title: "Charity", split: "out_of_domain" },
      { id: "animals", title: "Animals", split: "in_domain" },
    ];
    const groups = groupTopicsBySplit(topics);
    expect([...groups.keys()]).toEqual(["in_domain", "out_of_domain"]);
    expect(groups.get("in_domain")!.map((t) => t.id)).toEqual(["weather", "animals"]);
  });
});

describe("ChatController", () => {
  it("starts a session and shows the opening bubble", async () => {
    const controller = new ChatController(new FakeApi());
    await controller.startSession(WEATHER);
    expect(controller.view.sessionId).toBe("s1");
    expect(controller.view.messages).toEqual([
      { kind: "agent", text: "Let's talk about weather." },
    ]);
    expect(controller.view.error).toBeNull();
  });

  it("shows a retryable banner and no session when the service is down", async () => {
    const api = new FakeApi();
    api.down = true;
    const controller = new ChatController(api);
    await controller.startSession(WEATHER);
    expect(controller.view.sessionId).toBeNull();
    expect(controller.view.error).toContain("try again");
  });

  it("sends the composed text and appends the agent reply", async () => {
    const api = new FakeApi(["Nice weather indeed."]);
    const controller = new ChatController(api);
    await controller.startSession(WEATHER);
    controller.setComposing("It is sunny!");
    await controller.send();
    expect(controller.view.messages.map((m) => m.kind)).toEqual(["agent", "user", "agent"]);
    expect(controller.view.composing).toBe("");
    // view mirrors the server transcript exactly
    expect(controller.view.messages).toEqual(renderTranscript(api.events));
  });

  it("rolls the optimistic bubble back when a send fails", async () => {
    const api = new FakeApi();
    const controller = new ChatController(api);
    await controller.startSession(WEATHER);
    api.down = true;
    controller.setComposing("hello?");
    await controller.send();
    expect(controller.view.messages.map((m) => m.kind)).toEqual(["agent"]);
    expect(controller.view.composing).toBe("hello?"); // kept for retry
    expect(controller.view.error).not.toBeNull();
  });

  it("places suggestions in the compose box as an editable draft, never auto-sent", async () => {
    const api = new FakeApi();
    const controller = new ChatController(api);
    await controller.startSession(WEATHER);
    await controller.suggest();
    expect(controller.view.composing).toBe("You could say: it is sunny.");
    expect(controller.view.composingIsDraft).toBe(true);
    // the conversation history gained no user bubble
    expect(controller.view.messages.filter((m) => m.kind === "user")).toHaveLength(0);
    // but the exchange shows up as banners, mirroring the transcript
    expect(controller.view.messages.map((m) => m.kind)).toEqual([
      "agent",
      "suggestion_request",
      "suggestion",
    ]);

    controller.setComposing("You could say: it is sunny and warm.");
    await controller.send();
    const userBubbles = controller.view.messages.filter((m) => m.kind === "user");
    expect(userBubbles).toEqual([{ kind: "user", text: "You could say: it is sunny and warm." }]);
    expect(controller.view.composingIsDraft).toBe(false);
  });

  it("locks the view with a completion notice on closing", async () => {
    const api = new FakeApi(["Goodbye! Talk soon."]);
    const controller = new ChatController(api);
    await controller.startSession(WEATHER);
    controller.setComposing("Bye!");
    await controller.send();
    expect(controller.view.terminated).toBe(true);
    expect(controller.view.messages.at(-1)).toEqual({ kind: "notice", text: COMPLETION_NOTICE });

    controller.setComposing("one more");
    await controller.send(); // ignored: terminated
    expect(api.events.filter((e) => e.kind === "user_msg")).toHaveLength(1);
  });

  it("refreshes to the completion notice when the server says 409", async () => {
    const api = new FakeApi(["ok"]);
    const controller = new ChatController(api);
    await controller.startSession(WEATHER);
    api.terminated = true; // terminated behind the client's back
    api.events.push({ kind: "termination", text: "", timestamp: 99 });
    controller.setComposing("hello?");
    await controller.send();
    expect(controller.view.terminated).toBe(true);
    expect(controller.view.messages.at(-1)!.kind).toBe("notice");
  });
});
