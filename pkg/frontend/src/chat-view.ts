/**
 * View state and controller for one practice conversation.
 *
 * Invariants:
 * - rendered messages mirror GET /transcript exactly (every refresh rebuilds
 *   them from the server's event list, one entry per event);
 * - a suggestion only ever lands in the compose box as an editable draft,
 *   never in the conversation, until the learner sends it themselves;
 * - once terminated, composing is locked.
 *
 * One controller drives one session (one per browser tab). Sends render the
 * learner's bubble optimistically and reconcile with the server transcript
 * as soon as the agent answers.
 */

import { ApiError, PracticeApi, Topic, Transcript, TranscriptEvent } from "./api.js";

export type RenderedKind = "user" | "agent" | "suggestion_request" | "suggestion" | "notice";

export interface RenderedMessage {
  kind: RenderedKind;
  text: string;
  optimistic?: boolean;
}

export interface ChatViewState {
  sessionId: string | null;
  topic: Topic | null;
  messages: RenderedMessage[];
  composing: string;
  composingIsDraft: boolean;
  terminated: boolean;
  busy: boolean;
  error: string | null;
}

export const COMPLETION_NOTICE = "Conversation complete";

export function initialViewState(): ChatViewState {
  return {
    sessionId: null,
    topic: null,
    messages: [],
    composing: "",
    composingIsDraft: false,
    terminated: false,
    busy: false,
    error: null,
  };
}

/** One rendered entry per transcript event; this is the mirror contract. */
export function renderTranscript(events: TranscriptEvent[]): RenderedMessage[] {
  return events.map((event) => {
    switch (event.kind) {
      case "user_msg":
        return { kind: "user", text: event.text };
      case "agent_msg":
        return { kind: "agent", text: event.text };
      case "suggestion_request":
        return { kind: "suggestion_request", text: event.text };
      case "suggestion":
        return { kind: "suggestion", text: event.text };
      case "termination":
        return { kind: "notice", text: COMPLETION_NOTICE };
    }
  });
}

export function groupTopicsBySplit(topics: Topic[]): Map<string, Topic[]> {
  const groups = new Map<string, Topic[]>();
  for (const topic of topics) {
    const bucket = groups.get(topic.split) ?? [];
    bucket.push(topic);
    groups.set(topic.split, bucket);
  }
  return groups;
}

type Listener = (state: ChatViewState) => void;

export class ChatController {
  private state: ChatViewState = initialViewState();
  private listeners: Listener[] = [];

  constructor(private readonly api: PracticeApi) {}

  get view(): ChatViewState {
    return this.state;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
    listener(this.state);
  }

  private update(patch: Partial<ChatViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  async loadTopics(): Promise<Topic[]> {
    const { topics } = await this.api.getTopics();
    return topics;
  }

  async startSession(topic: Topic): Promise<void> {
    this.update({ busy: true, error: null });
    try {
      const { session_id } = await this.api.createSession(topic.id);
      this.update({ sessionId: session_id, topic, terminated: false, composing: "", composingIsDraft: false });
      await this.reconcile();
    } catch (error) {
      // no session unless the service answered
      this.update({ sessionId: null, topic: null, error: describe(error) });
    } finally {
      this.update({ busy: false });
    }
  }

  setComposing(text: string): void {
    // editing keeps the draft marker so learners can see what they started from
    this.update({ composing: text });
  }

  clearDraft(): void {
    this.update({ composing: "", composingIsDraft: false });
  }

  async send(): Promise<void> {
    const text = this.state.composing.trim();
    if (!text || !this.state.sessionId || this.state.terminated || this.state.busy) {
      return;
    }
    const optimistic: RenderedMessage = { kind: "user", text, optimistic: true };
    this.update({
      busy: true,
      error: null,
      messages: [...this.state.messages, optimistic],
      composing: "",
      composingIsDraft: false,
    });
    try {
      await this.api.postMessage(this.state.sessionId, text);
      await this.reconcile();
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        await this.reconcile(); // terminated elsewhere: show the completion notice
      } else {
        // roll the optimistic bubble back and let the learner retry
        this.update({
          messages: this.state.messages.filter((m) => m !== optimistic),
          composing: text,
          error: describe(error),
        });
      }
    } finally {
      this.update({ busy: false });
    }
  }

  async suggest(): Promise<void> {
    if (!this.state.sessionId || this.state.terminated || this.state.busy) {
      return;
    }
    this.update({ busy: true, error: null });
    try {
      const { suggestion_text } = await this.api.requestSuggestion(this.state.sessionId);
      // the draft is editable and is not part of the conversation yet
      this.update({ composing: suggestion_text, composingIsDraft: true });
      await this.reconcile();
    } catch (error) {
      this.update({ error: describe(error) });
    } finally {
      this.update({ busy: false });
    }
  }

  /** Pull the server transcript and mirror it exactly. */
  async reconcile(): Promise<void> {
    if (!this.state.sessionId) {
      return;
    }
    const transcript: Transcript = await this.api.getTranscript(this.state.sessionId);
    this.update({
      messages: renderTranscript(transcript.events),
      terminated: transcript.terminated,
    });
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    return error.retryable ? `${error.message} (try again)` : error.message;
  }
  return String(error);
}
