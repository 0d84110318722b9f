/**
 * Typed client for the practice-session service.
 *
 * The UI mutates conversation state exclusively through these endpoints;
 * everything else it shows is derived from GET /transcript.
 */

export type Split = "in_domain" | "out_of_domain";

export interface Topic {
  id: string;
  title: string;
  split: Split;
}

export interface AgentReply {
  kind: "response" | "closing";
  text: string;
  terminated: boolean;
}

export type TranscriptEventKind =
  | "user_msg"
  | "agent_msg"
  | "suggestion_request"
  | "suggestion"
  | "termination";

export interface TranscriptEvent {
  kind: TranscriptEventKind;
  text: string;
  timestamp: number;
}

export interface Transcript {
  session_id: string;
  topic_id: string;
  terminated: boolean;
  history: { role: "user" | "agent"; text: string }[];
  events: TranscriptEvent[];
}

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number | null,
    public readonly retryable: boolean,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (cause) {
    throw new ApiError("service unreachable", null, true);
  }
  if (!response.ok) {
    const detail = await response.text().catch(() => "");
    throw new ApiError(
      detail || `request failed (${response.status})`,
      response.status,
      response.status >= 500,
    );
  }
  return (await response.json()) as T;
}

export class PracticeApi {
  constructor(private readonly baseUrl: string = "") {}

  getTopics(): Promise<{ topics: Topic[] }> {
    return request(`${this.baseUrl}/topics`);
  }

  createSession(topicId: string): Promise<{ session_id: string; opening_agent_message: string }> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ topic_id: topicId }),
    });
  }

  postMessage(sessionId: string, text: string): Promise<AgentReply> {
    return request(`${this.baseUrl}/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  requestSuggestion(sessionId: string): Promise<{ suggestion_text: string }> {
    return request(`${this.baseUrl}/sessions/${sessionId}/suggestion`, {
      method: "POST",
    });
  }

  getTranscript(sessionId: string): Promise<Transcript> {
    return request(`${this.baseUrl}/sessions/${sessionId}/transcript`);
  }
}
