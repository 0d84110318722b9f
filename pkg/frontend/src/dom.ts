/**
 * DOM layer: renders the ChatViewState and forwards user intent to the
 * controller. State never changes here; every mutation goes through the
 * controller and therefore through the three service endpoints.
 */

import { Topic } from "./api.js";
import { ChatController, ChatViewState, groupTopicsBySplit } from "./chat-view.js";

const SPLIT_LABELS: Record<string, string> = {
  in_domain: "Core topics",
  out_of_domain: "Stretch topics",
};

export function mountApp(root: HTMLElement, controller: ChatController, topics: Topic[]): void {
  root.innerHTML = `
    <header>
      <label for="topic-select">Topic</label>
      <select id="topic-select">
        <option value="" selected disabled>Choose a topic…</option>
      </select>
      <button id="start-button" disabled>Start</button>
    </header>
    <div id="error-banner" class="banner error" hidden>
      <span id="error-text"></span>
      <button id="retry-button">Retry</button>
    </div>
    <main id="chat-log" aria-live="polite"></main>
    <div id="completion-notice" class="banner done" hidden>Conversation complete</div>
    <footer>
      <textarea id="compose" rows="2" placeholder="Say something…" disabled></textarea>
      <button id="suggest-button" disabled>Suggest</button>
      <button id="send-button" disabled>Send</button>
    </footer>
  `;

  const select = root.querySelector<HTMLSelectElement>("#topic-select")!;
  const startButton = root.querySelector<HTMLButtonElement>("#start-button")!;
  const compose = root.querySelector<HTMLTextAreaElement>("#compose")!;
  const sendButton = root.querySelector<HTMLButtonElement>("#send-button")!;
  const suggestButton = root.querySelector<HTMLButtonElement>("#suggest-button")!;
  const retryButton = root.querySelector<HTMLButtonElement>("#retry-button")!;

  // all 71 topics, grouped by split
  const byId = new Map(topics.map((t) => [t.id, t]));
  for (const [split, group] of groupTopicsBySplit(topics)) {
    const optgroup = document.createElement("optgroup");
    optgroup.label = SPLIT_LABELS[split] ?? split;
    for (const topic of group) {
      const option = document.createElement("option");
      option.value = topic.id;
      option.textContent = topic.title;
      optgroup.appendChild(option);
    }
    select.appendChild(optgroup);
  }

  select.addEventListener("change", () => {
    startButton.disabled = !select.value;
  });
  startButton.addEventListener("click", () => {
    const topic = byId.get(select.value);
    if (topic) void controller.startSession(topic);
  });
  retryButton.addEventListener("click", () => {
    const topic = controller.view.topic ?? byId.get(select.value);
    if (!controller.view.sessionId && topic) {
      void controller.startSession(topic);
    } else {
      void controller.reconcile().catch(() => undefined);
    }
  });
  compose.addEventListener("input", () => controller.setComposing(compose.value));
  sendButton.addEventListener("click", () => void controller.send());
  suggestButton.addEventListener("click", () => void controller.suggest());

  controller.subscribe((state) => render(root, compose, sendButton, suggestButton, state));
}

function render(
  root: HTMLElement,
  compose: HTMLTextAreaElement,
  sendButton: HTMLButtonElement,
  suggestButton: HTMLButtonElement,
  state: ChatViewState,
): void {
  const log = root.querySelector<HTMLElement>("#chat-log")!;
  log.innerHTML = "";
  for (const message of state.messages) {
    const entry = document.createElement("div");
    entry.className = `msg ${message.kind}${message.optimistic ? " optimistic" : ""}`;
    entry.textContent =
      message.kind === "suggestion_request"
        ? `You asked for a suggestion: ${message.text}`
        : message.kind === "suggestion"
          ? `Suggestion: ${message.text}`
          : message.text;
    log.appendChild(entry);
  }

  const banner = root.querySelector<HTMLElement>("#error-banner")!;
  banner.hidden = state.error === null;
  root.querySelector<HTMLElement>("#error-text")!.textContent = state.error ?? "";

  const locked = state.terminated || state.sessionId === null;
  root.querySelector<HTMLElement>("#completion-notice")!.hidden = !state.terminated;
  if (compose.value !== state.composing) {
    compose.value = state.composing;
  }
  compose.disabled = locked;
  compose.classList.toggle("draft", state.composingIsDraft);
  sendButton.disabled = locked || state.busy;
  suggestButton.disabled = locked || state.busy;
}
