/**
 * End-to-end: the real practice service (scripted backends) behind the real
 * DOM app. Topic selection, three exchanges, one suggestion-draft-edit-send,
 * closing lock, and a final check that the rendered log mirrors
 * GET /transcript event for event.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, expect, it } from "vitest";

import { PracticeApi, Transcript } from "../src/api.js";
import { ChatController } from "../src/chat-view.js";
import { mountApp } from "../src/dom.js";

const PORT = 8460 + (process.pid % 400);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;

function writeServiceFixtures(dir: string): string {
  writeFileSync(
    join(dir, "agent.json"),
    JSON.stringify({
      mode: "rules",
      rules: [
        { contains: "Open the conversation", completion: "Hello! Let's practice talking about the weather." },
        { contains: "Draft one short message", completion: "You could say: I like quiet mornings." },
        { contains: "warm goodbye", completion: "Goodbye! Great practice today." },
      ],
      default: "Tell me more, please.",
    }),
  );
  writeFileSync(
    join(dir, "eod.json"),
    JSON.stringify({
      mode: "rules",
      rules: [{ contains: "I must go now", completion: "ended" }],
      default: "ongoing",
    }),
  );
  const configPath = join(dir, "service.json");
  writeFileSync(
    configPath,
    JSON.stringify({
      backends: {
        agent: { kind: "scripted", script_path: "agent.json" },
        eod: { kind: "scripted", script_path: "eod.json" },
      },
      log_dir: join(dir, "sessions"),
    }),
  );
  return configPath;
}

async function waitForService(): Promise<void> {
  const deadline = Date.now() + 20_000;
  for (;;) {
    try {
      const response = await fetch(`${BASE}/topics`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await sleep(150);
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitFor(check: () => boolean, what: string): Promise<void> {
  const deadline = Date.now() + 10_000;
  while (!check()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await sleep(25);
  }
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "situdial-ui-"));
  const configPath = writeServiceFixtures(dir);
  service = spawn("situdial", ["serve", "--config", configPath, "--port", String(PORT)], {
    stdio: "ignore",
  });
  await waitForService();
});

afterAll(() => {
  service?.kill("SIGTERM");
});

it("completes selection, exchanges, a suggestion draft, and the closing lock", async () => {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const controller = new ChatController(new PracticeApi(BASE));

  // --- topic selection ---------------------------------------------------
  const topics = await controller.loadTopics();
  expect(topics).toHaveLength(71);
  mountApp(root, controller, topics);

  const select = root.querySelector<HTMLSelectElement>("#topic-select")!;
  expect(root.querySelectorAll("optgroup")).toHaveLength(2);
  expect(select.querySelectorAll("option").length).toBe(72); // 71 + placeholder

  select.value = "weather";
  select.dispatchEvent(new Event("change"));
  root.querySelector<HTMLButtonElement>("#start-button")!.click();
  await waitFor(
    () => !controller.view.busy && controller.view.sessionId !== null,
    "session start",
  );
  await waitFor(() => root.querySelectorAll("#chat-log .msg").length === 1, "opening bubble");
  expect(root.querySelector("#chat-log .msg.agent")!.textContent).toContain(
    "Hello! Let's practice",
  );

  const compose = root.querySelector<HTMLTextAreaElement>("#compose")!;
  const send = root.querySelector<HTMLButtonElement>("#send-button")!;
  const suggest = root.querySelector<HTMLButtonElement>("#suggest-button")!;

  async function sendText(text: string): Promise<void> {
    const before = controller.view.messages.filter((m) => m.kind === "agent").length;
    compose.value = text;
    compose.dispatchEvent(new Event("input"));
    send.click();
    await waitFor(
      () =>
        !controller.view.busy &&
        controller.view.messages.filter((m) => m.kind === "agent").length > before,
      `agent reply to ${JSON.stringify(text)}`,
    );
  }

  // --- three ordinary exchanges -------------------------------------------
  await sendText("It is sunny today.");
  await sendText("I walked to school in the sun.");
  await sendText("Do you like sunny days?");
  expect(controller.view.messages.filter((m) => m.kind === "user")).toHaveLength(3);
  expect(controller.view.messages.filter((m) => m.kind === "agent")).toHaveLength(4);

  // --- suggestion: lands as an editable draft, never auto-sent -------------
  suggest.click();
  await waitFor(
    () => !controller.view.busy && controller.view.composingIsDraft,
    "suggestion draft",
  );
  expect(compose.value).toBe("You could say: I like quiet mornings.");
  expect(compose.classList.contains("draft")).toBe(true);
  expect(controller.view.messages.filter((m) => m.kind === "user")).toHaveLength(3);

  compose.value = "I like quiet mornings and loud afternoons.";
  compose.dispatchEvent(new Event("input"));
  send.click();
  await waitFor(
    () =>
      !controller.view.busy &&
      controller.view.messages.filter((m) => m.kind === "user").length === 4,
    "edited draft sent",
  );
  const userTexts = controller.view.messages
    .filter((m) => m.kind === "user")
    .map((m) => m.text);
  expect(userTexts.at(-1)).toBe("I like quiet mornings and loud afternoons.");

  // --- closing locks the view ----------------------------------------------
  await sendText("I must go now, goodbye!");
  await waitFor(() => !controller.view.busy && controller.view.terminated, "termination");
  expect(root.querySelector<HTMLElement>("#completion-notice")!.hidden).toBe(false);
  expect(compose.disabled).toBe(true);
  expect(send.disabled).toBe(true);
  expect(suggest.disabled).toBe(true);

  // --- the rendered log mirrors GET /transcript exactly ---------------------
  const transcript = (await (
    await fetch(`${BASE}/sessions/${controller.view.sessionId}/transcript`)
  ).json()) as Transcript;
  const rendered = [...root.querySelectorAll<HTMLElement>("#chat-log .msg")];
  expect(rendered).toHaveLength(transcript.events.length);
  const kindToClass: Record<string, string> = {
    user_msg: "user",
    agent_msg: "agent",
    suggestion_request: "suggestion_request",
    suggestion: "suggestion",
    termination: "notice",
  };
  transcript.events.forEach((event, i) => {
    const node = rendered[i]!;
    expect(node.classList.contains(kindToClass[event.kind]!)).toBe(true);
    if (event.kind !== "termination") {
      expect(node.textContent).toContain(event.text);
    }
  });
  expect(transcript.history.filter((h) => h.role === "user")).toHaveLength(5);
});
