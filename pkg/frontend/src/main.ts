import { PracticeApi } from "./api.js";
import { ChatController } from "./chat-view.js";
import { mountApp } from "./dom.js";

const api = new PracticeApi("");
const controller = new ChatController(api);

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app container");
  try {
    const topics = await controller.loadTopics();
    mountApp(root, controller, topics);
  } catch {
    root.innerHTML =
      '<div class="banner error">Practice service unreachable. Reload to retry.</div>';
  }
}

void boot();
