import { ApiClient } from "./api";
import { TutorApp } from "./app";
import { renderSetup } from "./setup";

declare global {
  interface Window {
    TRACETUTOR_BASE_URL?: string;
  }
}

const api = new ApiClient(window.TRACETUTOR_BASE_URL ?? "");
const rootEl = document.getElementById("root");
if (rootEl) {
  const chat = document.createElement("div");
  chat.id = "chat";
  rootEl.appendChild(chat);
  const app = new TutorApp(chat, api);

  const match = window.location.hash.match(/^#\/session\/(.+)$/);
  if (match) {
    void app.resume(match[1]);
  } else {
    renderSetup(rootEl, api, app);
  }
}
