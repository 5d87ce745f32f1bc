import { ApiClient } from "./api";
import { TutorApp } from "./app";

/** Start panel: pick an assignment, paste the submission, launch a session. */
export function renderSetup(container: HTMLElement, api: ApiClient, app: TutorApp): void {
  const panel = document.createElement("div");
  panel.id = "setup";

  const assignmentSelect = document.createElement("select");
  assignmentSelect.id = "assignment";
  void api.listAssignments().then(({ assignments }) => {
    for (const a of assignments) {
      const option = document.createElement("option");
      option.value = a.assignment_id;
      option.textContent = `${a.assignment_id} (${a.tests} tests)`;
      assignmentSelect.appendChild(option);
    }
  });

  const source = document.createElement("textarea");
  source.id = "source";
  source.placeholder = "paste your program here";

  const mode = document.createElement("select");
  mode.id = "mode";
  for (const value of ["FORMATIVE", "SUMMATIVE"]) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = value;
    mode.appendChild(option);
  }

  const seed = document.createElement("input");
  seed.id = "seed";
  seed.type = "number";
  seed.value = "7";

  const token = document.createElement("input");
  token.id = "proctor-token";
  token.placeholder = "proctor token (summative only)";

  const start = document.createElement("button");
  start.id = "start";
  start.textContent = "Start session";
  start.onclick = () => {
    panel.remove();
    void app.startSession({
      assignment_id: assignmentSelect.value,
      source: source.value,
      mode: mode.value,
      seed: Number(seed.value) || 0,
      proctor_token: token.value || undefined,
    });
  };

  for (const node of [assignmentSelect, source, mode, seed, token, start]) {
    panel.appendChild(node);
  }
  container.appendChild(panel);
}
