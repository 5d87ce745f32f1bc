import { ApiClient, ApiError } from "./api";
import type { Report, SessionView, TranscriptEntry } from "./types";

/**
 * Chat-style client for one assessment session. The server is the single
 * source of truth: every render works from the latest API response, so a
 * page refresh followed by a re-fetch shows the identical transcript.
 */
export class TutorApp {
  private view: SessionView | null = null;
  private report: Report | null = null;
  private selectedOption: number | null = null;
  private banner: string | null = null;
  private inlineError: string | null = null;
  private retry: (() => Promise<void>) | null = null;

  constructor(private root: HTMLElement, private api: ApiClient) {}

  get sessionId(): string | null {
    return this.view?.session_id ?? null;
  }

  async startSession(options: {
    assignment_id: string;
    source: string;
    mode: string;
    seed: number;
    question_budget?: number;
    proctor_token?: string;
  }): Promise<void> {
    await this.guarded(async () => {
      const submission = await this.api.createSubmission(options.assignment_id, options.source);
      this.view = await this.api.createSession({
        submission_id: submission.submission_id,
        mode: options.mode,
        seed: options.seed,
        question_budget: options.question_budget,
        proctor_token: options.proctor_token,
      });
      window.location.hash = `#/session/${this.view.session_id}`;
      await this.syncReport();
    });
    this.render();
  }

  async resume(sessionId: string): Promise<void> {
    await this.guarded(async () => {
      this.view = await this.api.getSession(sessionId);
      await this.syncReport();
    });
    this.render();
  }

  async chooseOption(index: number): Promise<void> {
    this.selectedOption = index;
    this.render();
  }

  async submitChoice(): Promise<void> {
    const view = this.view;
    if (!view?.current_question || this.selectedOption === null) return;
    const question = view.current_question;
    const choice = this.selectedOption;
    await this.guarded(async () => {
      const result = await this.api.submitTier1(view.session_id, question.question_id, choice);
      this.view = result.session;
      this.selectedOption = null;
    });
    this.render();
  }

  async submitExplanation(text: string): Promise<void> {
    const view = this.view;
    if (!view) return;
    if (!text.trim()) {
      this.inlineError = "Write an explanation first.";
      this.render();
      return;
    }
    this.inlineError = null;
    await this.guarded(async () => {
      const result = await this.api.submitTier2(view.session_id, text);
      this.view = result.session;
      await this.syncReport();
    });
    this.render();
  }

  private async syncReport(): Promise<void> {
    const view = this.view;
    if (view && (view.state === "COMPLETED" || view.state === "ABORTED")) {
      this.report = await this.api.getReport(view.session_id);
    } else {
      this.report = null;
    }
  }

  private async guarded(action: () => Promise<void>): Promise<void> {
    try {
      await action();
      this.banner = null;
      this.retry = null;
    } catch (err) {
      // non-blocking banner; local state stays untouched so retry works
      this.banner = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
      this.retry = action;
    }
  }

  async retryLast(): Promise<void> {
    const action = this.retry;
    if (action) {
      await this.guarded(action);
      this.render();
    }
  }

  // rendering --------------------------------------------------------

  render(): void {
    this.root.textContent = "";
    if (this.banner) {
      this.root.appendChild(this.renderBanner());
    }
    if (!this.view) return;
    this.root.appendChild(this.renderHeader());
    this.root.appendChild(this.renderTranscript());
    if (this.report) {
      this.root.appendChild(this.renderReport(this.report));
      return;
    }
    if (this.view.state === "TIER1_PENDING" && this.view.current_question) {
      this.root.appendChild(this.renderTier1());
    } else if (this.view.state === "TIER2_PENDING" || this.view.state === "SCAFFOLDING") {
      this.root.appendChild(this.renderTier2());
    }
  }

  private renderBanner(): HTMLElement {
    const banner = el("div", "banner");
    banner.id = "banner";
    banner.appendChild(el("span", "", this.banner ?? ""));
    const retry = el("button", "", "Retry") as HTMLButtonElement;
    retry.id = "retry";
    retry.onclick = () => void this.retryLast();
    banner.appendChild(retry);
    return banner;
  }

  private renderHeader(): HTMLElement {
    const view = this.view!;
    const header = el("div", "header");
    const badge = el("span", `badge badge-${view.mode.toLowerCase()}`, view.mode);
    badge.id = "mode-badge";
    header.appendChild(badge);
    const progress = el("span", "progress",
      `${view.progress.answered}/${view.progress.budget} answered`);
    progress.id = "progress";
    header.appendChild(progress);
    const state = el("span", "state", view.state);
    state.id = "session-state";
    header.appendChild(state);
    return header;
  }

  private renderTranscript(): HTMLElement {
    const view = this.view!;
    const list = el("ul", "transcript");
    list.id = "transcript";
    for (const entry of view.transcript) {
      list.appendChild(this.renderBubble(entry));
    }
    return list;
  }

  private renderBubble(entry: TranscriptEntry): HTMLElement {
    const kind = entry.kind.toLowerCase();
    const item = el("li", `msg msg-${kind} from-${entry.speaker.toLowerCase()}`);
    if (entry.kind === "VERDICT" && this.view?.mode === "SUMMATIVE") {
      // summative sessions show qualitative feedback only
      item.appendChild(el("span", "text", "answer recorded"));
      return item;
    }
    item.appendChild(el("span", "text", entry.text));
    if (entry.kind === "QUESTION" && entry.options) {
      const options = el("ol", "asked-options");
      for (const text of entry.options) {
        options.appendChild(el("li", "", text));
      }
      item.appendChild(options);
    }
    return item;
  }

  private renderTier1(): HTMLElement {
    const question = this.view!.current_question!;
    const panel = el("div", "tier1");
    panel.id = "tier1";
    panel.appendChild(el("p", "stem", question.stem));
    const options = el("div", "options");
    options.id = "options";
    question.options.forEach((text, index) => {
      // options render exactly in served order, never re-sorted
      const button = el("button", "option", text) as HTMLButtonElement;
      button.dataset.index = String(index);
      if (this.selectedOption === index) button.classList.add("selected");
      button.onclick = () => void this.chooseOption(index);
      options.appendChild(button);
    });
    panel.appendChild(options);
    const submit = el("button", "primary", "Submit answer") as HTMLButtonElement;
    submit.id = "submit-choice";
    submit.disabled = this.selectedOption === null;
    submit.onclick = () => void this.submitChoice();
    panel.appendChild(submit);
    return panel;
  }

  private renderTier2(): HTMLElement {
    const panel = el("div", "tier2");
    panel.id = "tier2";
    const label = this.view!.state === "SCAFFOLDING"
      ? "Take the hint into account and try again:"
      : "Explain why your answer is right:";
    panel.appendChild(el("p", "prompt", label));
    const textarea = document.createElement("textarea");
    textarea.id = "explain";
    panel.appendChild(textarea);
    if (this.inlineError) {
      panel.appendChild(el("p", "inline-error", this.inlineError));
    }
    const send = el("button", "primary", "Send") as HTMLButtonElement;
    send.id = "send-explain";
    send.onclick = () => void this.submitExplanation(textarea.value);
    panel.appendChild(send);
    return panel;
  }

  private renderReport(report: Report): HTMLElement {
    const panel = el("div", "report");
    panel.id = "report";
    if (this.view!.state === "ABORTED") {
      const aborted = el("span", "badge badge-aborted", "ABORTED");
      aborted.id = "aborted-badge";
      panel.appendChild(aborted);
    }
    const scores = el("div", "scores");
    scores.appendChild(scoreBox("f-score", "functional", report.functional_score));
    scores.appendChild(scoreBox("d-score", "dialogue", report.dialogue_score));
    scores.appendChild(scoreBox("final-grade", "final grade", report.final_grade));
    panel.appendChild(scores);
    if (report.unproductive_success) {
      const flag = el("div", "flag",
        "Unproductive success: the tests pass, but the explanations do not show understanding.");
      flag.id = "flag";
      panel.appendChild(flag);
    }
    const bars = el("div", "kc-bars");
    bars.id = "kc-bars";
    for (const [kc, mastery] of Object.entries(report.per_kc)) {
      const row = el("div", "kc-row");
      row.appendChild(el("span", "kc-name", kc));
      const track = el("div", "kc-track");
      const fill = el("div", "kc-bar");
      fill.style.width = `${Math.round(mastery * 100)}%`;
      fill.dataset.kc = kc;
      track.appendChild(fill);
      row.appendChild(track);
      row.appendChild(el("span", "kc-value", mastery.toFixed(2)));
      bars.appendChild(row);
    }
    panel.appendChild(bars);
    const questions = el("ul", "question-results");
    questions.id = "question-results";
    for (const result of report.per_question) {
      questions.appendChild(el(
        "li", `question-row action-${result.action.toLowerCase()}`,
        `${result.kc}: score ${result.score} (${result.action})`));
    }
    panel.appendChild(questions);
    return panel;
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function scoreBox(id: string, label: string, value: number): HTMLElement {
  const box = el("div", "score-box");
  box.appendChild(el("span", "score-label", label));
  const v = el("span", "score-value", String(value));
  v.id = id;
  box.appendChild(v);
  return box;
}
