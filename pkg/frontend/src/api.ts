import type {
  AssignmentInfo,
  Report,
  SessionView,
  SubmissionResult,
  Tier1Result,
  Tier2Result,
} from "./types";

export class ApiError extends Error {
  code: string;
  status: number;
  detail: unknown;

  constructor(status: number, code: string, message: string, detail: unknown = null) {
    super(message);
    this.status = status;
    this.code = code;
    this.detail = detail;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
  } catch (err) {
    throw new ApiError(0, "network", `cannot reach the assessment service: ${err}`);
  }
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON bodies fall through to the generic error below
  }
  if (!response.ok) {
    const err = (body ?? {}) as { code?: string; message?: string; detail?: unknown };
    throw new ApiError(response.status, err.code ?? "error",
      err.message ?? response.statusText, err.detail);
  }
  return body as T;
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}/api/v1${path}`;
  }

  listAssignments(): Promise<{ assignments: AssignmentInfo[] }> {
    return request(this.url("/assignments"));
  }

  createSubmission(assignmentId: string, source: string): Promise<SubmissionResult> {
    return request(this.url("/submissions"), {
      method: "POST",
      body: JSON.stringify({ assignment_id: assignmentId, source }),
    });
  }

  createSession(options: {
    submission_id: string;
    mode: string;
    seed: number;
    question_budget?: number;
    proctor_token?: string;
  }): Promise<SessionView> {
    return request(this.url("/sessions"), {
      method: "POST",
      body: JSON.stringify(options),
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return request(this.url(`/sessions/${sessionId}`));
  }

  submitTier1(sessionId: string, questionId: string, choiceIndex: number): Promise<Tier1Result> {
    return request(this.url(`/sessions/${sessionId}/tier1`), {
      method: "POST",
      body: JSON.stringify({ question_id: questionId, choice_index: choiceIndex }),
    });
  }

  submitTier2(sessionId: string, text: string): Promise<Tier2Result> {
    return request(this.url(`/sessions/${sessionId}/tier2`), {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }

  sendMessage(sessionId: string, text: string): Promise<Tier2Result> {
    return request(this.url(`/sessions/${sessionId}/message`), {
      method: "POST",
      body: JSON.stringify({ text }),
    });
  }

  getReport(sessionId: string): Promise<Report> {
    return request(this.url(`/sessions/${sessionId}/report`));
  }
}
