export interface QuestionView {
  question_id: string;
  kc: string;
  unit_id: string;
  stem: string;
  options: string[];
}

export interface TranscriptEntry {
  speaker: string;
  kind: string; // QUESTION | ANSWER | HINT | REDIRECT | VERDICT | CHAT | NOTE
  text: string;
  question_id?: string;
  options?: string[];
  similarity?: number;
  score?: number;
  action?: string;
  level?: string;
  classification?: string;
  followup?: boolean;
  tier?: number;
}

export interface SessionView {
  session_id: string;
  submission_id: string;
  mode: string;
  state: string;
  current_question: QuestionView | null;
  progress: { answered: number; budget: number };
  transcript: TranscriptEntry[];
}

export interface VerdictView {
  similarity: number;
  score: number;
  action: string;
  matched_atoms: number[];
  missing_atoms: number[];
}

export interface Tier2Result {
  state: string;
  session: SessionView;
  verdict?: VerdictView;
  action?: string;
  hint?: string;
  reply?: string;
  classification?: string;
  next_question?: QuestionView | null;
}

export interface Tier1Result {
  state: string;
  question_id: string;
  session: SessionView;
}

export interface SubmissionResult {
  submission_id: string;
  assignment_id: string;
  received_at: number;
  functional: { pass_fraction: number; tests: { name: string; passed: boolean }[] };
}

export interface Report {
  functional_score: number;
  dialogue_score: number;
  final_grade: number;
  unproductive_success: boolean;
  per_kc: Record<string, number>;
  per_question: {
    question_id: string;
    kc: string;
    template_id: string;
    score: number;
    similarity: number;
    action: string;
    tier1_correct: boolean;
    misconception_tag: string;
  }[];
  mode: string;
}

export interface AssignmentInfo {
  assignment_id: string;
  question_budget: number;
  tests: number;
}
