"""Session state machine, persistence, and the store binding it together.

A session walks CREATED -> ANALYZED -> TIER1_PENDING -> TIER2_PENDING
(-> SCAFFOLDING) ... -> COMPLETED/ABORTED. COMPLETED and ABORTED absorb.
Every mutation appends to an event log and atomically rewrites a snapshot,
so any session can be audited or replayed against a fresh engine. One
writer per session; distinct sessions proceed in parallel.
"""
from __future__ import annotations

import json
import os
import threading
import time
import uuid
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from . import assessment, dialogue
from .assessment import FunctionalResult, KnowledgeState, compile_report, run_functional_tests
from .config import AssignmentConfig
from .dialogue import BackendDescriptor, BackendError, Verdict
from .facts import CodeFacts, build_facts
from .minilang import parse
from .questions import (
    Exhausted,
    NoApplicableTemplate,
    Question,
    QuestionEngine,
    ReferenceReason,
)

STATE_CREATED = "CREATED"
STATE_ANALYZED = "ANALYZED"
STATE_TIER1 = "TIER1_PENDING"
STATE_TIER2 = "TIER2_PENDING"
STATE_SCAFFOLDING = "SCAFFOLDING"
STATE_COMPLETED = "COMPLETED"
STATE_ABORTED = "ABORTED"

TERMINAL_STATES = {STATE_COMPLETED, STATE_ABORTED}


class SessionError(Exception):
    code = "session_error"


class WrongState(SessionError):
    code = "wrong_state"


class StaleQuestion(SessionError):
    code = "stale_question"


class ProctorTokenRequired(SessionError):
    code = "proctor_token_required"


class UnknownAssignment(SessionError):
    code = "unknown_assignment"


class UnknownSubmission(SessionError):
    code = "unknown_submission"


class UnknownSession(SessionError):
    code = "unknown_session"


class ValidationError(SessionError):
    code = "validation_error"


@dataclass
class Submission:
    submission_id: str
    assignment_id: str
    source: str
    received_at: float
    facts: CodeFacts
    functional: FunctionalResult

    def to_dict(self) -> dict[str, Any]:
        return {
            "submission_id": self.submission_id,
            "assignment_id": self.assignment_id,
            "source": self.source,
            "received_at": self.received_at,
            "functional": self.functional.to_dict(),
            "facts": self.facts.to_dict(),
        }


@dataclass
class Session:
    session_id: str
    submission_id: str
    mode: str
    seed: int
    question_budget: int
    max_attempts: int
    backend: BackendDescriptor
    state: str = STATE_CREATED
    current_question: Optional[Question] = None
    current_reference: Optional[ReferenceReason] = None
    current_kc: Optional[str] = None
    tier1_correct: Optional[bool] = None
    slot_tag: Optional[str] = None           # first tagged distractor picked this slot
    attempts_used: int = 0
    asked: list[str] = field(default_factory=list)
    template_history: list[str] = field(default_factory=list)
    knowledge: KnowledgeState = field(default_factory=KnowledgeState)
    transcript: list[dict[str, Any]] = field(default_factory=list)
    question_results: list[dict[str, Any]] = field(default_factory=list)
    backend_fallback: bool = False
    created_at: float = 0.0
    time_limit: float = 1800.0
    proctor_token: Optional[str] = None

    @property
    def functional(self) -> FunctionalResult:  # bound by the store before reporting
        return self._functional

    def to_dict(self) -> dict[str, Any]:
        return {
            "session_id": self.session_id,
            "submission_id": self.submission_id,
            "mode": self.mode,
            "seed": self.seed,
            "question_budget": self.question_budget,
            "max_attempts": self.max_attempts,
            "backend": self.backend.to_dict(),
            "state": self.state,
            "current_question": self.current_question.to_dict() if self.current_question else None,
            "current_reference": (self.current_reference.to_dict()
                                  if self.current_reference else None),
            "current_kc": self.current_kc,
            "tier1_correct": self.tier1_correct,
            "slot_tag": self.slot_tag,
            "attempts_used": self.attempts_used,
            "asked": self.asked,
            "template_history": self.template_history,
            "knowledge": self.knowledge.to_dict(),
            "transcript": self.transcript,
            "question_results": self.question_results,
            "backend_fallback": self.backend_fallback,
            "created_at": self.created_at,
            "time_limit": self.time_limit,
            "proctor_token": self.proctor_token,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Session":
        session = cls(
            session_id=data["session_id"],
            submission_id=data["submission_id"],
            mode=data["mode"],
            seed=data["seed"],
            question_budget=data["question_budget"],
            max_attempts=data["max_attempts"],
            backend=BackendDescriptor.from_dict(data["backend"]),
        )
        session.state = data["state"]
        session.current_question = (Question.from_dict(data["current_question"])
                                    if data["current_question"] else None)
        session.current_reference = (ReferenceReason.from_dict(data["current_reference"])
                                     if data["current_reference"] else None)
        session.current_kc = data["current_kc"]
        session.tier1_correct = data["tier1_correct"]
        session.slot_tag = data["slot_tag"]
        session.attempts_used = data["attempts_used"]
        session.asked = list(data["asked"])
        session.template_history = list(data["template_history"])
        session.knowledge = KnowledgeState.from_dict(data["knowledge"])
        session.transcript = list(data["transcript"])
        session.question_results = list(data["question_results"])
        session.backend_fallback = data["backend_fallback"]
        session.created_at = data["created_at"]
        session.time_limit = data["time_limit"]
        session.proctor_token = data.get("proctor_token")
        return session

    def client_view(self) -> dict[str, Any]:
        """State as the student client may see it: no answer keys, no
        reference atoms, no grounding."""
        return {
            "session_id": self.session_id,
            "submission_id": self.submission_id,
            "mode": self.mode,
            "state": self.state,
            "current_question": (self.current_question.to_client_dict()
                                 if self.current_question and self.state not in TERMINAL_STATES
                                 else None),
            "progress": {"answered": len(self.question_results),
                         "budget": self.question_budget},
            "transcript": self.transcript,
        }


def _derive_seed(seed: int, *parts: Any) -> int:
    return zlib.crc32(":".join([str(seed), *[str(p) for p in parts]]).encode())


class SessionStore:
    """Owns assignments, submissions, and sessions on disk plus their locks."""

    def __init__(self, data_dir: str | Path, clock: Callable[[], float] = time.time,
                 id_factory: Optional[Callable[[], str]] = None,
                 engine: Optional[QuestionEngine] = None,
                 backend: Optional[BackendDescriptor] = None,
                 guardrail_config: Optional[dict[str, Any]] = None):
        self.data_dir = Path(data_dir)
        (self.data_dir / "assignments").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "submissions").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self.id_factory = id_factory or (lambda: uuid.uuid4().hex[:12])
        self.engine = engine or QuestionEngine()
        self.default_backend = backend or BackendDescriptor()
        self.guardrails = guardrail_config or dialogue.load_guardrail_config()
        self._submissions: dict[str, Submission] = {}
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._assignment_engines: dict[str, QuestionEngine] = {}
        self._assignment_guardrails: dict[str, dict[str, Any]] = {}

    def _engine_for(self, config: AssignmentConfig) -> QuestionEngine:
        """Assignment-level template library override, cached per assignment."""
        if not config.template_library_path:
            return self.engine
        key = config.assignment_id
        if key not in self._assignment_engines:
            from .questions import load_templates
            self._assignment_engines[key] = QuestionEngine(
                load_templates(config.template_library_path))
        return self._assignment_engines[key]

    def _guardrails_for(self, config: AssignmentConfig) -> dict[str, Any]:
        if not config.guardrail_phrases_path:
            return self.guardrails
        key = config.assignment_id
        if key not in self._assignment_guardrails:
            self._assignment_guardrails[key] = dialogue.load_guardrail_config(
                config.guardrail_phrases_path)
        return self._assignment_guardrails[key]

    # assignments -----------------------------------------------------

    def add_assignment(self, config: AssignmentConfig) -> None:
        path = self.data_dir / "assignments" / f"{config.assignment_id}.json"
        _atomic_write(path, config.to_json())

    def load_assignment(self, assignment_id: str) -> AssignmentConfig:
        path = self.data_dir / "assignments" / f"{assignment_id}.json"
        if not path.exists():
            raise UnknownAssignment(assignment_id)
        return AssignmentConfig.load(path)

    def list_assignments(self) -> list[str]:
        return sorted(p.stem for p in (self.data_dir / "assignments").glob("*.json"))

    # submissions -----------------------------------------------------

    def create_submission(self, assignment_id: str, source: str) -> Submission:
        """Parse, sample inputs, extract facts, run the assignment tests,
        then persist; a parse failure persists nothing."""
        config = self.load_assignment(assignment_id)
        program = parse(source)  # ParseError/SemanticError propagate untouched
        facts = build_facts(program, seed=config.seed, input_count=config.input_sets,
                            domain=config.input_domain, budget=config.step_budget)
        functional = run_functional_tests(program, config.tests, budget=config.step_budget)
        submission = Submission(
            submission_id=self.id_factory(),
            assignment_id=assignment_id,
            source=source,
            received_at=self.clock(),
            facts=facts,
            functional=functional,
        )
        path = self.data_dir / "submissions" / f"{submission.submission_id}.json"
        _atomic_write(path, json.dumps(submission.to_dict(), indent=2))
        self._submissions[submission.submission_id] = submission
        return submission

    def get_submission(self, submission_id: str) -> Submission:
        if submission_id in self._submissions:
            return self._submissions[submission_id]
        path = self.data_dir / "submissions" / f"{submission_id}.json"
        if not path.exists():
            raise UnknownSubmission(submission_id)
        data = json.loads(path.read_text())
        config = self.load_assignment(data["assignment_id"])
        program = parse(data["source"])
        facts = build_facts(program, seed=config.seed, input_count=config.input_sets,
                            domain=config.input_domain, budget=config.step_budget)
        functional = run_functional_tests(program, config.tests, budget=config.step_budget)
        # stored copies exist for audit; a regeneration mismatch means tampering
        if functional.to_dict() != data["functional"]:
            raise ValidationError(f"stored functional results for {submission_id} "
                                  "do not match regeneration")
        submission = Submission(
            submission_id=data["submission_id"], assignment_id=data["assignment_id"],
            source=data["source"], received_at=data["received_at"],
            facts=facts, functional=functional,
        )
        self._submissions[submission_id] = submission
        return submission

    # session plumbing ------------------------------------------------

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def _session_dir(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / session_id

    def _log_event(self, session: Session, event_type: str, payload: dict[str, Any]) -> None:
        directory = self._session_dir(session.session_id)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "events.jsonl", "a") as log:
            log.write(json.dumps({"type": event_type, "payload": payload}) + "\n")

    def _snapshot(self, session: Session) -> None:
        directory = self._session_dir(session.session_id)
        directory.mkdir(parents=True, exist_ok=True)
        _atomic_write(directory / "snapshot.json", session.to_json())

    def _persist(self, session: Session, event_type: str, payload: dict[str, Any]) -> None:
        self._log_event(session, event_type, payload)
        self._snapshot(session)

    def get_session(self, session_id: str) -> Session:
        if session_id in self._sessions:
            return self._sessions[session_id]
        snapshot = self._session_dir(session_id) / "snapshot.json"
        if not snapshot.exists():
            raise UnknownSession(session_id)
        session = Session.from_dict(json.loads(snapshot.read_text()))
        self._sessions[session_id] = session
        return session

    def _check_deadline(self, session: Session) -> None:
        if (session.mode == assessment.MODE_SUMMATIVE
                and session.state not in TERMINAL_STATES
                and self.clock() > session.created_at + session.time_limit):
            session.state = STATE_ABORTED
            session.transcript.append({"speaker": "SYSTEM", "kind": "NOTE",
                                       "text": "time limit reached; session closed"})
            self._persist(session, "aborted", {"reason": "time_limit"})
            raise WrongState("session time limit reached")

    # session operations ------------------------------------------------

    def start_session(self, submission_id: str, mode: str, seed: int,
                      question_budget: Optional[int] = None,
                      proctor_token: Optional[str] = None,
                      backend: Optional[BackendDescriptor] = None) -> Session:
        submission = self.get_submission(submission_id)
        config = self.load_assignment(submission.assignment_id)
        if mode not in (assessment.MODE_FORMATIVE, assessment.MODE_SUMMATIVE):
            raise ValidationError(f"unknown mode {mode!r}")
        if mode == assessment.MODE_SUMMATIVE and not proctor_token:
            raise ProctorTokenRequired("summative sessions need a proctor acknowledgment token")
        budget = question_budget if question_budget is not None else config.question_budget
        if budget < 1:
            raise ValidationError("question budget must be >= 1")
        session = Session(
            session_id=self.id_factory(),
            submission_id=submission_id,
            mode=mode,
            seed=seed,
            question_budget=budget,
            max_attempts=config.max_attempts,
            backend=backend or self.default_backend,
            created_at=self.clock(),
            time_limit=config.summative_time_limit,
            proctor_token=proctor_token,
        )
        self._sessions[session.session_id] = session
        self._lock_for(session.session_id)
        session.state = STATE_ANALYZED  # facts were extracted at submission time
        self._log_event(session, "started", {
            "submission_id": submission_id, "mode": mode, "seed": seed,
            "question_budget": budget, "proctor_token": proctor_token,
        })
        self._advance_to_next_question(session, submission, config)
        self._snapshot(session)
        return session

    def submit_tier1(self, session_id: str, question_id: str, choice_index: int) -> dict[str, Any]:
        session = self.get_session(session_id)
        with self._lock_for(session_id):
            self._check_deadline(session)
            if session.state != STATE_TIER1:
                raise WrongState(f"tier-1 selection not expected in {session.state}")
            question = session.current_question
            if question is None or question.question_id != question_id:
                raise StaleQuestion(question_id)
            if not isinstance(choice_index, int) or not 0 <= choice_index <= 3:
                raise ValidationError("choice_index must be 0..3")
            option = question.options[choice_index]
            session.tier1_correct = choice_index == question.correct_index
            if option.misconception_tag != "NONE" and session.slot_tag is None:
                session.slot_tag = option.misconception_tag
            session.transcript.append({
                "speaker": "STUDENT", "kind": "ANSWER",
                "text": option.text, "question_id": question_id, "tier": 1,
            })
            session.state = STATE_TIER2
            self._persist(session, "tier1", {"question_id": question_id,
                                             "choice_index": choice_index})
            return {"state": session.state, "question_id": question_id}

    def submit_tier2(self, session_id: str, text: str) -> dict[str, Any]:
        session = self.get_session(session_id)
        with self._lock_for(session_id):
            self._check_deadline(session)
            if session.state not in (STATE_TIER2, STATE_SCAFFOLDING):
                raise WrongState(f"explanation not expected in {session.state}")
            if not text or not text.strip():
                raise dialogue.EmptyAnswer("explanation must not be empty")
            submission = self.get_submission(session.submission_id)
            config = self.load_assignment(submission.assignment_id)
            question = session.current_question
            guardrails = self._guardrails_for(config)
            ruling = dialogue.guard_turn(text, self._vocabulary(session, submission),
                                         question.question_id, guardrails)
            if ruling.is_redirect:
                reply = dialogue.render_guard_reply(ruling, guardrails)
                session.transcript.append({"speaker": "STUDENT", "kind": "CHAT", "text": text})
                session.transcript.append({"speaker": "GUARDRAIL", "kind": "REDIRECT",
                                           "text": reply,
                                           "classification": ruling.classification})
                self._persist(session, "redirect", {"text": text,
                                                    "classification": ruling.classification})
                return {"state": session.state, "reply": reply,
                        "classification": ruling.classification,
                        "attempts_used": session.attempts_used}

            verdict = self._verify(session, submission, config, text)
            session.transcript.append({"speaker": "STUDENT", "kind": "ANSWER",
                                       "text": text, "question_id": question.question_id,
                                       "tier": 2})
            self._log_event(session, "tier2", {"text": text})
            self._log_event(session, "verdict", verdict.to_dict())
            result = self._apply_verdict(session, submission, config, verdict)
            self._snapshot(session)
            return result

    def message(self, session_id: str, text: str) -> dict[str, Any]:
        """Free chat outside the graded flow; guardrails still apply."""
        session = self.get_session(session_id)
        with self._lock_for(session_id):
            self._check_deadline(session)
            if session.state in TERMINAL_STATES:
                raise WrongState("session is finished")
            if not text or not text.strip():
                raise dialogue.EmptyAnswer("message must not be empty")
            submission = self.get_submission(session.submission_id)
            config = self.load_assignment(submission.assignment_id)
            guardrails = self._guardrails_for(config)
            qid = session.current_question.question_id if session.current_question else None
            ruling = dialogue.guard_turn(text, self._vocabulary(session, submission),
                                         qid, guardrails)
            reply = dialogue.render_guard_reply(ruling, guardrails)
            session.transcript.append({"speaker": "STUDENT", "kind": "CHAT", "text": text})
            session.transcript.append({
                "speaker": "GUARDRAIL" if ruling.is_redirect else "INSTRUCTOR",
                "kind": "REDIRECT" if ruling.is_redirect else "CHAT",
                "text": reply, "classification": ruling.classification,
            })
            self._persist(session, "message", {"text": text,
                                               "classification": ruling.classification})
            return {"state": session.state, "reply": reply,
                    "classification": ruling.classification}

    def abort_session(self, session_id: str) -> Session:
        session = self.get_session(session_id)
        with self._lock_for(session_id):
            if session.state in TERMINAL_STATES:
                return session
            session.state = STATE_ABORTED
            self._persist(session, "aborted", {"reason": "requested"})
            return session

    def get_report(self, session_id: str):
        session = self.get_session(session_id)
        if session.state not in TERMINAL_STATES:
            raise assessment.SessionNotFinished(session.state)
        submission = self.get_submission(session.submission_id)
        config = self.load_assignment(submission.assignment_id)
        session._functional = submission.functional
        return compile_report(
            session,
            w_functional=config.weight_functional,
            w_dialogue=config.weight_dialogue,
            functional_high=config.functional_high,
            dialogue_low=config.dialogue_low,
        )

    # internals ---------------------------------------------------------

    def _vocabulary(self, session: Session, submission: Submission) -> set[str]:
        program = submission.facts.program
        vocab = {name.lower() for name in program.declared_names()}
        vocab |= {fn.name.lower() for fn in program.functions}
        vocab |= dialogue.DOMAIN_LEXICON
        if session.current_question is not None:
            vocab |= dialogue.harvest_vocabulary(
                session.current_question.stem,
                *(option.text for option in session.current_question.options))
        return vocab

    def _verify(self, session: Session, submission: Submission,
                config: AssignmentConfig, text: str) -> Verdict:
        reference = session.current_reference
        tier1 = bool(session.tier1_correct)
        if session.backend.kind == dialogue.EXTERNAL and not session.backend_fallback:
            try:
                similarity = dialogue.external_similarity(
                    session.backend, reference, text, submission.facts, session.transcript)
                return dialogue.verdict_from_similarity(
                    similarity, tier1, session.attempts_used,
                    missing=list(range(len(reference.atoms))),
                    max_attempts=session.max_attempts,
                    pass_threshold=config.pass_threshold,
                    focused_threshold=config.focused_threshold)
            except BackendError as exc:
                session.backend_fallback = True
                session.transcript.append({
                    "speaker": "SYSTEM", "kind": "NOTE",
                    "text": "external verifier unavailable; continuing with the "
                            f"rule-based verifier ({exc.kind})",
                })
        return dialogue.verify_explanation(
            reference, text, tier1, session.attempts_used,
            max_attempts=session.max_attempts,
            pass_threshold=config.pass_threshold,
            focused_threshold=config.focused_threshold)

    def _apply_verdict(self, session: Session, submission: Submission,
                       config: AssignmentConfig, verdict: Verdict) -> dict[str, Any]:
        action = verdict.action
        summative = session.mode == assessment.MODE_SUMMATIVE
        if summative and action in (dialogue.ACTION_HINT_BROAD, dialogue.ACTION_HINT_FOCUSED):
            action = dialogue.ACTION_FOLLOW_UP  # hints never render in summative mode
        session.transcript.append({
            "speaker": "VERIFIER", "kind": "VERDICT",
            "text": f"similarity {verdict.similarity}, score {verdict.score}",
            "similarity": verdict.similarity, "score": verdict.score,
            "action": action,
        })
        payload: dict[str, Any] = {"verdict": verdict.to_dict(), "action": action}

        if action in (dialogue.ACTION_PASS, dialogue.ACTION_FAIL):
            self._close_slot(session, submission, config, verdict)
            payload["state"] = session.state
            payload["next_question"] = (session.current_question.to_client_dict()
                                        if session.state == STATE_TIER1 else None)
            return payload

        if action in (dialogue.ACTION_HINT_BROAD, dialogue.ACTION_HINT_FOCUSED):
            level = (dialogue.HINT_BROAD if action == dialogue.ACTION_HINT_BROAD
                     else dialogue.HINT_FOCUSED)
            hint = dialogue.render_hint(session.current_reference, level,
                                        verdict.missing_atoms)
            session.attempts_used += 1
            session.state = STATE_SCAFFOLDING
            session.transcript.append({"speaker": "INSTRUCTOR", "kind": "HINT",
                                       "text": hint, "level": level})
            payload.update({"state": session.state, "hint": hint})
            return payload

        # FOLLOW_UP: swap in a narrower question within the same slot; the
        # delivered action governs here, not the raw verdict (summative mode
        # converts hints into follow-ups)
        session.attempts_used += 1
        try:
            question, reference = self._engine_for(config).generate_followup(
                session.current_question, None, submission.facts,
                _derive_seed(session.seed, len(session.asked)),
                asked=session.asked)
        except Exhausted:
            self._close_slot(session, submission, config, verdict)
            payload["state"] = session.state
            payload["next_question"] = (session.current_question.to_client_dict()
                                        if session.state == STATE_TIER1 else None)
            return payload
        session.current_question = question
        session.current_reference = reference
        session.tier1_correct = None
        session.asked.append(question.question_id)
        session.template_history.append(question.template_id)
        session.state = STATE_TIER1
        session.transcript.append({"speaker": "INSTRUCTOR", "kind": "QUESTION",
                                   "text": question.stem,
                                   "question_id": question.question_id,
                                   "options": [c.text for c in question.options],
                                   "followup": True})
        payload.update({"state": session.state,
                        "next_question": question.to_client_dict()})
        return payload

    def _close_slot(self, session: Session, submission: Submission,
                    config: AssignmentConfig, verdict: Verdict) -> None:
        question = session.current_question
        session.knowledge = assessment.update_mastery(
            session.knowledge, session.current_kc, verdict,
            chosen_tag=session.slot_tag or "NONE",
            question_id=question.question_id, timestamp=self.clock())
        session.question_results.append({
            "question_id": question.question_id,
            "kc": session.current_kc,
            "template_id": question.template_id,
            "score": verdict.score,
            "similarity": verdict.similarity,
            "action": verdict.action,
            "tier1_correct": bool(session.tier1_correct),
            "misconception_tag": session.slot_tag or "NONE",
        })
        self._advance_to_next_question(session, submission, config)

    def _advance_to_next_question(self, session: Session, submission: Submission,
                                  config: AssignmentConfig) -> None:
        session.current_question = None
        session.current_reference = None
        session.current_kc = None
        session.tier1_correct = None
        session.slot_tag = None
        session.attempts_used = 0
        if len(session.question_results) >= session.question_budget:
            session.state = STATE_COMPLETED
            self._log_event(session, "completed", {"answered": len(session.question_results)})
            return
        engine = self._engine_for(config)
        choice = assessment.select_next(session.knowledge, submission.facts,
                                        asked=set(session.asked),
                                        seed=session.seed, engine=engine)
        if choice is None:
            session.state = STATE_COMPLETED
            self._log_event(session, "completed", {"answered": len(session.question_results)})
            return
        kc, unit_id = choice
        try:
            question, reference = engine.generate_question(
                submission.facts, kc, _derive_seed(session.seed, len(session.asked)),
                history=session.template_history, unit_id=unit_id, asked=session.asked)
        except NoApplicableTemplate:
            session.state = STATE_COMPLETED
            self._log_event(session, "completed", {"answered": len(session.question_results)})
            return
        session.current_question = question
        session.current_reference = reference
        session.current_kc = kc
        session.asked.append(question.question_id)
        session.template_history.append(question.template_id)
        session.state = STATE_TIER1
        session.transcript.append({"speaker": "INSTRUCTOR", "kind": "QUESTION",
                                   "text": question.stem,
                                   "question_id": question.question_id,
                                   "options": [c.text for c in question.options]})
        self._log_event(session, "question", {"question_id": question.question_id,
                                              "kc": kc, "unit_id": unit_id})


def _atomic_write(path: Path, content: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(content)
    os.replace(tmp, path)


# replay ---------------------------------------------------------------------

def replay_session(session_dir: str | Path, data_dir: str | Path,
                   engine: Optional[QuestionEngine] = None) -> dict[str, Any]:
    """Re-drive a persisted transcript through a fresh rule-based engine and
    compare every verdict; returns {"ok": bool, "verdicts": n, "mismatches": [...]}.
    """
    session_dir = Path(session_dir)
    events = [json.loads(line) for line in
              (session_dir / "events.jsonl").read_text().splitlines() if line.strip()]
    started = next(e for e in events if e["type"] == "started")
    recorded = [e["payload"] for e in events if e["type"] == "verdict"]

    store = SessionStore(data_dir, clock=lambda: 0.0, engine=engine,
                         backend=BackendDescriptor())
    fresh = store.start_session(
        started["payload"]["submission_id"], started["payload"]["mode"],
        started["payload"]["seed"], started["payload"]["question_budget"],
        proctor_token=started["payload"].get("proctor_token"))
    produced: list[dict[str, Any]] = []
    for event in events:
        if event["type"] == "tier1":
            question = store.get_session(fresh.session_id).current_question
            # the logged index refers to the same deterministic option order
            store.submit_tier1(fresh.session_id, question.question_id,
                               event["payload"]["choice_index"])
        elif event["type"] == "tier2":
            result = store.submit_tier2(fresh.session_id, event["payload"]["text"])
            produced.append(result["verdict"])
        elif event["type"] == "message":
            store.message(fresh.session_id, event["payload"]["text"])
    mismatches = [
        {"index": i, "recorded": rec, "replayed": rep}
        for i, (rec, rep) in enumerate(zip(recorded, produced))
        if rec != rep
    ]
    if len(recorded) != len(produced):
        mismatches.append({"index": -1,
                           "recorded": f"{len(recorded)} verdicts",
                           "replayed": f"{len(produced)} verdicts"})
    return {"ok": not mismatches, "verdicts": len(recorded), "mismatches": mismatches}
