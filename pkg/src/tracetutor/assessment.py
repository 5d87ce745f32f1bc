"""Knowledge tracking and hybrid grading.

Mastery per knowledge component moves by exponential averaging over
question scores; misconception flags are binary and cleared by a passing
explanation; the final grade fuses functional-test evidence with dialogue
evidence and raises the unproductive-success flag when code quality and
demonstrated understanding disagree.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .facts import KC_ORDER, CodeFacts
from .minilang.ast import Program
from .minilang.interp import DEFAULT_STEP_BUDGET, TERM_NORMAL, InputMap, execute
from .questions.engine import QuestionEngine, default_engine

MASTERY_ALPHA = 0.3
INITIAL_MASTERY = 0.5

WEIGHT_FUNCTIONAL = 0.5
WEIGHT_DIALOGUE = 0.5

FUNCTIONAL_HIGH = 80   # "passes the tests" threshold
DIALOGUE_LOW = 50      # "cannot explain them" threshold

MODE_FORMATIVE = "FORMATIVE"
MODE_SUMMATIVE = "SUMMATIVE"


class UnknownKC(Exception):
    pass


class SessionNotFinished(Exception):
    pass


@dataclass
class KnowledgeState:
    mastery: dict[str, float] = field(default_factory=lambda: {kc: INITIAL_MASTERY
                                                               for kc in KC_ORDER})
    misconceptions: dict[str, bool] = field(default_factory=dict)  # "KC:TAG" -> True
    history: list[dict[str, Any]] = field(default_factory=list)

    def flag_key(self, kc: str, tag: str) -> str:
        return f"{kc}:{tag}"

    def flagged(self, kc: str, tag: str) -> bool:
        return self.misconceptions.get(self.flag_key(kc, tag), False)

    def to_dict(self) -> dict[str, Any]:
        return {"mastery": dict(self.mastery),
                "misconceptions": dict(self.misconceptions),
                "history": list(self.history)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "KnowledgeState":
        return cls(mastery=dict(data["mastery"]),
                   misconceptions=dict(data["misconceptions"]),
                   history=list(data["history"]))


def update_mastery(state: KnowledgeState, kc: str, verdict: Any, chosen_tag: str = "NONE",
                   question_id: str = "", timestamp: float = 0.0,
                   alpha: float = MASTERY_ALPHA) -> KnowledgeState:
    """Exponential-average the KC's mastery toward the verdict score and
    maintain misconception flags: a tagged distractor sets its flag, a
    passing explanation clears every flag for the KC."""
    if kc not in state.mastery:
        raise UnknownKC(kc)
    mastery = dict(state.mastery)
    mastery[kc] = (1 - alpha) * mastery[kc] + alpha * (verdict.score / 100.0)
    misconceptions = dict(state.misconceptions)
    if chosen_tag and chosen_tag != "NONE":
        misconceptions[f"{kc}:{chosen_tag}"] = True
    if verdict.action == "PASS":
        misconceptions = {key: value for key, value in misconceptions.items()
                          if not key.startswith(f"{kc}:")}
    history = list(state.history)
    history.append({"question_id": question_id, "kc": kc,
                    "score": verdict.score, "timestamp": timestamp})
    return KnowledgeState(mastery=mastery, misconceptions=misconceptions, history=history)


# question selection --------------------------------------------------------

def select_next(state: KnowledgeState, facts: CodeFacts, asked: Iterable[str],
                seed: int = 0, engine: Optional[QuestionEngine] = None
                ) -> Optional[tuple[str, str]]:
    """Weakest applicable knowledge component first, fixed order on ties,
    least-asked logic unit inside the component. None means done: nothing
    applicable remains (budget exhaustion is the caller's check)."""
    engine = engine or default_engine()
    asked_set = set(asked)
    present: dict[str, list] = {}
    for unit in facts.logic_units:
        for kc in unit.knowledge_components:
            present.setdefault(kc, []).append(unit)

    ranked = sorted(
        (kc for kc in present if kc in state.mastery),
        key=lambda kc: (state.mastery[kc], KC_ORDER.index(kc)),
    )
    asked_units = [qid.split(":")[1] for qid in asked_set if qid.count(":") >= 2]

    def unit_order(unit_id: str):
        return (asked_units.count(unit_id), int(unit_id[1:]))

    for kc in ranked:
        groundable = engine.applicable_units(facts, kc, asked=asked_set)
        if not groundable:
            continue
        # prefer units carrying the component's tag; a question may still be
        # hosted by an untagged unit (e.g. a declaration in the function body)
        tagged = [u.unit_id for u in present[kc] if u.unit_id in groundable]
        pool = tagged or sorted(groundable)
        return kc, min(pool, key=unit_order)
    return None


# functional testing ---------------------------------------------------------

@dataclass
class FunctionalResult:
    tests: list[dict[str, Any]]
    pass_fraction: float

    def to_dict(self) -> dict[str, Any]:
        return {"tests": self.tests, "pass_fraction": self.pass_fraction}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FunctionalResult":
        return cls(tests=list(data["tests"]), pass_fraction=data["pass_fraction"])


def run_functional_tests(program: Program, tests: list[dict[str, Any]],
                         budget: int = DEFAULT_STEP_BUDGET) -> FunctionalResult:
    """Output-comparison tests: a test passes when the run terminates
    normally and the printed lines equal the expected text exactly.
    Faults and budget exhaustion count as failures, never as errors."""
    if not tests:
        raise ValueError("at least one functional test is required")
    records: list[dict[str, Any]] = []
    passed = 0
    for index, test in enumerate(tests):
        inputs: InputMap = test["inputs"]
        expected = test["expected_output"]
        trace = execute(program, inputs, step_budget=budget)
        actual = trace.output_text()
        ok = trace.termination == TERM_NORMAL and actual == expected
        passed += ok
        records.append({
            "name": test.get("name", f"test{index}"),
            "inputs": inputs,
            "expected_output": expected,
            "actual_output": actual,
            "termination": trace.termination,
            "passed": ok,
        })
    return FunctionalResult(tests=records, pass_fraction=passed / len(records))


# report ----------------------------------------------------------------------

@dataclass
class AssessmentReport:
    functional_score: int
    dialogue_score: int
    final_grade: int
    unproductive_success: bool
    per_kc: dict[str, float]
    per_question: list[dict[str, Any]]
    mode: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "functional_score": self.functional_score,
            "dialogue_score": self.dialogue_score,
            "final_grade": self.final_grade,
            "unproductive_success": self.unproductive_success,
            "per_kc": self.per_kc,
            "per_question": self.per_question,
            "mode": self.mode,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fuse_scores(functional_score: int, dialogue_score: int,
                w_functional: float = WEIGHT_FUNCTIONAL,
                w_dialogue: float = WEIGHT_DIALOGUE) -> int:
    return round(w_functional * functional_score + w_dialogue * dialogue_score)


def unproductive_success(functional_score: int, dialogue_score: int,
                         functional_high: int = FUNCTIONAL_HIGH,
                         dialogue_low: int = DIALOGUE_LOW) -> bool:
    """Functionally strong yet unable to explain it: the flag this whole
    pipeline exists to raise."""
    return functional_score >= functional_high and dialogue_score < dialogue_low


def compile_report(session: Any, w_functional: float = WEIGHT_FUNCTIONAL,
                   w_dialogue: float = WEIGHT_DIALOGUE,
                   functional_high: int = FUNCTIONAL_HIGH,
                   dialogue_low: int = DIALOGUE_LOW) -> AssessmentReport:
    """Fuse one finished session into the final report.

    The session must be in a terminal state and expose functional results,
    knowledge state, mode, question budget, and per-question outcomes;
    unanswered required questions count as zero so abandoning hard
    questions cannot raise the dialogue score.
    """
    if session.state not in ("COMPLETED", "ABORTED"):
        raise SessionNotFinished(session.state)
    functional_score = round(100 * session.functional.pass_fraction)
    scores = [record["score"] for record in session.question_results]
    budget = max(session.question_budget, 1)
    dialogue_score = round(sum(scores[:budget]) / budget)
    return AssessmentReport(
        functional_score=functional_score,
        dialogue_score=dialogue_score,
        final_grade=fuse_scores(functional_score, dialogue_score, w_functional, w_dialogue),
        unproductive_success=unproductive_success(functional_score, dialogue_score,
                                                  functional_high, dialogue_low),
        per_kc=dict(session.knowledge.mastery),
        per_question=[dict(record) for record in session.question_results],
        mode=session.mode,
    )
