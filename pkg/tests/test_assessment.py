import random
from dataclasses import dataclass, field

import pytest
from hypothesis import given, settings, strategies as st

from tracetutor.assessment import (
    FunctionalResult,
    KnowledgeState,
    SessionNotFinished,
    UnknownKC,
    compile_report,
    fuse_scores,
    run_functional_tests,
    select_next,
    unproductive_success,
    update_mastery,
)
from tracetutor.dialogue import verdict_from_similarity
from tracetutor.facts import KC_ORDER, build_facts
from tracetutor.minilang import parse

from corpus import P1, P2, PROGRAMS


def _verdict(score, action="FOLLOW_UP"):
    @dataclass
    class V:
        score: int
        action: str
    return V(score, action)


def test_update_mastery_ema_spot_values():
    state = KnowledgeState()
    out = update_mastery(state, "LOOPS", _verdict(100))
    assert out.mastery["LOOPS"] == pytest.approx(0.65)
    out = update_mastery(state, "LOOPS", _verdict(20))
    assert out.mastery["LOOPS"] == pytest.approx(0.41)


def test_update_mastery_immutable_and_history():
    state = KnowledgeState()
    out = update_mastery(state, "TRACING", _verdict(80), question_id="q1", timestamp=5.0)
    assert state.mastery["TRACING"] == 0.5
    assert out.history[-1] == {"question_id": "q1", "kc": "TRACING",
                               "score": 80, "timestamp": 5.0}


def test_unknown_kc():
    with pytest.raises(UnknownKC):
        update_mastery(KnowledgeState(), "POINTERS", _verdict(50))


def test_misconception_flag_set_and_cleared():
    state = KnowledgeState()
    state = update_mastery(state, "TRACING", _verdict(0, "FOLLOW_UP"), chosen_tag="OFF_BY_ONE")
    assert state.flagged("TRACING", "OFF_BY_ONE")
    state = update_mastery(state, "TRACING", _verdict(100, "PASS"))
    assert not state.flagged("TRACING", "OFF_BY_ONE")
    # other KCs keep their flags
    state = update_mastery(state, "LOOPS", _verdict(0, "FOLLOW_UP"), chosen_tag="BOUNDS_CONFUSION")
    state = update_mastery(state, "TRACING", _verdict(100, "PASS"))
    assert state.flagged("LOOPS", "BOUNDS_CONFUSION")


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 100), min_size=1, max_size=40))
def test_mastery_stays_in_unit_interval(scores):
    state = KnowledgeState()
    for s in scores:
        state = update_mastery(state, "ARRAYS", _verdict(s))
        assert 0.0 <= state.mastery["ARRAYS"] <= 1.0


def test_pass_never_decreases_low_mastery():
    state = KnowledgeState()
    for score in (80, 90, 100):
        before = state.mastery["LOOPS"]
        if before <= score / 100:
            state = update_mastery(state, "LOOPS", _verdict(score, "PASS"))
            assert state.mastery["LOOPS"] >= before


def test_select_next_tie_breaks_by_fixed_order():
    facts = build_facts(parse(P1), input_sets=[{"n": 3}])
    choice = select_next(KnowledgeState(), facts, asked=set())
    assert choice is not None
    kc, unit_id = choice
    assert kc == "LOOPS"  # first in the tie order among applicable components


def test_select_next_picks_minimum_mastery():
    facts = build_facts(parse(P1), input_sets=[{"n": 3}])
    state = KnowledgeState()
    state.mastery["LOOPS"] = 0.9
    state.mastery["TRACING"] = 0.3
    choice = select_next(state, facts, asked=set())
    assert choice is not None and choice[0] == "TRACING"


def test_select_next_matches_exhaustive_scan():
    rng = random.Random(4)
    facts = build_facts(parse(PROGRAMS["count_positives"]), seed=2)
    from tracetutor.questions import default_engine
    engine = default_engine()
    for _ in range(50):
        state = KnowledgeState()
        for kc in state.mastery:
            state.mastery[kc] = rng.random()
        choice = select_next(state, facts, asked=set())
        applicable = {
            kc for unit in facts.logic_units for kc in unit.knowledge_components
            if kc in state.mastery and engine.has_applicable(facts, kc)
        }
        if choice is None:
            assert not applicable
        else:
            assert choice[0] in applicable
            assert state.mastery[choice[0]] == min(state.mastery[kc] for kc in applicable)


def test_select_next_done_when_nothing_applicable():
    facts = build_facts(parse("int main(int x){return x;}"), input_sets=[{"x": 1}])
    # no prints, no loops, no branches: no template grounds anything
    assert select_next(KnowledgeState(), facts, asked=set()) is None


def test_run_functional_tests_p1():
    program = parse(P1)
    result = run_functional_tests(program, [
        {"name": "n3", "inputs": {"n": 3}, "expected_output": "3"},
        {"name": "n4", "inputs": {"n": 4}, "expected_output": "6"},
    ])
    assert result.pass_fraction == 1.0
    assert all(t["passed"] for t in result.tests)


def test_run_functional_tests_wrong_expectation_fails():
    program = parse(P1)
    result = run_functional_tests(program, [
        {"name": "n3", "inputs": {"n": 3}, "expected_output": "3"},
        {"name": "n4-wrong", "inputs": {"n": 4}, "expected_output": "7"},
    ])
    assert result.pass_fraction == 0.5


def test_run_functional_tests_budget_exhaustion_fails():
    program = parse(P2)
    result = run_functional_tests(program, [
        {"name": "any", "inputs": {}, "expected_output": "0"},
    ])
    assert result.pass_fraction == 0.0
    assert result.tests[0]["termination"] == "STEP_BUDGET_EXCEEDED"


@dataclass
class _FakeSession:
    state: str = "COMPLETED"
    mode: str = "FORMATIVE"
    question_budget: int = 3
    functional: FunctionalResult = None
    knowledge: KnowledgeState = field(default_factory=KnowledgeState)
    question_results: list = field(default_factory=list)


def _session(F, scores, budget=None):
    budget = budget if budget is not None else len(scores)
    return _FakeSession(
        functional=FunctionalResult(tests=[{"passed": True}], pass_fraction=F / 100),
        question_results=[{"question_id": f"q{i}", "kc": "LOOPS", "score": s}
                          for i, s in enumerate(scores)],
        question_budget=budget,
    )


def test_compile_report_spot_values():
    report = compile_report(_session(100, [100, 100, 100]))
    assert (report.functional_score, report.dialogue_score, report.final_grade) == (100, 100, 100)
    assert not report.unproductive_success

    report = compile_report(_session(100, [20, 20, 20]))
    assert report.final_grade == 60
    assert report.unproductive_success

    report = compile_report(_session(40, [90, 90, 90]))
    assert report.final_grade == 65
    assert not report.unproductive_success


def test_compile_report_counts_unanswered_as_zero():
    report = compile_report(_session(100, [], budget=3))
    assert report.dialogue_score == 0
    report = compile_report(_session(100, [90], budget=3))
    assert report.dialogue_score == 30


def test_compile_report_requires_terminal_state():
    session = _session(100, [50])
    session.state = "TIER1_PENDING"
    with pytest.raises(SessionNotFinished):
        compile_report(session)


def test_unproductive_success_boundary_matrix():
    for F in (79, 80, 81):
        for D in (49, 50, 51):
            assert unproductive_success(F, D) == (F >= 80 and D < 50)


def test_fusion_is_mean_with_default_weights():
    for F in range(0, 101, 7):
        for D in range(0, 101, 9):
            assert fuse_scores(F, D) == round((F + D) / 2)


def test_verdict_scores_integrate_with_mastery():
    state = KnowledgeState()
    verdict = verdict_from_similarity(100, True, 0)
    state = update_mastery(state, "LOOPS", verdict)
    assert state.mastery["LOOPS"] == pytest.approx(0.65)
