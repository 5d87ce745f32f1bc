import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings, strategies as st

from tracetutor.dialogue import (
    ACTION_FAIL,
    ACTION_FOLLOW_UP,
    ACTION_HINT_BROAD,
    ACTION_HINT_FOCUSED,
    ACTION_PASS,
    BackendDescriptor,
    BackendError,
    EmptyAnswer,
    MissingPlaceholder,
    action_for,
    build_prompt_context,
    call_external_backend,
    external_similarity,
    guard_turn,
    load_guardrail_config,
    render_guard_reply,
    render_hint,
    score_for,
    verify_explanation,
)
from tracetutor.facts import build_facts
from tracetutor.minilang import parse
from tracetutor.questions import QuestionEngine

from corpus import P1

ENGINE = QuestionEngine()


@pytest.fixture(scope="module")
def vbfi():
    facts = build_facts(parse(P1), input_sets=[{"n": 3}])
    question, reference = ENGINE.generate_question(facts, "TRACING", seed=7)
    return facts, question, reference


def test_full_credit_explanation(vbfi):
    _, _, reference = vbfi
    answer = "i is 2 because the loop's last iteration starts when i equals 2"
    verdict = verify_explanation(reference, answer, tier1_correct=True, attempts_used=0)
    assert verdict.similarity == 100
    assert verdict.score == 100
    assert verdict.action == ACTION_PASS
    assert not verdict.missing_atoms


def test_vacuous_explanation_scores_base_only(vbfi):
    _, _, reference = vbfi
    verdict = verify_explanation(reference, "because the code works",
                                 tier1_correct=True, attempts_used=0)
    assert verdict.similarity == 0
    assert verdict.score == 20
    assert verdict.action == ACTION_HINT_BROAD
    assert verdict.matched_atoms == []


def test_score_formula_spot_values():
    assert score_for(50, True) == 60
    assert score_for(0, True) == 20
    assert score_for(100, True) == 100
    assert score_for(100, False) == 0


def test_score_formula_exhaustive():
    previous = 0
    for s in range(101):
        score = score_for(s, True)
        assert score == round(20 + 0.8 * s)
        assert 20 <= score <= 100
        assert score >= previous
        previous = score
        assert score_for(s, False) == 0


def test_empty_answer_rejected(vbfi):
    _, _, reference = vbfi
    with pytest.raises(EmptyAnswer):
        verify_explanation(reference, "   ", tier1_correct=True, attempts_used=0)


def test_wrong_tier1_starts_broad_and_cannot_pass(vbfi):
    _, _, reference = vbfi
    perfect = "i is 2 because the loop's last iteration starts when i equals 2"
    verdict = verify_explanation(reference, perfect, tier1_correct=False, attempts_used=0)
    assert verdict.score == 0
    assert verdict.action == ACTION_HINT_BROAD
    verdict = verify_explanation(reference, perfect, tier1_correct=False, attempts_used=2)
    assert verdict.action == ACTION_FAIL


@settings(max_examples=400, deadline=None)
@given(similarity=st.integers(0, 100), tier1=st.booleans(), attempts=st.integers(0, 5))
def test_action_is_deterministic_threshold_function(similarity, tier1, attempts):
    action = action_for(similarity, tier1, attempts)
    assert action == action_for(similarity, tier1, attempts)
    if tier1 and similarity >= 75:
        assert action == ACTION_PASS
    elif attempts + 1 >= 3:
        assert action == ACTION_FAIL
    elif attempts == 0:
        if tier1 and similarity >= 40:
            assert action == ACTION_HINT_FOCUSED
        else:
            assert action == ACTION_HINT_BROAD
    else:
        assert action == ACTION_FOLLOW_UP


def test_guardrail_solution_request():
    ruling = guard_turn("just give me the code please", {"i", "s", "loop"},
                        question_id="q1")
    assert ruling.classification == "SOLUTION_REQUEST"
    assert ruling.redirect_target == "q1"
    reply = render_guard_reply(ruling)
    assert reply
    assert not any(ch.isdigit() for ch in reply)


def test_guardrail_off_topic():
    ruling = guard_turn("what's the weather", {"i", "s", "n", "loop", "iteration"})
    assert ruling.classification == "OFF_TOPIC"
    assert render_guard_reply(ruling)


def test_guardrail_on_topic_by_overlap():
    ruling = guard_turn("does the loop run 3 times?", {"i", "s", "n", "loop"})
    assert ruling.classification == "ON_TOPIC"


def test_guardrail_numeric_answers_stay_on_topic():
    ruling = guard_turn("2", {"i", "s", "n", "loop"})
    assert ruling.classification == "ON_TOPIC"


def test_guardrail_contraction_does_not_collide_with_identifiers():
    # "what's" must not leak a bare "s" token that matches variable s
    ruling = guard_turn("what's happening outside today", {"s"})
    assert ruling.classification == "OFF_TOPIC"


def test_broad_hint_names_construct_without_digits(vbfi):
    facts, _, _ = vbfi
    question, reference = ENGINE.generate_question(
        facts, "LOOPS", seed=1,
        history=["LOOP-INIT", "LOOP-COND", "LOOP-UPDATE", "LOOP-TERM"])
    assert question.template_id == "ITER-COUNT"
    hint = render_hint(reference, "BROAD")
    assert "loop" in hint.lower()
    assert not any(ch.isdigit() for ch in hint)


def test_focused_hint_names_location_never_value(vbfi):
    _, question, reference = vbfi
    missing = [i for i, a in enumerate(reference.atoms) if a.kind == "NUMERIC"]
    hint = render_hint(reference, "FOCUSED", missing_atoms=missing)
    assert "i" in hint.split() or " i " in hint or "of i" in hint
    assert "final iteration" in hint
    import re
    assert "2" not in re.findall(r"-?\d+", hint)


def test_prompt_context_instructor_contains_fact(vbfi):
    facts, question, _ = vbfi
    rendered = build_prompt_context("INSTRUCTOR", facts, [], question)
    assert "VAR_BEFORE_FINAL_ITER" in rendered
    assert "{facts}" not in rendered


def test_prompt_context_verifier_keeps_answer_slot(vbfi):
    facts, _, reference = vbfi
    rendered = build_prompt_context("VERIFIER", facts,
                                    [{"speaker": "STUDENT", "text": "hello"}], reference)
    assert reference.canonical_explanation in rendered
    assert "{answer}" in rendered
    assert "STUDENT: hello" in rendered


def test_prompt_context_missing_placeholder(vbfi):
    facts, question, _ = vbfi
    with pytest.raises(MissingPlaceholder):
        build_prompt_context("INSTRUCTOR", facts, [], question,
                             template="no slots at all {history} {target}")


class _Responder(BaseHTTPRequestHandler):
    payload: bytes = b"{}"
    status: int = 200

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        self.rfile.read(length)
        self.send_response(self.status)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(self.payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def mock_backend():
    server = HTTPServer(("127.0.0.1", 0), _Responder)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server, f"http://127.0.0.1:{server.server_port}/"
    server.shutdown()


def test_external_backend_round_trip(mock_backend, vbfi):
    server, url = mock_backend
    _Responder.payload = json.dumps({"text": json.dumps({"similarity": 50})}).encode()
    descriptor = BackendDescriptor(kind="EXTERNAL", endpoint=url)
    facts, _, reference = vbfi
    similarity = external_similarity(descriptor, reference, "whatever", facts, [])
    assert similarity == 50


def test_external_backend_transport_error(vbfi):
    descriptor = BackendDescriptor(kind="EXTERNAL", endpoint="http://127.0.0.1:9/")
    with pytest.raises(BackendError) as exc:
        call_external_backend(descriptor, "prompt", timeout=0.5)
    assert exc.value.kind == "transport"


def test_external_backend_malformed_response(mock_backend):
    server, url = mock_backend
    _Responder.payload = b'{"nope": 1}'
    descriptor = BackendDescriptor(kind="EXTERNAL", endpoint=url)
    with pytest.raises(BackendError) as exc:
        call_external_backend(descriptor, "prompt")
    assert exc.value.kind == "malformed-response"


def test_external_descriptor_requires_endpoint():
    with pytest.raises(ValueError):
        BackendDescriptor(kind="EXTERNAL")


def test_guardrail_config_loads():
    config = load_guardrail_config()
    assert "give me the code" in config["solution_request_phrases"]
    assert set(config["replies"]) >= {"solution_request", "off_topic", "on_topic"}
