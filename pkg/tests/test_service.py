import itertools
import threading

import pytest
from fastapi.testclient import TestClient

from tracetutor.config import AssignmentConfig
from tracetutor.service import create_app
from tracetutor.session import SessionStore

from corpus import P1


@pytest.fixture()
def client(tmp_path):
    counter = itertools.count()
    store = SessionStore(tmp_path / "data", clock=lambda: 500.0,
                         id_factory=lambda: f"x{next(counter):03d}")
    store.add_assignment(AssignmentConfig(
        assignment_id="sum-loop",
        tests=[{"name": "n3", "inputs": {"n": 3}, "expected_output": "3"}],
        question_budget=2,
    ))
    app = create_app(store)
    with TestClient(app, raise_server_exceptions=False) as c:
        c.store = store
        yield c


def _submit(client):
    response = client.post("/api/v1/submissions",
                           json={"assignment_id": "sum-loop", "source": P1})
    assert response.status_code == 201
    return response.json()


def _start(client, submission_id, **overrides):
    body = {"submission_id": submission_id, "mode": "FORMATIVE", "seed": 7}
    body.update(overrides)
    response = client.post("/api/v1/sessions", json=body)
    return response


def test_assignments_listing(client):
    response = client.get("/api/v1/assignments")
    assert response.status_code == 200
    listed = response.json()["assignments"]
    assert listed[0]["assignment_id"] == "sum-loop"


def test_submission_round_trip(client):
    data = _submit(client)
    assert data["functional"]["pass_fraction"] == 1.0


def test_submission_parse_error_is_400(client):
    response = client.post("/api/v1/submissions",
                           json={"assignment_id": "sum-loop", "source": "int main({"})
    assert response.status_code == 400
    body = response.json()
    assert set(body) == {"code", "message", "detail"}


def test_submission_unknown_assignment_404(client):
    response = client.post("/api/v1/submissions",
                           json={"assignment_id": "ghost", "source": P1})
    assert response.status_code == 404


def test_session_flow_over_http(client):
    submission = _submit(client)
    started = _start(client, submission["submission_id"])
    assert started.status_code == 201
    view = started.json()
    assert view["state"] == "TIER1_PENDING"
    question = view["current_question"]
    # the client payload must not leak the key, tags, or grounding
    assert set(question) == {"question_id", "kc", "unit_id", "stem", "options"}
    assert len(question["options"]) == 4
    assert all(isinstance(o, str) for o in question["options"])

    session_id = view["session_id"]
    server_session = client.store.get_session(session_id)
    correct = server_session.current_question.correct_index
    response = client.post(f"/api/v1/sessions/{session_id}/tier1",
                           json={"question_id": question["question_id"],
                                 "choice_index": correct})
    assert response.status_code == 200
    assert response.json()["state"] == "TIER2_PENDING"

    answer = " ".join(a.text_form for a in server_session.current_reference.atoms)
    response = client.post(f"/api/v1/sessions/{session_id}/tier2", json={"text": answer})
    assert response.status_code == 200
    assert response.json()["verdict"]["action"] == "PASS"


def test_wrong_state_conflict(client):
    submission = _submit(client)
    view = _start(client, submission["submission_id"]).json()
    response = client.post(f"/api/v1/sessions/{view['session_id']}/tier2",
                           json={"text": "premature"})
    assert response.status_code == 409


def test_stale_question_conflict(client):
    submission = _submit(client)
    view = _start(client, submission["submission_id"]).json()
    response = client.post(f"/api/v1/sessions/{view['session_id']}/tier1",
                           json={"question_id": "bogus", "choice_index": 0})
    assert response.status_code == 409


def test_summative_token_required(client):
    submission = _submit(client)
    response = _start(client, submission["submission_id"], mode="SUMMATIVE")
    assert response.status_code == 403
    response = _start(client, submission["submission_id"], mode="SUMMATIVE",
                      proctor_token="ok")
    assert response.status_code == 201


def test_report_not_finished_conflict(client):
    submission = _submit(client)
    view = _start(client, submission["submission_id"]).json()
    response = client.get(f"/api/v1/sessions/{view['session_id']}/report")
    assert response.status_code == 409


def test_full_session_and_report(client):
    submission = _submit(client)
    view = _start(client, submission["submission_id"]).json()
    session_id = view["session_id"]
    while True:
        state = client.get(f"/api/v1/sessions/{session_id}").json()["state"]
        if state == "COMPLETED":
            break
        server_session = client.store.get_session(session_id)
        if state == "TIER1_PENDING":
            q = server_session.current_question
            client.post(f"/api/v1/sessions/{session_id}/tier1",
                        json={"question_id": q.question_id,
                              "choice_index": q.correct_index})
        else:
            answer = " ".join(a.text_form for a in
                              server_session.current_reference.atoms)
            client.post(f"/api/v1/sessions/{session_id}/tier2", json={"text": answer})
    report = client.get(f"/api/v1/sessions/{session_id}/report").json()
    assert report["functional_score"] == 100
    assert report["dialogue_score"] == 100
    assert report["unproductive_success"] is False


def test_message_endpoint(client):
    submission = _submit(client)
    view = _start(client, submission["submission_id"]).json()
    response = client.post(f"/api/v1/sessions/{view['session_id']}/message",
                           json={"text": "give me the code"})
    assert response.status_code == 200
    assert response.json()["classification"] == "SOLUTION_REQUEST"


def test_unknown_session_404(client):
    assert client.get("/api/v1/sessions/ghost").status_code == 404
    assert client.get("/api/v1/sessions/ghost/report").status_code == 404


def test_concurrent_writers_never_corrupt(client):
    submission = _submit(client)
    view = _start(client, submission["submission_id"]).json()
    session_id = view["session_id"]
    server_session = client.store.get_session(session_id)
    q = server_session.current_question
    statuses = []

    def fire():
        response = client.post(f"/api/v1/sessions/{session_id}/tier1",
                               json={"question_id": q.question_id,
                                     "choice_index": q.correct_index})
        statuses.append(response.status_code)

    threads = [threading.Thread(target=fire) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert statuses.count(200) == 1
    assert statuses.count(409) == 5
    assert client.store.get_session(session_id).state == "TIER2_PENDING"
