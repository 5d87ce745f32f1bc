"""Command line front end: analyze, quiz, grade, serve, replay."""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from .assessment import MODE_FORMATIVE, MODE_SUMMATIVE
from .config import AssignmentConfig
from .dialogue import BackendDescriptor
from .facts import build_facts
from .minilang import MiniLangError, parse
from .session import SessionStore, replay_session

ENV_DATA_DIR = "TRACETUTOR_DATA_DIR"
ENV_PORT = "TRACETUTOR_PORT"
ENV_BACKEND_URL = "TRACETUTOR_BACKEND_URL"
ENV_BACKEND_TOKEN = "TRACETUTOR_BACKEND_TOKEN"
ENV_MODE = "TRACETUTOR_MODE"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="tracetutor",
                                     description="trace-grounded code-understanding assessment")
    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser("analyze", help="print facts.json for a submission")
    p_analyze.add_argument("file")
    p_analyze.add_argument("--seed", type=int, default=0)
    p_analyze.add_argument("--config", help="assignment config JSON")

    p_quiz = sub.add_parser("quiz", help="interactive terminal session")
    p_quiz.add_argument("file")
    p_quiz.add_argument("--seed", type=int, default=0)
    p_quiz.add_argument("--budget", type=int, default=5)
    p_quiz.add_argument("--mode", default=os.environ.get(ENV_MODE, MODE_FORMATIVE),
                        choices=[MODE_FORMATIVE, MODE_SUMMATIVE])
    p_quiz.add_argument("--proctor-token")
    p_quiz.add_argument("--config", help="assignment config JSON with real tests")
    p_quiz.add_argument("--data-dir", default=os.environ.get(ENV_DATA_DIR))

    p_grade = sub.add_parser("grade", help="print report.json for a finished session")
    p_grade.add_argument("session_dir")
    p_grade.add_argument("--data-dir")

    p_serve = sub.add_parser("serve", help="run the HTTP API")
    p_serve.add_argument("--port", type=int,
                         default=int(os.environ.get(ENV_PORT, "8000")))
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--data-dir", default=os.environ.get(ENV_DATA_DIR, "./tracetutor-data"))
    p_serve.add_argument("--static-dir", help="directory with the browser client build")

    p_replay = sub.add_parser("replay", help="re-drive a session and check determinism")
    p_replay.add_argument("session_dir")
    p_replay.add_argument("--data-dir")

    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except MiniLangError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def cmd_analyze(args) -> int:
    source = Path(args.file).read_text()
    program = parse(source)
    if args.config:
        config = AssignmentConfig.load(args.config)
        facts = build_facts(program, seed=config.seed, input_count=config.input_sets,
                            domain=config.input_domain, budget=config.step_budget)
    else:
        facts = build_facts(program, seed=args.seed)
    print(facts.to_json())
    return 0


def _backend_from_env() -> BackendDescriptor:
    url = os.environ.get(ENV_BACKEND_URL)
    if url:
        return BackendDescriptor(kind="EXTERNAL", endpoint=url,
                                 credential=os.environ.get(ENV_BACKEND_TOKEN))
    return BackendDescriptor()


def cmd_quiz(args) -> int:
    source = Path(args.file).read_text()
    data_dir = args.data_dir or tempfile.mkdtemp(prefix="tracetutor-")
    store = SessionStore(data_dir, backend=_backend_from_env())
    if args.config:
        config = AssignmentConfig.load(args.config)
    else:
        config = _self_checking_config(source, seed=args.seed)
    store.add_assignment(config)
    submission = store.create_submission(config.assignment_id, source)
    session = store.start_session(submission.submission_id, args.mode, args.seed,
                                  question_budget=args.budget,
                                  proctor_token=args.proctor_token)
    sid = session.session_id
    print(f"session {sid} | mode {args.mode} | data {data_dir}")
    print(f"functional tests passed: {submission.functional.pass_fraction:.0%}")

    while True:
        session = store.get_session(sid)
        if session.state in ("COMPLETED", "ABORTED"):
            break
        if session.state == "TIER1_PENDING":
            question = session.current_question
            print(f"\n[{question.kc}] {question.stem}")
            for index, option in enumerate(question.options):
                print(f"  {index + 1}) {option.text}")
            choice = _read_line("choose 1-4> ")
            if choice is None:
                store.abort_session(sid)
                break
            try:
                picked = int(choice.strip()) - 1
            except ValueError:
                print("please enter a number 1-4")
                continue
            if not 0 <= picked <= 3:
                print("please enter a number 1-4")
                continue
            store.submit_tier1(sid, question.question_id, picked)
            continue
        prompt = "explain why> " if session.state == "TIER2_PENDING" else "try again> "
        text = _read_line(prompt)
        if text is None:
            store.abort_session(sid)
            break
        if not text.strip():
            continue
        result = store.submit_tier2(sid, text)
        if "reply" in result:
            print(result["reply"])
            continue
        verdict = result["verdict"]
        if args.mode == MODE_FORMATIVE:
            print(f"similarity {verdict['similarity']} -> score {verdict['score']}")
        if result.get("hint"):
            print(f"hint: {result['hint']}")

    report = store.get_report(sid)
    print("\n" + report.to_json())
    print(f"\nsession saved under {store._session_dir(sid)}")
    return 0


def _read_line(prompt: str) -> str | None:
    try:
        return input(prompt)
    except EOFError:
        return None


def _self_checking_config(source: str, seed: int) -> AssignmentConfig:
    """Ad-hoc assignment for practice runs: a smoke test built from the
    program's own first sampled run, so grading weight falls on dialogue."""
    from .facts import sample_inputs
    from .minilang import execute

    program = parse(source)
    inputs = sample_inputs(program, seed=seed, count=1)[0]
    trace = execute(program, inputs)
    expected = trace.output_text() if trace.termination == "NORMAL" else ""
    return AssignmentConfig(
        assignment_id="practice",
        tests=[{"name": "self", "inputs": inputs, "expected_output": expected}],
        seed=seed,
    )


def _store_for_session_dir(args) -> tuple[SessionStore, str]:
    session_dir = Path(args.session_dir)
    data_dir = Path(args.data_dir) if args.data_dir else session_dir.parent.parent
    return SessionStore(data_dir), session_dir.name


def cmd_grade(args) -> int:
    store, session_id = _store_for_session_dir(args)
    report = store.get_report(session_id)
    print(report.to_json())
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    store = SessionStore(args.data_dir, backend=_backend_from_env())
    app = create_app(store, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_replay(args) -> int:
    session_dir = Path(args.session_dir)
    data_dir = Path(args.data_dir) if args.data_dir else session_dir.parent.parent
    outcome = replay_session(session_dir, data_dir)
    print(json.dumps(outcome, indent=2))
    return 0 if outcome["ok"] else 1


_COMMANDS = {
    "analyze": cmd_analyze,
    "quiz": cmd_quiz,
    "grade": cmd_grade,
    "serve": cmd_serve,
    "replay": cmd_replay,
}


if __name__ == "__main__":
    sys.exit(main())
