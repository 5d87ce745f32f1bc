"""Dual-agent conversational core.

The Verifier grades free-text explanations against a reference reason by
weighted fact-atom coverage; guardrails classify every free turn before it
reaches grading; hints are tiered and never reveal values; an external
model backend can replace the rule-based similarity through the same
verdict contract, with automatic fallback when it misbehaves.
"""
from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from .questions.model import ATOM_CONCEPT, ATOM_NUMERIC, FactAtom, ReferenceReason

_PROMPT_DIR = Path(__file__).parent / "prompts"

PASS_THRESHOLD = 75
FOCUSED_THRESHOLD = 40
DEFAULT_MAX_ATTEMPTS = 3

ACTION_PASS = "PASS"
ACTION_HINT_BROAD = "HINT_BROAD"
ACTION_HINT_FOCUSED = "HINT_FOCUSED"
ACTION_FOLLOW_UP = "FOLLOW_UP"
ACTION_FAIL = "FAIL"

HINT_BROAD = "BROAD"
HINT_FOCUSED = "FOCUSED"

RULE_BASED = "RULE_BASED"
EXTERNAL = "EXTERNAL"

ON_TOPIC = "ON_TOPIC"
SOLUTION_REQUEST = "SOLUTION_REQUEST"
OFF_TOPIC = "OFF_TOPIC"


class EmptyAnswer(Exception):
    pass


class MissingPlaceholder(Exception):
    pass


class BackendError(Exception):
    def __init__(self, kind: str, detail: str = ""):
        super().__init__(f"{kind}: {detail}" if detail else kind)
        self.kind = kind  # timeout | transport | malformed-response


@dataclass
class Verdict:
    similarity: int
    score: int
    action: str
    matched_atoms: list[int]
    missing_atoms: list[int]

    def to_dict(self) -> dict[str, Any]:
        return {"similarity": self.similarity, "score": self.score, "action": self.action,
                "matched_atoms": self.matched_atoms, "missing_atoms": self.missing_atoms}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Verdict":
        return cls(**data)


@dataclass
class GuardrailRuling:
    classification: str        # ON_TOPIC | SOLUTION_REQUEST | OFF_TOPIC
    reply_template_id: str
    redirect_target: Optional[str] = None  # current question_id

    @property
    def is_redirect(self) -> bool:
        return self.classification in (SOLUTION_REQUEST, OFF_TOPIC)


@dataclass
class BackendDescriptor:
    kind: str = RULE_BASED
    endpoint: Optional[str] = None
    model_name: Optional[str] = None
    prompt_templates: dict[str, str] = field(default_factory=dict)
    credential: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind == EXTERNAL and not self.endpoint:
            raise ValueError("EXTERNAL backend requires an endpoint")

    def to_dict(self) -> dict[str, Any]:
        # the credential comes from the environment and is never persisted
        return {"kind": self.kind, "endpoint": self.endpoint, "model_name": self.model_name}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BackendDescriptor":
        return cls(kind=data.get("kind", RULE_BASED), endpoint=data.get("endpoint"),
                   model_name=data.get("model_name"))


# tokenization -------------------------------------------------------------

_TOKEN_RE = re.compile(r"[a-z]+(?:'[a-z]+)?|-?\d+")


def normalize_tokens(text: str) -> set[str]:
    """Case-folded, punctuation-stripped tokens; contractions keep their head
    word so "what's" never yields a stray identifier-like "s"."""
    tokens: set[str] = set()
    for raw in _TOKEN_RE.findall(text.lower()):
        tokens.add(raw.split("'")[0] if "'" in raw else raw)
    return tokens


def _atom_matches(atom: FactAtom, tokens: set[str]) -> bool:
    if atom.kind == ATOM_NUMERIC:
        return atom.text_form in tokens  # numbers must appear as exact standalone tokens
    candidates = [atom.text_form, *atom.synonyms]
    for candidate in candidates:
        words = normalize_tokens(candidate)
        if words and words <= tokens:
            return True
    return False


# verifier -----------------------------------------------------------------

def score_for(similarity: int, tier1_correct: bool) -> int:
    """Two-tier score: 20-point base for a correct selection plus 0.8 per
    similarity point; a wrong selection scores 0 outright."""
    if not tier1_correct:
        return 0
    return 20 + (8 * similarity + 5) // 10


def action_for(similarity: int, tier1_correct: bool, attempts_used: int,
               max_attempts: int = DEFAULT_MAX_ATTEMPTS,
               pass_threshold: int = PASS_THRESHOLD,
               focused_threshold: int = FOCUSED_THRESHOLD) -> str:
    if tier1_correct and similarity >= pass_threshold:
        return ACTION_PASS
    if attempts_used + 1 >= max_attempts:
        return ACTION_FAIL
    if attempts_used == 0:
        if tier1_correct and similarity >= focused_threshold:
            return ACTION_HINT_FOCUSED
        return ACTION_HINT_BROAD  # a wrong selection starts on the broad path
    return ACTION_FOLLOW_UP


def verify_explanation(reference: ReferenceReason, answer_text: str, tier1_correct: bool,
                       attempts_used: int, max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                       pass_threshold: int = PASS_THRESHOLD,
                       focused_threshold: int = FOCUSED_THRESHOLD) -> Verdict:
    """Rule-based grading: similarity is 100 x the summed weight of matched
    reference atoms, matched on normalized tokens."""
    if not answer_text or not answer_text.strip():
        raise EmptyAnswer("explanation must not be empty")
    if attempts_used < 0:
        raise ValueError("attempts_used must be >= 0")
    tokens = normalize_tokens(answer_text)
    matched: list[int] = []
    missing: list[int] = []
    total = 0.0
    for index, atom in enumerate(reference.atoms):
        if _atom_matches(atom, tokens):
            matched.append(index)
            total += atom.weight
        else:
            missing.append(index)
    similarity = max(0, min(100, round(100 * total)))
    return verdict_from_similarity(similarity, tier1_correct, attempts_used, matched, missing,
                                   max_attempts, pass_threshold, focused_threshold)


def verdict_from_similarity(similarity: int, tier1_correct: bool, attempts_used: int,
                            matched: Optional[list[int]] = None,
                            missing: Optional[list[int]] = None,
                            max_attempts: int = DEFAULT_MAX_ATTEMPTS,
                            pass_threshold: int = PASS_THRESHOLD,
                            focused_threshold: int = FOCUSED_THRESHOLD) -> Verdict:
    return Verdict(
        similarity=similarity,
        score=score_for(similarity, tier1_correct),
        action=action_for(similarity, tier1_correct, attempts_used,
                          max_attempts, pass_threshold, focused_threshold),
        matched_atoms=matched if matched is not None else [],
        missing_atoms=missing if missing is not None else [],
    )


# guardrails ----------------------------------------------------------------

DEFAULT_GUARDRAILS_PATH = _PROMPT_DIR / "guardrails.json"

# function words never treated as topical vocabulary when harvested from
# question stems; program identifiers are always added separately
STEM_STOPWORDS = frozenset("""
a an the and or but of in on at by to for with from into as is are was were
be been being it its this that these those there here what which who whom
whose how when where why does do did done doing can could will would should
shall may might must have has had having not no nor so if then else than
about above after again against all any because before below between both
down during each few further just more most only other out over own same
some such too under until up very while you your yours we our ours they
them their i me my
""".split())


def harvest_vocabulary(*texts: str) -> set[str]:
    """Topical tokens from stems/options: normalized, stopwords removed."""
    tokens: set[str] = set()
    for text in texts:
        tokens |= normalize_tokens(text)
    return tokens - STEM_STOPWORDS


# words a student uses when talking about their program at all; a sincere but
# weak answer must reach the verifier (and earn a hint), not bounce off the
# guardrail the way off-task chatter does
DOMAIN_LEXICON = frozenset("""
code program statement function variable loop loops branch condition array
index value number line print prints printed output return returns runs run
running works working executes execution iteration iterations pass passes
step steps trace count counter result assigns assigned update updates
increment increments bug error crash crashes stops starts begins ends true
false correct wrong equal equals answer
""".split())


def load_guardrail_config(path: str | Path | None = None) -> dict[str, Any]:
    config = json.loads(Path(path or DEFAULT_GUARDRAILS_PATH).read_text())
    for key in ("solution_request_phrases", "replies"):
        if key not in config:
            raise ValueError(f"guardrail config missing {key!r}")
    return config


def guard_turn(turn_text: str, session_vocabulary: set[str],
               question_id: Optional[str] = None,
               config: Optional[dict[str, Any]] = None) -> GuardrailRuling:
    """Classify a free-text turn before it reaches grading.

    Solution requests match a configurable phrase list; turns sharing no
    token with the session vocabulary are off-topic; numeric tokens always
    count as on-topic since trace talk is made of numbers.
    """
    if not turn_text or not turn_text.strip():
        raise EmptyAnswer("turn must not be empty")
    cfg = config or load_guardrail_config()
    lowered = " ".join(turn_text.lower().split())
    for phrase in cfg["solution_request_phrases"]:
        if phrase in lowered:
            return GuardrailRuling(SOLUTION_REQUEST, "solution_request", question_id)
    tokens = normalize_tokens(turn_text)
    has_number = any(re.fullmatch(r"-?\d+", t) for t in tokens)
    if not has_number and not (tokens & session_vocabulary):
        return GuardrailRuling(OFF_TOPIC, "off_topic", question_id)
    return GuardrailRuling(ON_TOPIC, "on_topic", question_id)


def render_guard_reply(ruling: GuardrailRuling, config: Optional[dict[str, Any]] = None) -> str:
    cfg = config or load_guardrail_config()
    return cfg["replies"][ruling.reply_template_id]


# hints ----------------------------------------------------------------------

def render_hint(reference: ReferenceReason, level: str,
                missing_atoms: Optional[Iterable[int]] = None) -> str:
    """BROAD names only the construct; FOCUSED points at the highest-weight
    missing atom's location without ever revealing its value."""
    concept_atoms = [a for a in reference.atoms if a.kind == ATOM_CONCEPT]
    if not concept_atoms:
        raise ValueError("reference has no concept atoms; template validation should prevent this")
    if level == HINT_BROAD:
        return reference.broad_hint
    if level != HINT_FOCUSED:
        raise ValueError(f"unknown hint level {level!r}")
    indices = list(missing_atoms) if missing_atoms is not None else range(len(reference.atoms))
    pool = [reference.atoms[i] for i in indices] or list(reference.atoms)
    target = max(pool, key=lambda a: a.weight)
    about = target.about or concept_atoms[0].about or "that part of the program"
    return f"Look again at {about}, and retrace that part of the run before you answer."


# prompt assembly -------------------------------------------------------------

ROLE_INSTRUCTOR = "INSTRUCTOR"
ROLE_VERIFIER = "VERIFIER"

_REQUIRED_SLOTS = {
    ROLE_INSTRUCTOR: ("{facts}", "{history}", "{target}"),
    ROLE_VERIFIER: ("{facts}", "{history}", "{target}", "{answer}"),
}


def load_prompt_template(role: str, path: str | Path | None = None) -> str:
    if path is not None:
        return Path(path).read_text()
    name = "instructor.txt" if role == ROLE_INSTRUCTOR else "verifier.txt"
    return (_PROMPT_DIR / name).read_text()


def build_prompt_context(role: str, facts: Any, history: Sequence[dict[str, str]],
                         target: Any, template: Optional[str] = None) -> str:
    """Fill {facts}/{history}/{target}; the verifier's {answer} slot stays
    literal for the caller to fill at call time."""
    if role not in _REQUIRED_SLOTS:
        raise ValueError(f"unknown role {role!r}")
    text = template if template is not None else load_prompt_template(role)
    for slot in _REQUIRED_SLOTS[role]:
        if slot not in text:
            raise MissingPlaceholder(f"{role} template lacks {slot}")
    facts_text = _serialize_facts(facts)
    history_text = "\n".join(f"{turn.get('speaker', '?')}: {turn.get('text', '')}"
                             for turn in history) or "(no turns yet)"
    target_text = json.dumps(target.to_dict(), indent=2) if hasattr(target, "to_dict") else str(target)
    return (text.replace("{facts}", facts_text)
                .replace("{history}", history_text)
                .replace("{target}", target_text))


def _serialize_facts(facts: Any) -> str:
    if hasattr(facts, "static_facts"):
        payload = {
            "static_facts": [f.to_dict() for f in facts.static_facts],
            "dynamic_facts": [f.to_dict() for f in facts.dynamic_facts],
        }
        return json.dumps(payload, indent=2)
    if hasattr(facts, "to_dict"):
        return json.dumps(facts.to_dict(), indent=2)
    return str(facts)


# external backend -------------------------------------------------------------

BACKEND_TIMEOUT_SECONDS = 5.0
BACKEND_RETRIES_ON_TIMEOUT = 1


def call_external_backend(descriptor: BackendDescriptor, prompt: str,
                          timeout: float = BACKEND_TIMEOUT_SECONDS) -> str:
    """Single JSON request/response exchange: {"prompt": ...} -> {"text": ...}.

    One retry on timeout, then BackendError; callers switch the session to
    the rule-based backend on any failure.
    """
    if descriptor.kind != EXTERNAL:
        raise ValueError("call_external_backend requires an EXTERNAL descriptor")
    body = json.dumps({"prompt": prompt, "model": descriptor.model_name}).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    if descriptor.credential:
        headers["Authorization"] = f"Bearer {descriptor.credential}"
    attempts = 1 + BACKEND_RETRIES_ON_TIMEOUT
    last_timeout: Optional[Exception] = None
    for _ in range(attempts):
        request = urllib.request.Request(descriptor.endpoint, data=body, headers=headers)
        try:
            with urllib.request.urlopen(request, timeout=timeout) as response:
                raw = response.read().decode("utf-8")
            break
        except TimeoutError as exc:
            last_timeout = exc
            continue
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, TimeoutError):
                last_timeout = exc
                continue
            raise BackendError("transport", str(exc)) from exc
        except OSError as exc:
            raise BackendError("transport", str(exc)) from exc
    else:
        raise BackendError("timeout", str(last_timeout))
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BackendError("malformed-response", "response is not JSON") from exc
    if not isinstance(data, dict) or "text" not in data:
        raise BackendError("malformed-response", "response lacks a text field")
    return data["text"]


def external_similarity(descriptor: BackendDescriptor, reference: ReferenceReason,
                        answer_text: str, facts: Any,
                        history: Sequence[dict[str, str]]) -> int:
    """Ask the external verifier for a similarity judgment; raises
    BackendError when the endpoint or its reply is unusable."""
    template = descriptor.prompt_templates.get("verifier")
    prompt = build_prompt_context(ROLE_VERIFIER, facts, history, reference, template)
    prompt = prompt.replace("{answer}", answer_text)
    text = call_external_backend(descriptor, prompt)
    try:
        data = json.loads(text)
        similarity = int(data["similarity"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise BackendError("malformed-response", "no similarity field") from exc
    if not 0 <= similarity <= 100:
        raise BackendError("malformed-response", "similarity out of range")
    return similarity
