"""Question-side data model: selection items, reference reasons, step chains."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

TAG_NONE = "NONE"
TAG_OFF_BY_ONE = "OFF_BY_ONE"
TAG_WRONG_BRANCH = "WRONG_BRANCH"
TAG_INIT_VALUE = "INIT_VALUE_CONFUSION"
TAG_ITER_COUNT = "ITER_COUNT_CONFUSION"
TAG_BOUNDS = "BOUNDS_CONFUSION"

MISCONCEPTION_TAGS = (
    TAG_OFF_BY_ONE, TAG_WRONG_BRANCH, TAG_INIT_VALUE, TAG_ITER_COUNT, TAG_BOUNDS,
)

ATOM_NUMERIC = "NUMERIC"
ATOM_IDENTIFIER = "IDENTIFIER"
ATOM_CONCEPT = "CONCEPT"


@dataclass
class Choice:
    text: str
    misconception_tag: str = TAG_NONE

    def to_dict(self) -> dict[str, Any]:
        return {"text": self.text, "misconception_tag": self.misconception_tag}


@dataclass
class Question:
    question_id: str
    template_id: str
    unit_id: str
    kc: str
    stem: str
    options: list[Choice]
    correct_index: int
    grounding: list[str]                      # fact ids the stem/answer rest on
    seed: int
    input_set_id: Optional[str] = None
    grounding_query: Optional[dict[str, Any]] = None  # {kind, params}; None for static items

    @property
    def correct_choice(self) -> Choice:
        return self.options[self.correct_index]

    def to_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "template_id": self.template_id,
            "unit_id": self.unit_id,
            "kc": self.kc,
            "stem": self.stem,
            "options": [c.to_dict() for c in self.options],
            "correct_index": self.correct_index,
            "grounding": self.grounding,
            "seed": self.seed,
            "input_set_id": self.input_set_id,
            "grounding_query": self.grounding_query,
        }

    def to_client_dict(self) -> dict[str, Any]:
        """Payload safe to show a student: no answer key, tags, or grounding."""
        return {
            "question_id": self.question_id,
            "kc": self.kc,
            "unit_id": self.unit_id,
            "stem": self.stem,
            "options": [c.text for c in self.options],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Question":
        options = [Choice(**c) for c in data["options"]]
        return cls(
            question_id=data["question_id"], template_id=data["template_id"],
            unit_id=data["unit_id"], kc=data["kc"], stem=data["stem"],
            options=options, correct_index=data["correct_index"],
            grounding=list(data["grounding"]), seed=data["seed"],
            input_set_id=data.get("input_set_id"),
            grounding_query=data.get("grounding_query"),
        )


@dataclass
class FactAtom:
    text_form: str
    kind: str            # NUMERIC | IDENTIFIER | CONCEPT
    weight: float
    synonyms: list[str] = field(default_factory=list)
    about: str = ""      # value-free phrase naming what the atom refers to

    def to_dict(self) -> dict[str, Any]:
        return {"text_form": self.text_form, "kind": self.kind, "weight": self.weight,
                "synonyms": self.synonyms, "about": self.about}


@dataclass
class ReferenceReason:
    question_id: str
    atoms: list[FactAtom]
    canonical_explanation: str
    broad_hint: str

    def to_dict(self) -> dict[str, Any]:
        return {"question_id": self.question_id,
                "atoms": [a.to_dict() for a in self.atoms],
                "canonical_explanation": self.canonical_explanation,
                "broad_hint": self.broad_hint}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ReferenceReason":
        return cls(question_id=data["question_id"],
                   atoms=[FactAtom(**a) for a in data["atoms"]],
                   canonical_explanation=data["canonical_explanation"],
                   broad_hint=data["broad_hint"])


@dataclass
class StepChain:
    chain_id: str
    steps: list[tuple[Question, ReferenceReason]]

    def __len__(self) -> int:
        return len(self.steps)
