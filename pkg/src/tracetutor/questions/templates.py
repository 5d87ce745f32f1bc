"""Question template library: JSON documents instructors can extend.

Each template file carries the stem pattern, the grounding query kind, the
distractor perturbation rules, knowledge-component tags, concept synonym
groups, and the hint/explanation wording. Validation happens at load time
so a misconfigured template fails fast rather than mid-session.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

_DATA_DIR = Path(__file__).parent / "data"

ANSWER_MODES = {"numeric", "expression", "choice_set", "output"}
FOLLOWUP_MODES = {"reground", "step"}
KNOWN_RULES = {"plus_one", "minus_one", "other_iteration", "init_value", "boundary"}


class TemplateConfigError(Exception):
    pass


@dataclass
class Concept:
    term: str
    synonyms: list[str]


@dataclass
class QuestionTemplate:
    template_id: str
    kind: str                 # static | dynamic
    answer_mode: str
    kc_tags: list[str]
    pattern: str
    grounding_query: Optional[str]
    perturbation_rules: list[str]
    followup: str
    concepts: list[Concept]
    broad_hint: str
    about_value: str
    explanation: str
    pattern_at_start: Optional[str] = None
    choice_set: list[dict[str, str]] = field(default_factory=list)

    @property
    def is_static(self) -> bool:
        return self.kind == "static"


def load_templates(directory: str | Path | None = None) -> dict[str, QuestionTemplate]:
    """Load and validate every *.json template in the directory."""
    path = Path(directory) if directory else _DATA_DIR
    templates: dict[str, QuestionTemplate] = {}
    for file in sorted(path.glob("*.json")):
        data = json.loads(file.read_text())
        template = _parse_template(data, file.name)
        if template.template_id in templates:
            raise TemplateConfigError(f"duplicate template_id {template.template_id}")
        templates[template.template_id] = template
    if not templates:
        raise TemplateConfigError(f"no templates found in {path}")
    return templates


def _parse_template(data: dict[str, Any], origin: str) -> QuestionTemplate:
    def need(key: str) -> Any:
        if key not in data:
            raise TemplateConfigError(f"{origin}: missing {key!r}")
        return data[key]

    template_id = need("template_id")
    answer_mode = need("answer_mode")
    if answer_mode not in ANSWER_MODES:
        raise TemplateConfigError(f"{origin}: unknown answer_mode {answer_mode!r}")
    kind = need("kind")
    if kind not in ("static", "dynamic"):
        raise TemplateConfigError(f"{origin}: kind must be static or dynamic")
    followup = need("followup")
    if followup not in FOLLOWUP_MODES:
        raise TemplateConfigError(f"{origin}: unknown followup mode {followup!r}")
    rules = list(data.get("perturbation_rules", []))
    unknown = set(rules) - KNOWN_RULES
    if unknown:
        raise TemplateConfigError(f"{origin}: unknown perturbation rules {sorted(unknown)}")
    if answer_mode == "numeric" and not rules:
        raise TemplateConfigError(f"{origin}: numeric templates need perturbation rules")
    if answer_mode == "choice_set":
        choice_set = data.get("choice_set", [])
        if len(choice_set) != 4:
            raise TemplateConfigError(f"{origin}: choice_set templates need exactly 4 choices")

    concepts = [Concept(term=c["term"], synonyms=list(c["synonyms"]))
                for c in need("concepts")]
    if not concepts or any(not c.synonyms for c in concepts):
        raise TemplateConfigError(f"{origin}: at least one concept with synonyms is required")

    broad_hint = need("broad_hint")
    about_value = need("about_value")
    if any(ch.isdigit() for ch in broad_hint) or any(ch.isdigit() for ch in about_value):
        raise TemplateConfigError(f"{origin}: hints must not contain digits")

    return QuestionTemplate(
        template_id=template_id,
        kind=kind,
        answer_mode=answer_mode,
        kc_tags=list(need("kc_tags")),
        pattern=need("pattern"),
        grounding_query=data.get("grounding_query"),
        perturbation_rules=rules,
        followup=followup,
        concepts=concepts,
        broad_hint=broad_hint,
        about_value=about_value,
        explanation=need("explanation"),
        pattern_at_start=data.get("pattern_at_start"),
        choice_set=list(data.get("choice_set", [])),
    )
