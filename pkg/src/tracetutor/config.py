"""Per-assignment configuration: tests, sampling, weights, thresholds, budgets."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional


@dataclass
class AssignmentConfig:
    assignment_id: str
    tests: list[dict[str, Any]]
    input_domain: tuple[int, int] = (-8, 8)
    input_sets: int = 3
    seed: int = 0
    step_budget: int = 10_000
    question_budget: int = 5
    max_attempts: int = 3
    weight_functional: float = 0.5
    weight_dialogue: float = 0.5
    pass_threshold: int = 75
    focused_threshold: int = 40
    functional_high: int = 80
    dialogue_low: int = 50
    summative_time_limit: float = 1800.0
    guardrail_phrases_path: Optional[str] = None
    template_library_path: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "assignment_id": self.assignment_id,
            "tests": self.tests,
            "input_domain": list(self.input_domain),
            "input_sets": self.input_sets,
            "seed": self.seed,
            "step_budget": self.step_budget,
            "question_budget": self.question_budget,
            "max_attempts": self.max_attempts,
            "weights": {"functional": self.weight_functional, "dialogue": self.weight_dialogue},
            "thresholds": {"pass": self.pass_threshold, "focused": self.focused_threshold,
                           "functional_high": self.functional_high,
                           "dialogue_low": self.dialogue_low},
            "summative_time_limit": self.summative_time_limit,
            "guardrail_phrases_path": self.guardrail_phrases_path,
            "template_library_path": self.template_library_path,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AssignmentConfig":
        weights = data.get("weights", {})
        thresholds = data.get("thresholds", {})
        return cls(
            assignment_id=data["assignment_id"],
            tests=list(data["tests"]),
            input_domain=tuple(data.get("input_domain", (-8, 8))),
            input_sets=data.get("input_sets", 3),
            seed=data.get("seed", 0),
            step_budget=data.get("step_budget", 10_000),
            question_budget=data.get("question_budget", 5),
            max_attempts=data.get("max_attempts", 3),
            weight_functional=weights.get("functional", 0.5),
            weight_dialogue=weights.get("dialogue", 0.5),
            pass_threshold=thresholds.get("pass", 75),
            focused_threshold=thresholds.get("focused", 40),
            functional_high=thresholds.get("functional_high", 80),
            dialogue_low=thresholds.get("dialogue_low", 50),
            summative_time_limit=data.get("summative_time_limit", 1800.0),
            guardrail_phrases_path=data.get("guardrail_phrases_path"),
            template_library_path=data.get("template_library_path"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "AssignmentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
