"""Grounded question generation.

Every item is assembled from deterministic facts: the stem renders real
identifiers and lines, the correct option is computed by running the
template's grounding query against a recorded trace, and distractors come
from misconception-tagged perturbation rules. Identical (facts, kc, seed)
always produce the identical item.
"""
from __future__ import annotations

import random
import re
import zlib
from typing import Any, Iterable, Optional, Sequence

from ..facts import CodeFacts, LogicUnit
from ..minilang.ast import Node, NodeKind, Program, render_expr
from ..minilang.interp import TERM_NORMAL, InputMap
from ..minilang.queries import NOT_APPLICABLE, TraceQuery, query_trace
from .model import (
    ATOM_CONCEPT,
    ATOM_IDENTIFIER,
    ATOM_NUMERIC,
    TAG_BOUNDS,
    TAG_INIT_VALUE,
    TAG_ITER_COUNT,
    TAG_NONE,
    TAG_OFF_BY_ONE,
    TAG_WRONG_BRANCH,
    Choice,
    FactAtom,
    Question,
    ReferenceReason,
    StepChain,
)
from .templates import Concept, QuestionTemplate, load_templates


class NoApplicableTemplate(Exception):
    pass


class InsufficientIterations(Exception):
    pass


class Exhausted(Exception):
    pass


_CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")

# (replacement, tag) ladders per comparison operator
_OP_MUTATIONS: dict[str, list[tuple[str, str]]] = {
    "<": [("<=", TAG_BOUNDS), (">", TAG_WRONG_BRANCH), (">=", TAG_WRONG_BRANCH)],
    "<=": [("<", TAG_BOUNDS), (">=", TAG_WRONG_BRANCH), (">", TAG_WRONG_BRANCH)],
    ">": [(">=", TAG_BOUNDS), ("<", TAG_WRONG_BRANCH), ("<=", TAG_WRONG_BRANCH)],
    ">=": [(">", TAG_BOUNDS), ("<=", TAG_WRONG_BRANCH), ("<", TAG_WRONG_BRANCH)],
    "==": [("!=", TAG_WRONG_BRANCH), ("<=", TAG_BOUNDS), (">=", TAG_BOUNDS)],
    "!=": [("==", TAG_WRONG_BRANCH), ("<", TAG_BOUNDS), (">", TAG_BOUNDS)],
}

_NEGATED_OP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "==": "!=", "!=": "=="}


def _mix(seed: int, *parts: Any) -> int:
    text = ":".join([str(seed), *[str(p) for p in parts]])
    return zlib.crc32(text.encode("utf-8"))


def render_inputs(inputs: InputMap) -> str:
    if not inputs:
        return "no inputs"
    parts = []
    for name, value in inputs.items():
        if isinstance(value, list):
            parts.append(f"{name} = [{', '.join(str(v) for v in value)}]")
        else:
            parts.append(f"{name} = {value}")
    return ", ".join(parts)


class QuestionEngine:
    def __init__(self, templates: Optional[dict[str, QuestionTemplate]] = None):
        self.templates = templates or load_templates()

    # ------------------------------------------------------------------
    # selection-facing helpers

    def applicable_kcs(self, facts: CodeFacts, asked: Iterable[str] = ()) -> set[str]:
        kcs: set[str] = set()
        for template in self.templates.values():
            if not template.kc_tags:
                continue
            if self._groundings(template, facts, None, set(asked)):
                kcs.update(template.kc_tags)
        return kcs

    def has_applicable(self, facts: CodeFacts, kc: str, unit_id: Optional[str] = None,
                       asked: Iterable[str] = ()) -> bool:
        asked_set = set(asked)
        return any(
            kc in t.kc_tags and self._groundings(t, facts, unit_id, asked_set)
            for t in self.templates.values()
        )

    def applicable_units(self, facts: CodeFacts, kc: str,
                         asked: Iterable[str] = ()) -> set[str]:
        """Unit ids that can actually host a question for the KC right now."""
        asked_set = set(asked)
        units: set[str] = set()
        for template in self.templates.values():
            if kc not in template.kc_tags:
                continue
            units.update(g["unit_id"] for g in self._groundings(template, facts, None, asked_set))
        return units

    # ------------------------------------------------------------------
    # main entry points

    def generate_question(self, facts: CodeFacts, kc: str, seed: int,
                          history: Sequence[str] = (), unit_id: Optional[str] = None,
                          asked: Iterable[str] = ()) -> tuple[Question, ReferenceReason]:
        """Pick the least-recently-used applicable template for the KC and
        ground it; deterministic for identical (facts, kc, seed, history)."""
        asked_set = set(asked)
        candidates: list[tuple[QuestionTemplate, list[dict]]] = []
        for tid in sorted(self.templates):
            template = self.templates[tid]
            if kc not in template.kc_tags:
                continue
            groundings = self._groundings(template, facts, unit_id, asked_set)
            if groundings:
                candidates.append((template, groundings))
        if not candidates:
            raise NoApplicableTemplate(f"no applicable template for {kc}")

        def order(item: tuple[QuestionTemplate, list[dict]]):
            template = item[0]
            last_use = -1
            for index, tid in enumerate(history):
                if tid == template.template_id:
                    last_use = index
            # simpler comprehension checks (static) come before trace questions
            return (last_use, 0 if template.is_static else 1, template.template_id)

        template, groundings = min(candidates, key=order)
        rng = random.Random(_mix(seed, template.template_id))
        grounding = groundings[rng.randrange(len(groundings))]
        return self._build(template, grounding, kc, seed, rng)

    def generate_step_chain(self, facts: CodeFacts, loop_id: int, input_set_id: str,
                            seed: int, asked: Iterable[str] = ()) -> StepChain:
        """2-4 successive next-value questions walking one loop's trace."""
        trace = facts.per_input_runs[input_set_id]
        starts = [e for e in trace.events
                  if e.kind == "LOOP_ITER_START" and e.payload["node_id"] == loop_id]
        if len(starts) < 2:
            raise InsufficientIterations(f"loop {loop_id} ran {len(starts)} iterations")
        asked_set = set(asked)
        steps: list[tuple[Question, ReferenceReason]] = []
        for k, event in enumerate(starts[:4]):
            pair = self._next_value_item(facts, loop_id, input_set_id, k, event.step,
                                         seed, asked_set)
            if pair is None:
                break
            steps.append(pair)
            asked_set.add(pair[0].question_id)
        if len(steps) < 2:
            raise InsufficientIterations(f"loop {loop_id} lacks traceable steps")
        return StepChain(chain_id=f"chain:{loop_id}:{input_set_id}:{seed}", steps=steps)

    def generate_followup(self, question: Question, verdict: Any, facts: CodeFacts,
                          seed: int, asked: Iterable[str] = ()) -> tuple[Question, ReferenceReason]:
        """Narrow the reasoning space: same template under fresh inputs, or a
        step question inside the same loop. Never repeats an asked item."""
        if verdict is not None and getattr(verdict, "action", "FOLLOW_UP") != "FOLLOW_UP":
            raise ValueError("follow-ups require a FOLLOW_UP verdict")
        asked_set = set(asked) | {question.question_id}
        template = self.templates[question.template_id]
        modes = [template.followup]
        modes.append("step" if template.followup == "reground" else "reground")
        for mode in modes:
            pair = (self._followup_reground(question, template, facts, seed, asked_set)
                    if mode == "reground"
                    else self._followup_step(question, facts, seed, asked_set))
            if pair is not None:
                return pair
        raise Exhausted(f"no narrower grounding remains after {question.question_id}")

    def render_distractors(self, fact_value: int, template_id: str, seed: int,
                           context: Optional[dict[str, int]] = None) -> list[Choice]:
        """Three distinct wrong numeric options via the template's rules."""
        template = self.templates[template_id]
        return _numeric_distractors(fact_value, template.perturbation_rules, context or {})

    # ------------------------------------------------------------------
    # follow-up strategies

    def _followup_reground(self, question: Question, template: QuestionTemplate,
                           facts: CodeFacts, seed: int, asked: set[str]):
        groundings = [
            g for g in self._groundings(template, facts, question.unit_id, asked)
            if g["input_set_id"] is not None and g["input_set_id"] != question.input_set_id
        ]
        if not groundings:
            return None
        rng = random.Random(_mix(seed, "followup", question.question_id))
        grounding = groundings[rng.randrange(len(groundings))]
        return self._build(template, grounding, question.kc, seed, rng)

    def _followup_step(self, question: Question, facts: CodeFacts, seed: int,
                       asked: set[str]):
        unit = facts.unit(question.unit_id)
        if unit.kind != "LOOP_BODY":
            return None
        loop_id = unit.anchor_node_id
        set_ids = sorted(facts.per_input_runs)
        if question.input_set_id in set_ids:  # prefer the inputs already discussed
            set_ids.remove(question.input_set_id)
            set_ids.insert(0, question.input_set_id)
        for set_id in set_ids:
            trace = facts.per_input_runs[set_id]
            starts = [e for e in trace.events
                      if e.kind == "LOOP_ITER_START" and e.payload["node_id"] == loop_id]
            for k, event in enumerate(starts[:4]):
                pair = self._next_value_item(facts, loop_id, set_id, k, event.step, seed, asked)
                if pair is not None:
                    return pair
        return None

    # ------------------------------------------------------------------
    # item assembly

    def _next_value_item(self, facts: CodeFacts, loop_id: int, input_set_id: str,
                         iteration: int, start_step: int, seed: int, asked: set[str]):
        template = self.templates["NEXT-VALUE"]
        program = facts.program
        loop = program.node(loop_id)
        unit = _unit_for_loop(facts, loop_id)
        var, written = _chain_variable(program, loop)
        if written:
            query = TraceQuery("NEXT_WRITE_AFTER", {"var": var, "step": start_step})
        else:
            query = TraceQuery("VALUE_AT_STEP", {"var": var, "step": start_step})
        answer = query_trace(program, facts.per_input_runs[input_set_id], query)
        if answer is NOT_APPLICABLE or not isinstance(answer, int):
            return None
        qid = f"NEXT-VALUE:{unit.unit_id}:{input_set_id}:{var}@{iteration}"
        if qid in asked:
            return None
        slots = {
            "line": loop.line,
            "var": var,
            "iteration": iteration,
            "inputs": render_inputs(facts.input_sets[input_set_id]),
        }
        grounding = {
            "unit_id": unit.unit_id,
            "fact_ids": [],
            "query": query.to_dict(),
            "input_set_id": input_set_id,
            "slots": slots,
            "correct": answer,
            "idents": [var],
            "context": {"init_value": _loop_init_const(program, loop)},
            "extra_concepts": [],
            "qid": qid,
            "pattern": template.pattern if written else template.pattern_at_start,
        }
        rng = random.Random(_mix(seed, qid))
        return self._build(template, grounding, "TRACING", seed, rng)

    def _build(self, template: QuestionTemplate, grounding: dict, kc: str, seed: int,
               rng: random.Random) -> tuple[Question, ReferenceReason]:
        slots = dict(grounding["slots"])
        slots.setdefault("inputs", "no inputs")
        pattern = grounding.get("pattern") or template.pattern
        stem = pattern.format(**slots)
        correct = grounding["correct"]

        if template.answer_mode == "numeric":
            correct_choice = Choice(text=str(correct), misconception_tag=TAG_NONE)
            distractors = _numeric_distractors(correct, template.perturbation_rules,
                                               grounding.get("context") or {})
        elif template.answer_mode == "expression":
            correct_choice = Choice(text=correct, misconception_tag=TAG_NONE)
            distractors = [Choice(text=t, misconception_tag=tag)
                           for t, tag in grounding["mutations"][:3]]
        elif template.answer_mode == "choice_set":
            correct_choice = None
            distractors = []
            for entry in template.choice_set:
                text = entry["text"].format(**slots)
                if entry["key"] == correct:
                    correct_choice = Choice(text=text, misconception_tag=TAG_NONE)
                else:
                    distractors.append(Choice(text=text, misconception_tag=entry["tag"]))
            assert correct_choice is not None
        else:  # output
            correct_choice = Choice(text=correct, misconception_tag=TAG_NONE)
            distractors = _output_distractors(correct)

        options = [correct_choice, *distractors[:3]]
        assert len(options) == 4 and len({c.text for c in options}) == 4, \
            f"options must be 4 distinct texts: {[c.text for c in options]}"
        rng.shuffle(options)
        correct_index = next(i for i, c in enumerate(options) if c is correct_choice)

        question = Question(
            question_id=grounding["qid"],
            template_id=template.template_id,
            unit_id=grounding["unit_id"],
            kc=kc,
            stem=stem,
            options=options,
            correct_index=correct_index,
            grounding=list(grounding["fact_ids"]),
            seed=seed,
            input_set_id=grounding["input_set_id"],
            grounding_query=grounding["query"],
        )
        reference = self._reference_for(template, grounding, question, slots)
        return question, reference

    def _reference_for(self, template: QuestionTemplate, grounding: dict,
                       question: Question, slots: dict) -> ReferenceReason:
        correct = grounding["correct"]
        value_text = str(correct)
        about = template.about_value.format(**{**slots, "value": ""})

        numeric_texts: list[str] = []
        if template.answer_mode == "numeric":
            numeric_texts = [value_text]
        elif template.answer_mode == "expression":
            numeric_texts = list(dict.fromkeys(re.findall(r"\d+", correct)))[:4]
        elif template.answer_mode == "output":
            numeric_texts = list(dict.fromkeys(re.findall(r"-?\d+", correct)))[:4]

        identifiers = [i for i in grounding.get("idents", []) if i]
        concepts: list[Concept] = list(template.concepts) + list(grounding.get("extra_concepts", []))

        atoms: list[FactAtom] = []
        present: dict[str, int] = {}
        if numeric_texts:
            present[ATOM_NUMERIC] = len(numeric_texts)
        if identifiers:
            present[ATOM_IDENTIFIER] = len(identifiers)
        present[ATOM_CONCEPT] = len(concepts)
        base = {ATOM_NUMERIC: 0.4, ATOM_IDENTIFIER: 0.3, ATOM_CONCEPT: 0.3}
        scale = 1.0 / sum(base[k] for k in present)
        for text in numeric_texts:
            atoms.append(FactAtom(text_form=text, kind=ATOM_NUMERIC,
                                  weight=base[ATOM_NUMERIC] * scale / len(numeric_texts),
                                  synonyms=[], about=about))
        for ident in identifiers:
            atoms.append(FactAtom(text_form=ident, kind=ATOM_IDENTIFIER,
                                  weight=base[ATOM_IDENTIFIER] * scale / len(identifiers),
                                  synonyms=[], about=f"the variable {ident}"))
        for concept in concepts:
            atoms.append(FactAtom(text_form=concept.term, kind=ATOM_CONCEPT,
                                  weight=base[ATOM_CONCEPT] * scale / len(concepts),
                                  synonyms=list(concept.synonyms), about=about))

        explanation = template.explanation.format(**{**slots, "value": value_text})
        return ReferenceReason(
            question_id=question.question_id,
            atoms=atoms,
            canonical_explanation=explanation,
            broad_hint=template.broad_hint,
        )

    # ------------------------------------------------------------------
    # grounding builders

    def _groundings(self, template: QuestionTemplate, facts: CodeFacts,
                    unit_id: Optional[str], asked: set[str]) -> list[dict]:
        builder = _BUILDERS.get(template.template_id)
        if builder is None:
            return []
        out = []
        for g in builder(facts):
            g["qid"] = _question_id(template.template_id, g)
            if g["qid"] in asked:
                continue
            if unit_id is not None and g["unit_id"] != unit_id:
                continue
            out.append(g)
        out.sort(key=lambda g: g["qid"])
        return out


def _question_id(template_id: str, grounding: dict) -> str:
    suffix = grounding.get("suffix", "")
    set_part = grounding["input_set_id"] or "s"
    return f"{template_id}:{grounding['unit_id']}:{set_part}:{suffix}"


# ----------------------------------------------------------------------
# numeric distractors

_RULE_TAGS = {
    "plus_one": TAG_OFF_BY_ONE,
    "minus_one": TAG_OFF_BY_ONE,
    "other_iteration": TAG_ITER_COUNT,
    "init_value": TAG_INIT_VALUE,
    "boundary": TAG_BOUNDS,
}


def _numeric_distractors(correct: int, rules: list[str], context: dict[str, Any]) -> list[Choice]:
    chosen: list[Choice] = []
    seen = {correct}

    def push(value: Optional[int], tag: str) -> None:
        if value is None or value in seen or len(chosen) >= 3:
            return
        seen.add(value)
        chosen.append(Choice(text=str(value), misconception_tag=tag))

    for rule in rules:
        if rule == "plus_one":
            push(correct + 1, TAG_OFF_BY_ONE)
        elif rule == "minus_one":
            push(correct - 1, TAG_OFF_BY_ONE)
        else:
            push(context.get(rule), _RULE_TAGS[rule])
    delta = 2
    while len(chosen) < 3:  # fallback ladder guarantees distinctness
        push(correct + delta, TAG_OFF_BY_ONE)
        push(correct - delta, TAG_OFF_BY_ONE)
        delta += 1
    return chosen[:3]


def _output_distractors(correct: str) -> list[Choice]:
    lines = correct.split("\n")
    candidates: list[tuple[str, str]] = []
    if len(lines) == 1 and re.fullmatch(r"-?\d+", correct):
        v = int(correct)
        candidates = [(str(v + 1), TAG_OFF_BY_ONE), (str(v - 1), TAG_OFF_BY_ONE),
                      ("0", TAG_INIT_VALUE), (str(v + 2), TAG_OFF_BY_ONE),
                      (str(v - 2), TAG_OFF_BY_ONE)]
    else:
        shorter = "\n".join(lines[:-1])
        longer = "\n".join([*lines, lines[-1]])
        flipped = "\n".join([lines[-1], *lines[1:-1], lines[0]])
        bumped_last = "\n".join([*lines[:-1], _bump_line(lines[-1])])
        bumped_first = "\n".join([_bump_line(lines[0]), *lines[1:]])
        candidates = [(shorter, TAG_ITER_COUNT), (longer, TAG_ITER_COUNT),
                      (flipped, TAG_WRONG_BRANCH), (bumped_last, TAG_OFF_BY_ONE),
                      (bumped_first, TAG_OFF_BY_ONE)]
    out: list[Choice] = []
    seen = {correct}
    for text, tag in candidates:
        if text not in seen and text:
            seen.add(text)
            out.append(Choice(text=text, misconception_tag=tag))
        if len(out) == 3:
            return out
    extra = 3
    while len(out) < 3:  # pathological outputs: suffix numbered lines
        text = correct + "\n" + str(extra)
        if text not in seen:
            seen.add(text)
            out.append(Choice(text=text, misconception_tag=TAG_ITER_COUNT))
        extra += 1
    return out


def _bump_line(line: str) -> str:
    match = re.search(r"-?\d+", line)
    if not match:
        return line + "!"
    value = int(match.group()) + 1
    return line[: match.start()] + str(value) + line[match.end():]


# ----------------------------------------------------------------------
# expression mutations

def _mutate_comparison(root: Node, program: Program) -> list[tuple[str, str]]:
    comparisons = [n for n in root.walk() if n.kind == NodeKind.BINOP and n.op in _CMP_OPS]
    if not comparisons:
        return []
    target = comparisons[0]
    out: list[tuple[str, str]] = []
    original = target.op
    for new_op, tag in _OP_MUTATIONS[original]:
        target.op = new_op
        out.append((render_expr(root), tag))
    target.op = original
    # swapped operands read plausibly but test the opposite relation
    target.lhs, target.rhs = target.rhs, target.lhs
    out.append((render_expr(root), TAG_WRONG_BRANCH))
    target.lhs, target.rhs = target.rhs, target.lhs
    return out


def _mutate_update(update: Node) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    expr = update.value_expr
    if expr.kind == NodeKind.BINOP and expr.op in ("+", "-", "*", "/"):
        flip = {"+": "-", "-": "+", "*": "/", "/": "*"}[expr.op]
        original = expr.op
        expr.op = flip
        out.append((render_expr(update), TAG_ITER_COUNT))
        expr.op = original
        const = next((n for n in expr.walk() if n.kind == NodeKind.CONST), None)
        if const is not None:
            const.value += 1
            out.append((render_expr(update), TAG_OFF_BY_ONE))
            const.value -= 1
    out.append((f"{update.name} = {update.name}", TAG_ITER_COUNT))
    out.append((f"{update.name} = 0", TAG_INIT_VALUE))
    return out


# ----------------------------------------------------------------------
# per-template grounding builders

def _unit_for_loop(facts: CodeFacts, loop_id: int) -> LogicUnit:
    for unit in facts.logic_units:
        if unit.kind == "LOOP_BODY" and unit.anchor_node_id == loop_id:
            return unit
    raise KeyError(f"no LOOP_BODY unit for node {loop_id}")


def _unit_covering(facts: CodeFacts, node_id: int) -> LogicUnit:
    for unit in facts.logic_units:
        if node_id in unit.node_ids:
            return unit
    raise KeyError(f"no unit covers node {node_id}")


def _branch_arm_unit(facts: CodeFacts, if_node_id: int) -> LogicUnit:
    for unit in facts.logic_units:
        if unit.kind == "BRANCH_ARM" and unit.anchor_node_id == if_node_id:
            return unit
    raise KeyError(f"no BRANCH_ARM unit for node {if_node_id}")


def _loop_init_const(program: Program, loop: Node) -> Optional[int]:
    if loop.kind == NodeKind.FOR and loop.init.kind == NodeKind.DECL:
        if loop.init.init is not None and loop.init.init.kind == NodeKind.CONST:
            return loop.init.init.value
    if loop.kind == NodeKind.WHILE:
        scalars = _cond_scalar_names(program, loop)
        if scalars:
            first = scalars[0]
            for node in program.walk():
                if (node.kind == NodeKind.DECL and node.name == first
                        and node.line < loop.line and node.init is not None
                        and node.init.kind == NodeKind.CONST):
                    return node.init.value
    return None


def _cond_const(loop: Node) -> Optional[int]:
    for node in loop.cond.walk():
        if node.kind == NodeKind.CONST:
            return node.value
    return None


def _cond_scalar_names(program: Program, loop: Node) -> list[str]:
    arrays = program.array_names()
    names: list[str] = []
    for node in loop.cond.walk():
        if node.kind == NodeKind.VAR and node.name not in arrays and node.name not in names:
            names.append(node.name)
    return names


def _chain_variable(program: Program, loop: Node) -> tuple[str, bool]:
    """Variable a step chain follows: prefer one written in the body."""
    update_target = loop.update.name if loop.update is not None else None
    for stmt in loop.body:
        if stmt.kind == NodeKind.ASSIGN and stmt.name != update_target:
            return stmt.name, True
    if update_target is not None:
        return update_target, True
    for stmt in loop.body:
        if stmt.kind == NodeKind.ASSIGN:
            return stmt.name, True
    scalars = _cond_scalar_names(program, loop)
    if scalars:
        return scalars[0], False
    raise InsufficientIterations(f"loop at line {loop.line} has no traceable variable")


def _iterations_by_loop(facts: CodeFacts) -> dict[tuple[int, str], int]:
    return {(f.data["loop_id"], f.input_set_id): f.data["count"]
            for f in facts.dynamics_of_kind("ITERATIONS")}


def _build_loop_init(facts: CodeFacts) -> list[dict]:
    program = facts.program
    out = []
    iterations = _iterations_by_loop(facts)
    for fact in facts.statics_of_kind("LOOP"):
        loop = program.node(fact.node_id)
        init_value = _loop_init_const(program, loop)
        if loop.kind != NodeKind.FOR or init_value is None:
            continue
        var = loop.init.name
        query = None
        input_set_id = None
        for set_id in sorted(facts.per_input_runs):
            if iterations.get((loop.node_id, set_id), 0) >= 1:
                trace = facts.per_input_runs[set_id]
                first = next(e for e in trace.events
                             if e.kind == "LOOP_ITER_START" and e.payload["node_id"] == loop.node_id)
                query = TraceQuery("VALUE_AT_STEP", {"var": var, "step": first.step}).to_dict()
                input_set_id = set_id
                break
        unit = _unit_for_loop(facts, loop.node_id)
        out.append({
            "unit_id": unit.unit_id, "fact_ids": [fact.fact_id], "query": query,
            "input_set_id": input_set_id,
            "slots": {"line": loop.line, "var": var,
                      "inputs": render_inputs(facts.input_sets[input_set_id]) if input_set_id else "no inputs"},
            "correct": init_value, "idents": [var],
            "context": {"boundary": _cond_const(loop)},
            "extra_concepts": [], "suffix": var,
        })
    return out


def _build_loop_expression(facts: CodeFacts, which: str) -> list[dict]:
    program = facts.program
    out = []
    for fact in facts.statics_of_kind("LOOP"):
        loop = program.node(fact.node_id)
        if which == "cond":
            comparisons = [n for n in loop.cond.walk()
                           if n.kind == NodeKind.BINOP and n.op in _CMP_OPS]
            if not comparisons:
                continue
            correct = render_expr(loop.cond)
            mutations = _mutate_comparison(loop.cond, program)
        elif which == "update":
            if loop.update is None:
                continue
            correct = render_expr(loop.update)
            mutations = _mutate_update(loop.update)
        else:  # term: negation of a single-comparison condition
            if loop.cond.kind != NodeKind.BINOP or loop.cond.op not in _CMP_OPS:
                continue
            original = loop.cond.op
            loop.cond.op = _NEGATED_OP[original]
            correct = render_expr(loop.cond)
            neg_mutations = _mutate_comparison(loop.cond, program)
            loop.cond.op = original
            # the continuation condition itself is the classic wrong answer
            mutations = [(render_expr(loop.cond), TAG_WRONG_BRANCH)]
            mutations.extend(neg_mutations)
        seen = {correct}
        unique: list[tuple[str, str]] = []
        for text, tag in mutations:
            if text not in seen:
                seen.add(text)
                unique.append((text, tag))
        if len(unique) < 3:
            continue
        unit = _unit_for_loop(facts, loop.node_id)
        idents = _cond_scalar_names(program, loop)
        out.append({
            "unit_id": unit.unit_id, "fact_ids": [fact.fact_id], "query": None,
            "input_set_id": None,
            "slots": {"line": loop.line, "var": idents[0] if idents else ""},
            "correct": correct, "mutations": unique, "idents": idents,
            "context": {}, "extra_concepts": [], "suffix": which,
        })
    return out


def _build_decl_purpose(facts: CodeFacts) -> list[dict]:
    program = facts.program
    out = []
    for fact in facts.statics_of_kind("DECL"):
        node = program.node(fact.node_id)
        if node.size is not None or node.init is None or node.init.kind != NodeKind.CONST:
            continue
        try:
            unit = _unit_covering(facts, node.node_id)
        except KeyError:
            continue
        out.append({
            "unit_id": unit.unit_id, "fact_ids": [fact.fact_id], "query": None,
            "input_set_id": None,
            "slots": {"line": node.line, "var": node.name},
            "correct": node.init.value, "idents": [node.name],
            "context": {}, "extra_concepts": [], "suffix": node.name,
        })
    return out


def _build_branch_purpose(facts: CodeFacts) -> list[dict]:
    program = facts.program
    out = []
    for fact in facts.statics_of_kind("CONDITIONAL"):
        node = program.node(fact.node_id)
        correct = render_expr(node.cond)
        mutations = _mutate_comparison(node.cond, program)
        seen = {correct}
        unique = []
        for text, tag in mutations:
            if text not in seen:
                seen.add(text)
                unique.append((text, tag))
        if len(unique) < 3:
            continue
        unit = _branch_arm_unit(facts, node.node_id)
        idents = [n.name for n in node.cond.walk() if n.kind == NodeKind.VAR and n.name]
        idents = list(dict.fromkeys(idents))
        out.append({
            "unit_id": unit.unit_id, "fact_ids": [fact.fact_id], "query": None,
            "input_set_id": None,
            "slots": {"line": node.line},
            "correct": correct, "mutations": unique, "idents": idents,
            "context": {}, "extra_concepts": [], "suffix": "cond",
        })
    return out


def _build_var_before_final_iter(facts: CodeFacts) -> list[dict]:
    program = facts.program
    out = []
    for fact in facts.dynamics_of_kind("VAR_BEFORE_FINAL_ITER"):
        loop = program.node(fact.data["loop_id"])
        var = fact.data["var"]
        unit = _unit_for_loop(facts, loop.node_id)
        out.append({
            "unit_id": unit.unit_id, "fact_ids": [fact.fact_id],
            "query": TraceQuery("VAR_BEFORE_FINAL_ITER",
                                {"loop_id": loop.node_id, "var": var}).to_dict(),
            "input_set_id": fact.input_set_id,
            "slots": {"line": loop.line, "var": var,
                      "inputs": render_inputs(facts.input_sets[fact.input_set_id])},
            "correct": fact.data["value"], "idents": [var],
            "context": {"init_value": _loop_init_const(program, loop)},
            "extra_concepts": [], "suffix": var,
        })
    return out


def _build_iter_count(facts: CodeFacts) -> list[dict]:
    program = facts.program
    out = []
    for fact in facts.dynamics_of_kind("ITERATIONS"):
        if fact.data["count"] < 1:
            continue
        loop = program.node(fact.data["loop_id"])
        unit = _unit_for_loop(facts, loop.node_id)
        out.append({
            "unit_id": unit.unit_id, "fact_ids": [fact.fact_id],
            "query": TraceQuery("ITER_COUNT", {"loop_id": loop.node_id}).to_dict(),
            "input_set_id": fact.input_set_id,
            "slots": {"line": loop.line,
                      "inputs": render_inputs(facts.input_sets[fact.input_set_id])},
            "correct": fact.data["count"], "idents": _cond_scalar_names(program, loop)[:1],
            "context": {"init_value": _loop_init_const(program, loop),
                        "boundary": _cond_const(loop)},
            "extra_concepts": [], "suffix": "n",
        })
    return out


def _build_last_valid(facts: CodeFacts) -> list[dict]:
    program = facts.program
    sizes = {f.data["name"]: f.data["size"] for f in facts.statics_of_kind("ARRAY")}
    out = []
    for fact in facts.dynamics_of_kind("LAST_VALID_INDEX"):
        array = fact.data["array"]
        unit = _array_unit(facts, array)
        if unit is None:
            continue
        out.append({
            "unit_id": unit.unit_id, "fact_ids": [fact.fact_id],
            "query": TraceQuery("LAST_VALID_ARRAY_INDEX", {"name": array}).to_dict(),
            "input_set_id": fact.input_set_id,
            "slots": {"array": array,
                      "inputs": render_inputs(facts.input_sets[fact.input_set_id])},
            "correct": fact.data["index"], "idents": [array],
            "context": {"boundary": sizes.get(array), "init_value": 0},
            "extra_concepts": [], "suffix": array,
        })
    return out


def _array_unit(facts: CodeFacts, array: str) -> Optional[LogicUnit]:
    program = facts.program
    target = next((n for n in program.walk()
                   if n.kind in (NodeKind.ARRAY_ASSIGN, NodeKind.INDEX) and n.name == array),
                  None)
    if target is not None:
        # the innermost covering statement decides the unit, not an outer
        # compound statement that merely contains it
        best: Optional[tuple[LogicUnit, int]] = None
        for unit in facts.logic_units:
            if target.node_id in unit.node_ids:
                return unit
            for sid in unit.node_ids:
                subtree = list(program.node(sid).walk())
                if any(ch.node_id == target.node_id for ch in subtree):
                    if best is None or len(subtree) < best[1]:
                        best = (unit, len(subtree))
        if best is not None:
            return best[0]
    for unit in facts.logic_units:
        if "ARRAYS" in unit.knowledge_components:
            return unit
    return None


def _build_why_terminates(facts: CodeFacts) -> list[dict]:
    program = facts.program
    out = []
    for fact in facts.dynamics_of_kind("ITERATIONS"):
        if fact.data["count"] < 1:
            continue
        trace = facts.per_input_runs[fact.input_set_id]
        if trace.termination != TERM_NORMAL:
            continue
        loop = program.node(fact.data["loop_id"])
        written = _written_cond_scalars(program, loop)
        if len(written) != 1:
            continue
        var = written[0]
        starts = [e for e in trace.events
                  if e.kind == "LOOP_ITER_START" and e.payload["node_id"] == loop.node_id]
        query = TraceQuery("NEXT_WRITE_AFTER", {"var": var, "step": starts[-1].step})
        answer = query_trace(program, trace, query)
        if answer is NOT_APPLICABLE or not isinstance(answer, int):
            continue
        unit = _unit_for_loop(facts, loop.node_id)
        out.append({
            "unit_id": unit.unit_id, "fact_ids": [fact.fact_id],
            "query": query.to_dict(), "input_set_id": fact.input_set_id,
            "slots": {"line": loop.line, "var": var,
                      "inputs": render_inputs(facts.input_sets[fact.input_set_id])},
            "correct": answer, "idents": [var],
            "context": {"init_value": _loop_init_const(program, loop),
                        "boundary": _cond_const(loop)},
            "extra_concepts": [], "suffix": var,
        })
    return out


def _written_cond_scalars(program: Program, loop: Node) -> list[str]:
    cond_vars = set(_cond_scalar_names(program, loop))
    written: list[str] = []
    nodes = list(loop.body)
    if loop.update is not None:
        nodes.append(loop.update)
    for stmt in nodes:
        for node in stmt.walk():
            if node.kind == NodeKind.ASSIGN and node.name in cond_vars and node.name not in written:
                written.append(node.name)
    return written


def _build_branch_taken(facts: CodeFacts) -> list[dict]:
    program = facts.program
    out = []
    true_concept = Concept(term="true", synonyms=["true", "runs", "taken", "yes", "executes", "enters"])
    false_concept = Concept(term="false", synonyms=["false", "skipped", "skip", "no", "fails"])
    for fact in facts.dynamics_of_kind("BRANCH_TAKEN"):
        if fact.data["occurrence"] != 0:
            continue
        node = program.node(fact.data["node_id"])
        unit = _branch_arm_unit(facts, node.node_id)
        taken = fact.data["taken"]
        idents = list(dict.fromkeys(
            n.name for n in node.cond.walk() if n.kind == NodeKind.VAR and n.name))
        out.append({
            "unit_id": unit.unit_id, "fact_ids": [fact.fact_id],
            "query": TraceQuery("BRANCH_OUTCOME",
                                {"node_id": node.node_id, "occurrence": 0}).to_dict(),
            "input_set_id": fact.input_set_id,
            "slots": {"line": node.line,
                      "inputs": render_inputs(facts.input_sets[fact.input_set_id])},
            "correct": "true" if taken else "false", "idents": idents,
            "context": {}, "extra_concepts": [true_concept if taken else false_concept],
            "suffix": "b",
        })
    return out


def _build_output(facts: CodeFacts) -> list[dict]:
    program = facts.program
    out = []
    main_unit = next(u for u in facts.logic_units
                     if u.kind == "FUNCTION_BODY" and u.function == program.entry)
    for fact in facts.dynamics_of_kind("OUTPUT"):
        out.append({
            "unit_id": main_unit.unit_id, "fact_ids": [fact.fact_id],
            "query": TraceQuery("FINAL_OUTPUT", {}).to_dict(),
            "input_set_id": fact.input_set_id,
            "slots": {"inputs": render_inputs(facts.input_sets[fact.input_set_id])},
            "correct": fact.data["text"], "idents": [],
            "context": {}, "extra_concepts": [], "suffix": "out",
        })
    return out


def _build_nontermination(facts: CodeFacts) -> list[dict]:
    program = facts.program
    out = []
    for fact in facts.dynamics_of_kind("NONTERMINATION"):
        loop = program.node(fact.data["loop_id"])
        unit = _unit_for_loop(facts, loop.node_id)
        out.append({
            "unit_id": unit.unit_id, "fact_ids": [fact.fact_id],
            "query": TraceQuery("NONTERMINATING_LOOP_LINE", {}).to_dict(),
            "input_set_id": fact.input_set_id,
            "slots": {"inputs": render_inputs(facts.input_sets[fact.input_set_id])},
            "correct": fact.data["line"], "idents": _cond_scalar_names(program, loop)[:1],
            "context": {"boundary": program.main.line},
            "extra_concepts": [], "suffix": "line",
        })
    return out


_BUILDERS = {
    "LOOP-INIT": _build_loop_init,
    "LOOP-COND": lambda facts: _build_loop_expression(facts, "cond"),
    "LOOP-UPDATE": lambda facts: _build_loop_expression(facts, "update"),
    "LOOP-TERM": lambda facts: _build_loop_expression(facts, "term"),
    "DECL-PURPOSE": _build_decl_purpose,
    "BRANCH-PURPOSE": _build_branch_purpose,
    "VAR-BEFORE-FINAL-ITER": _build_var_before_final_iter,
    "ITER-COUNT": _build_iter_count,
    "LAST-VALID-ARRAY-ACCESS": _build_last_valid,
    "WHY-TERMINATES": _build_why_terminates,
    "BRANCH-TAKEN-ON-INPUT": _build_branch_taken,
    "OUTPUT-ON-INPUT": _build_output,
    "NONTERMINATION-LINE": _build_nontermination,
}


# module-level convenience API over a shared default engine -----------------

_default_engine: Optional[QuestionEngine] = None


def default_engine() -> QuestionEngine:
    global _default_engine
    if _default_engine is None:
        _default_engine = QuestionEngine()
    return _default_engine


def generate_question(facts, kc, seed, history=(), unit_id=None, asked=()):
    return default_engine().generate_question(facts, kc, seed, history, unit_id, asked)


def generate_step_chain(facts, loop_id, input_set_id, seed, asked=()):
    return default_engine().generate_step_chain(facts, loop_id, input_set_id, seed, asked)


def generate_followup(question, verdict, facts, seed, asked=()):
    return default_engine().generate_followup(question, verdict, facts, seed, asked)


def render_distractors(fact_value, template_id, seed, context=None):
    return default_engine().render_distractors(fact_value, template_id, seed, context)
