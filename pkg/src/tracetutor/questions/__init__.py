"""Grounded Tier-1 question generation with misconception-tagged distractors."""
from .engine import (
    Exhausted,
    InsufficientIterations,
    NoApplicableTemplate,
    QuestionEngine,
    default_engine,
    generate_followup,
    generate_question,
    generate_step_chain,
    render_distractors,
    render_inputs,
)
from .model import (
    MISCONCEPTION_TAGS,
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
from .templates import QuestionTemplate, TemplateConfigError, load_templates

__all__ = [
    "Exhausted", "InsufficientIterations", "NoApplicableTemplate",
    "QuestionEngine", "default_engine",
    "generate_followup", "generate_question", "generate_step_chain",
    "render_distractors", "render_inputs",
    "MISCONCEPTION_TAGS", "TAG_BOUNDS", "TAG_INIT_VALUE", "TAG_ITER_COUNT",
    "TAG_NONE", "TAG_OFF_BY_ONE", "TAG_WRONG_BRANCH",
    "Choice", "FactAtom", "Question", "ReferenceReason", "StepChain",
    "QuestionTemplate", "TemplateConfigError", "load_templates",
]
