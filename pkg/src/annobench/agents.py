"""The Annotator/Reviewer agent pair: prompts, response parsing, and the
single-sample annotate-review-evaluate workflow."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

from . import templates
from .evaluator import SampleMetrics, evaluate_pair, tokenize
from .providers import (
    AttemptRecord,
    ChatClient,
    ChatRequest,
    ModelSpec,
    ProviderError,
    RetryPolicy,
)
from .tagspan import strip_tags


# --- paradigms --------------------------------------------------------------


@dataclass(frozen=True)
class ExamplePair:
    source_text: str
    gold_tagged: str


@dataclass(frozen=True)
class ZeroShot:
    kind: str = field(default="zero_shot", init=False)


@dataclass(frozen=True)
class FewShot:
    examples: tuple[ExamplePair, ...]
    kind: str = field(default="few_shot", init=False)

    def __post_init__(self):
        if not self.examples:
            raise ValueError("few-shot paradigm needs at least one example")


@dataclass(frozen=True)
class FullContextCodebook:
    codebook_text: str
    kind: str = field(default="full_context_codebook", init=False)

    def __post_init__(self):
        if not self.codebook_text:
            raise ValueError("codebook text must be nonempty")


BaseParadigm = Union[ZeroShot, FewShot, FullContextCodebook]


@dataclass(frozen=True)
class FineTuned:
    tuned_model_id: str
    base_style: BaseParadigm = ZeroShot()
    kind: str = field(default="fine_tuned", init=False)

    def __post_init__(self):
        if not self.tuned_model_id:
            raise ValueError("tuned_model_id must be nonempty")


Paradigm = Union[ZeroShot, FewShot, FullContextCodebook, FineTuned]


def base_paradigm(paradigm: Paradigm) -> BaseParadigm:
    """The paradigm that defines prompt shape; fine-tuning only swaps the model."""
    return paradigm.base_style if isinstance(paradigm, FineTuned) else paradigm


def validate_examples(examples: tuple[ExamplePair, ...], label: str) -> None:
    """Each demonstration must tag its own source text, not some other text."""
    for i, ex in enumerate(examples):
        got = [t.text for t in tokenize(strip_tags(ex.gold_tagged, {label}))]
        want = [t.text for t in tokenize(ex.source_text)]
        if got != want:
            raise ValueError(
                f"example {i}: tagged text does not match its source text "
                f"(tokens {got!r} vs {want!r})"
            )


# --- prompt construction ----------------------------------------------------


class PromptSchema(str, Enum):
    ANNOTATOR = "AnnotatorSchema"
    REVIEWER = "ReviewerSchema"


@dataclass(frozen=True)
class PromptBundle:
    system_instruction: str
    user_message: str
    schema: PromptSchema


def _codebook_block(paradigm: BaseParadigm) -> str:
    if isinstance(paradigm, FullContextCodebook):
        return templates.render(
            templates.CODEBOOK_BLOCK, {"CODEBOOK": paradigm.codebook_text}
        )
    return ""


def _examples_block(paradigm: BaseParadigm) -> str:
    if not isinstance(paradigm, FewShot):
        return ""
    lines = [templates.EXAMPLES_HEADER]
    for i, ex in enumerate(paradigm.examples, start=1):
        lines.append(f"\nExample {i}\nText: {ex.source_text}\nTagged: {ex.gold_tagged}\n")
    return "".join(lines)


def build_annotator_prompt(
    sample_text: str,
    paradigm: Paradigm,
    label: str,
    template_set: templates.TemplateSet = templates.TemplateSet(),
) -> PromptBundle:
    """System instruction carries the task, label, and response contract; the
    user message is the sample text verbatim. A codebook is embedded whole and
    uncut; few-shot examples appear verbatim as source/gold pairs."""
    base = base_paradigm(paradigm)
    system = templates.render(
        template_set.annotator_system,
        {
            "LABEL": label,
            "CODEBOOK": _codebook_block(base),
            "EXAMPLES": _examples_block(base),
        },
    )
    user = templates.render(template_set.annotator_user, {"TEXT": sample_text})
    return PromptBundle(system, user, PromptSchema.ANNOTATOR)


def build_reviewer_prompt(
    sample_text: str,
    annotator_output: "AnnotatorResponse",
    paradigm: Paradigm,
    label: str,
    template_set: templates.TemplateSet = templates.TemplateSet(),
    include_reasoning: bool = True,
) -> PromptBundle:
    """The reviewer sees the original text, the annotator's tagged output
    byte-identical, and the same paradigm context the annotator had."""
    base = base_paradigm(paradigm)
    system = templates.render(
        template_set.reviewer_system,
        {"LABEL": label, "CODEBOOK": _codebook_block(base)},
    )
    reasoning = ""
    if include_reasoning and annotator_output.reasoning:
        reasoning = templates.render(
            templates.REASONING_BLOCK, {"REASONING": annotator_output.reasoning}
        )
    user = templates.render(
        template_set.reviewer_user,
        {
            "TEXT": sample_text,
            "ANNOTATED": annotator_output.annotated_text,
            "REASONING": reasoning,
        },
    )
    return PromptBundle(system, user, PromptSchema.REVIEWER)


# --- response parsing -------------------------------------------------------


@dataclass(frozen=True)
class AnnotatorResponse:
    reasoning: str
    annotated_text: str


@dataclass(frozen=True)
class ReviewerResponse:
    critique: str
    revised_text: str


class AgentResponseError(ValueError):
    pass


class MalformedJsonError(AgentResponseError):
    """Unparseable body; unbalanced braces are the usual truncation signature."""


class SchemaMismatchError(AgentResponseError):
    """Parseable JSON that lacks a required string field."""


_REQUIRED_FIELDS = {
    PromptSchema.ANNOTATOR: ("reasoning", "annotated_text"),
    PromptSchema.REVIEWER: ("critique", "revised_text"),
}


def _strip_fences(raw: str) -> str:
    text = raw.strip()
    if not text.startswith("```"):
        return text
    first_newline = text.find("\n")
    if first_newline == -1:
        return text
    text = text[first_newline + 1 :]
    if text.rstrip().endswith("```"):
        text = text.rstrip()[:-3]
    return text.strip()


def _canon_key(key: str) -> str:
    return key.strip().lower().replace(" ", "_")


def parse_agent_json(
    raw: str, schema: PromptSchema
) -> Union[AnnotatorResponse, ReviewerResponse]:
    """Parse one JSON object into the schema's typed response.

    Surrounding code fences are tolerated; keys match case-insensitively with
    spaces and underscores interchangeable ("Revised Text" == "revised_text");
    extra keys are ignored.
    """
    text = _strip_fences(raw)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedJsonError(f"unparseable response body: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaMismatchError(f"expected a JSON object, got {type(data).__name__}")
    canon = {}
    for key, value in data.items():
        canon.setdefault(_canon_key(str(key)), value)
    values = []
    for name in _REQUIRED_FIELDS[schema]:
        if name not in canon:
            raise SchemaMismatchError(f"missing required field {name!r}")
        if not isinstance(canon[name], str):
            raise SchemaMismatchError(f"field {name!r} must be a string")
        values.append(canon[name])
    if schema == PromptSchema.ANNOTATOR:
        return AnnotatorResponse(reasoning=values[0], annotated_text=values[1])
    return ReviewerResponse(critique=values[0], revised_text=values[1])


# --- per-sample workflow ----------------------------------------------------


@dataclass(frozen=True)
class Sample:
    index: int
    id: str
    text: str
    gold_tagged: str


class OutcomeStatus(str, Enum):
    OK = "Ok"
    REVIEW_FAILED = "ReviewFailed"
    FAILED = "Failed"
    SKIPPED_EMPTY_GOLD = "SkippedEmptyGold"


class AgentRole(str, Enum):
    ANNOTATOR = "Annotator"
    REVIEWER = "Reviewer"


@dataclass
class SampleOutcome:
    sample: Sample
    annotator_response: Optional[AnnotatorResponse] = None
    reviewer_response: Optional[ReviewerResponse] = None
    metrics_pre: Optional[SampleMetrics] = None
    metrics_post: Optional[SampleMetrics] = None
    status: OutcomeStatus = OutcomeStatus.FAILED
    error_class: Optional[str] = None

    @property
    def final_text(self) -> Optional[str]:
        if self.reviewer_response is not None:
            return self.reviewer_response.revised_text
        if self.annotator_response is not None:
            return self.annotator_response.annotated_text
        return None


@dataclass(frozen=True)
class ExperimentConfig:
    paradigm: Paradigm
    label: str
    annotator: ModelSpec
    reviewer: Optional[ModelSpec] = None
    reviewer_mode: bool = False
    retry: RetryPolicy = RetryPolicy()
    include_annotator_reasoning: bool = True
    templates: templates.TemplateSet = templates.TemplateSet()

    def __post_init__(self):
        if self.reviewer_mode and self.reviewer is None:
            raise ValueError("reviewer model spec is required when reviewer mode is on")
        inner = base_paradigm(self.paradigm)
        if isinstance(inner, FewShot):
            validate_examples(inner.examples, self.label)


AttemptSink = Callable[[AgentRole, AttemptRecord], None]


def run_sample(
    sample: Sample,
    config: ExperimentConfig,
    annotator_client: ChatClient,
    reviewer_client: Optional[ChatClient] = None,
    on_attempt: Optional[AttemptSink] = None,
) -> SampleOutcome:
    """Annotate one sample, optionally review it, and score both stages.

    Never raises: provider exhaustion, parse failures, and unexpected errors
    all land in the outcome's status and error class. With reviewer mode off
    the post-review metrics duplicate the pre-review ones. A reviewer failure
    keeps the annotator result. Samples without gold text are skipped outright.
    """
    outcome = SampleOutcome(sample=sample)
    if not sample.gold_tagged.strip():
        outcome.status = OutcomeStatus.SKIPPED_EMPTY_GOLD
        return outcome
    try:
        _run_sample_inner(sample, config, annotator_client, reviewer_client, on_attempt, outcome)
    except Exception:  # totality: a bug must not kill the batch
        outcome.status = OutcomeStatus.FAILED
        outcome.error_class = outcome.error_class or "Internal"
        outcome.metrics_pre = outcome.metrics_post = None
    return outcome


def _sink_for(on_attempt: Optional[AttemptSink], role: AgentRole):
    if on_attempt is None:
        return None
    return lambda record: on_attempt(role, record)


def _run_sample_inner(sample, config, annotator_client, reviewer_client, on_attempt, outcome):
    labels = {config.label}
    bundle = build_annotator_prompt(sample.text, config.paradigm, config.label, config.templates)
    request = ChatRequest(
        system=bundle.system_instruction,
        user=bundle.user_message,
        json_mode=annotator_client.spec.json_mode,
    )
    try:
        response = annotator_client.complete(
            request, config.retry, on_attempt=_sink_for(on_attempt, AgentRole.ANNOTATOR)
        )
    except ProviderError as exc:
        outcome.status = OutcomeStatus.FAILED
        outcome.error_class = exc.error_class.value
        return
    try:
        annotator = parse_agent_json(response.body_text, PromptSchema.ANNOTATOR)
    except MalformedJsonError:
        outcome.status = OutcomeStatus.FAILED
        outcome.error_class = "MalformedJson"
        return
    except SchemaMismatchError:
        outcome.status = OutcomeStatus.FAILED
        outcome.error_class = "SchemaMismatch"
        return

    outcome.annotator_response = annotator
    outcome.metrics_pre = evaluate_pair(sample.gold_tagged, annotator.annotated_text, labels)

    if not config.reviewer_mode:
        outcome.metrics_post = outcome.metrics_pre
        outcome.status = OutcomeStatus.OK
        return

    review_bundle = build_reviewer_prompt(
        sample.text,
        annotator,
        config.paradigm,
        config.label,
        config.templates,
        include_reasoning=config.include_annotator_reasoning,
    )
    review_request = ChatRequest(
        system=review_bundle.system_instruction,
        user=review_bundle.user_message,
        json_mode=reviewer_client.spec.json_mode,
    )
    try:
        review_response = reviewer_client.complete(
            review_request, config.retry, on_attempt=_sink_for(on_attempt, AgentRole.REVIEWER)
        )
        reviewer = parse_agent_json(review_response.body_text, PromptSchema.REVIEWER)
    except ProviderError as exc:
        outcome.status = OutcomeStatus.REVIEW_FAILED
        outcome.error_class = exc.error_class.value
        outcome.metrics_post = outcome.metrics_pre
        return
    except MalformedJsonError:
        outcome.status = OutcomeStatus.REVIEW_FAILED
        outcome.error_class = "MalformedJson"
        outcome.metrics_post = outcome.metrics_pre
        return
    except SchemaMismatchError:
        outcome.status = OutcomeStatus.REVIEW_FAILED
        outcome.error_class = "SchemaMismatch"
        outcome.metrics_post = outcome.metrics_pre
        return

    outcome.reviewer_response = reviewer
    outcome.metrics_post = evaluate_pair(sample.gold_tagged, reviewer.revised_text, labels)
    outcome.status = OutcomeStatus.OK
