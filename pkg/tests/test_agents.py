import json

import pytest

from annobench.agents import (
    AgentRole,
    AnnotatorResponse,
    ExamplePair,
    ExperimentConfig,
    FewShot,
    FineTuned,
    FullContextCodebook,
    MalformedJsonError,
    OutcomeStatus,
    PromptSchema,
    ReviewerResponse,
    Sample,
    SchemaMismatchError,
    ZeroShot,
    build_annotator_prompt,
    build_reviewer_prompt,
    parse_agent_json,
    run_sample,
    validate_examples,
)
from annobench.providers import (
    FaultScript,
    ModelSpec,
    ProviderKind,
    RetryPolicy,
    mock_provider,
)

MOCK_SPEC = ModelSpec(provider_kind=ProviderKind.MOCK, model_id="m")
FAST_RETRY = RetryPolicy(max_attempts=2, base_delay_ms=1)


def annotator_body(tagged, reasoning="because"):
    return json.dumps({"reasoning": reasoning, "annotated_text": tagged})


def reviewer_body(revised, critique="looks off"):
    return json.dumps({"critique": critique, "revised_text": revised})


def config(**kw):
    defaults = dict(
        paradigm=ZeroShot(),
        label="Metaphor",
        annotator=MOCK_SPEC,
        retry=FAST_RETRY,
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestPrompts:
    def test_zero_shot_has_no_examples_or_codebook(self):
        bundle = build_annotator_prompt("some text", ZeroShot(), "Metaphor")
        assert "Example" not in bundle.system_instruction
        assert "codebook" not in bundle.system_instruction.lower()
        assert bundle.user_message == "some text"
        assert bundle.schema == PromptSchema.ANNOTATOR

    def test_label_and_contract_in_system(self):
        bundle = build_annotator_prompt("t", ZeroShot(), "Metaphor")
        assert "<Metaphor>" in bundle.system_instruction
        assert '"reasoning"' in bundle.system_instruction
        assert '"annotated_text"' in bundle.system_instruction

    def test_few_shot_examples_verbatim(self):
        examples = tuple(
            ExamplePair(f"source {i}", f"source <Metaphor>{i}</Metaphor>") for i in range(3)
        )
        bundle = build_annotator_prompt("t", FewShot(examples), "Metaphor")
        for ex in examples:
            assert ex.source_text in bundle.system_instruction
            assert ex.gold_tagged in bundle.system_instruction

    def test_codebook_embedded_whole(self):
        codebook = "RULE 1: tag it\n" + "x" * 40_000
        bundle = build_annotator_prompt("t", FullContextCodebook(codebook), "Metaphor")
        assert codebook in bundle.system_instruction

    def test_fine_tuned_delegates_prompt_shape(self):
        plain = build_annotator_prompt("t", ZeroShot(), "Metaphor")
        tuned = build_annotator_prompt("t", FineTuned("ft-123"), "Metaphor")
        assert tuned.system_instruction == plain.system_instruction
        assert tuned.user_message == plain.user_message

    def test_prompt_determinism(self):
        a = build_annotator_prompt("text", ZeroShot(), "Metaphor")
        b = build_annotator_prompt("text", ZeroShot(), "Metaphor")
        assert a == b

    def test_reviewer_prompt_contains_original_and_annotation(self):
        ann = AnnotatorResponse("thought", "a <Metaphor>b</Metaphor>")
        bundle = build_reviewer_prompt("a b", ann, ZeroShot(), "Metaphor")
        assert "a b" in bundle.user_message
        assert "a <Metaphor>b</Metaphor>" in bundle.user_message
        assert "thought" in bundle.user_message
        assert bundle.schema == PromptSchema.REVIEWER
        assert "codebook" not in bundle.system_instruction.lower()

    def test_reviewer_prompt_can_hide_reasoning(self):
        ann = AnnotatorResponse("secret thought", "a b")
        bundle = build_reviewer_prompt("a b", ann, ZeroShot(), "Metaphor", include_reasoning=False)
        assert "secret thought" not in bundle.user_message

    def test_reviewer_sees_same_codebook(self):
        paradigm = FullContextCodebook("THE CODEBOOK BODY")
        ann = AnnotatorResponse("r", "a b")
        bundle = build_reviewer_prompt("a b", ann, paradigm, "Metaphor")
        assert "THE CODEBOOK BODY" in bundle.system_instruction


class TestExampleValidation:
    def test_consistent_examples_pass(self):
        validate_examples(
            (ExamplePair("he flew high", "he <Metaphor>flew</Metaphor> high"),), "Metaphor"
        )

    def test_mismatched_example_rejected(self):
        with pytest.raises(ValueError):
            validate_examples(
                (ExamplePair("he flew high", "she <Metaphor>flew</Metaphor> high"),),
                "Metaphor",
            )

    def test_few_shot_requires_examples(self):
        with pytest.raises(ValueError):
            FewShot(())


class TestParseAgentJson:
    def test_annotator_direct(self):
        resp = parse_agent_json(
            '{"reasoning":"metaphor per codebook","annotated_text":"a <Metaphor>b</Metaphor>"}',
            PromptSchema.ANNOTATOR,
        )
        assert resp == AnnotatorResponse("metaphor per codebook", "a <Metaphor>b</Metaphor>")

    def test_truncated_json_is_malformed(self):
        with pytest.raises(MalformedJsonError):
            parse_agent_json('{"Reasoning":"x","annotated', PromptSchema.ANNOTATOR)

    def test_fenced_block_with_display_keys(self):
        raw = '```json\n{"Critique":"ok","Revised Text":"a b"}\n```'
        resp = parse_agent_json(raw, PromptSchema.REVIEWER)
        assert resp == ReviewerResponse("ok", "a b")

    def test_plain_fence_without_language(self):
        raw = '```\n{"reasoning":"r","annotated_text":"t"}\n```'
        assert parse_agent_json(raw, PromptSchema.ANNOTATOR).annotated_text == "t"

    def test_extra_keys_ignored(self):
        raw = '{"reasoning":"r","annotated_text":"t","confidence":0.9}'
        assert parse_agent_json(raw, PromptSchema.ANNOTATOR).reasoning == "r"

    def test_missing_field_is_schema_mismatch(self):
        with pytest.raises(SchemaMismatchError):
            parse_agent_json('{"reasoning":"r"}', PromptSchema.ANNOTATOR)

    def test_non_string_field_is_schema_mismatch(self):
        with pytest.raises(SchemaMismatchError):
            parse_agent_json('{"reasoning":1,"annotated_text":"t"}', PromptSchema.ANNOTATOR)

    def test_non_object_is_schema_mismatch(self):
        with pytest.raises(SchemaMismatchError):
            parse_agent_json("[1,2]", PromptSchema.ANNOTATOR)

    def test_round_trip_of_rendered_response(self):
        body = json.dumps({"reasoning": "r é", "annotated_text": "x <Metaphor>y</Metaphor>"})
        resp = parse_agent_json(body, PromptSchema.ANNOTATOR)
        assert resp == AnnotatorResponse("r é", "x <Metaphor>y</Metaphor>")


class TestRunSample:
    def sample(self, text="he devoured the book", gold="he <Metaphor>devoured</Metaphor> the book"):
        return Sample(index=0, id="s0", text=text, gold_tagged=gold)

    def test_perfect_annotator_reviewer_off(self):
        s = self.sample()
        client = mock_provider(fixtures={s.text: annotator_body(s.gold_tagged)})
        outcome = run_sample(s, config(), client)
        assert outcome.status == OutcomeStatus.OK
        assert outcome.metrics_pre.f1 == 1.0
        assert outcome.metrics_post == outcome.metrics_pre
        assert client.transport.call_count == 1

    def test_reviewer_correction_improves_f1(self):
        s = self.sample()
        under_tagged = annotator_body(s.text)  # annotator missed the tag
        ann = AnnotatorResponse("because", s.text)
        review_bundle = build_reviewer_prompt(s.text, ann, ZeroShot(), "Metaphor")
        annotator = mock_provider(fixtures={s.text: under_tagged})
        reviewer = mock_provider(
            fixtures={review_bundle.user_message: reviewer_body(s.gold_tagged)}
        )
        outcome = run_sample(
            s, config(reviewer=MOCK_SPEC, reviewer_mode=True), annotator, reviewer
        )
        assert outcome.status == OutcomeStatus.OK
        assert outcome.metrics_post.f1 > outcome.metrics_pre.f1
        assert annotator.transport.call_count == 1
        assert reviewer.transport.call_count == 1

    def test_identity_reviewer_keeps_metrics(self):
        s = self.sample()
        tagged = s.gold_tagged
        ann = AnnotatorResponse("because", tagged)
        review_bundle = build_reviewer_prompt(s.text, ann, ZeroShot(), "Metaphor")
        annotator = mock_provider(fixtures={s.text: annotator_body(tagged)})
        reviewer = mock_provider(fixtures={review_bundle.user_message: reviewer_body(tagged)})
        outcome = run_sample(
            s, config(reviewer=MOCK_SPEC, reviewer_mode=True), annotator, reviewer
        )
        assert outcome.metrics_post == outcome.metrics_pre

    def test_truncated_all_attempts_fails(self):
        s = self.sample()
        body = annotator_body(s.gold_tagged)
        client = mock_provider(
            fixtures={s.text: body}, fault=FaultScript(truncate_after=10)
        )
        outcome = run_sample(s, config(), client)
        assert outcome.status == OutcomeStatus.FAILED
        assert outcome.error_class == "Truncated"
        assert outcome.metrics_pre is None and outcome.metrics_post is None

    def test_malformed_but_complete_body_not_retried(self):
        s = self.sample()
        client = mock_provider(fixtures={s.text: "this is not json"})
        outcome = run_sample(s, config(), client)
        assert outcome.status == OutcomeStatus.FAILED
        assert outcome.error_class == "MalformedJson"
        assert client.transport.call_count == 1

    def test_reviewer_failure_preserves_annotator_result(self):
        s = self.sample()
        annotator = mock_provider(fixtures={s.text: annotator_body(s.gold_tagged)})
        reviewer = mock_provider(defaults=["not json at all"])
        outcome = run_sample(
            s, config(reviewer=MOCK_SPEC, reviewer_mode=True), annotator, reviewer
        )
        assert outcome.status == OutcomeStatus.REVIEW_FAILED
        assert outcome.metrics_pre.f1 == 1.0
        assert outcome.metrics_post == outcome.metrics_pre
        assert outcome.annotator_response is not None
        assert outcome.reviewer_response is None

    def test_empty_gold_skipped_without_calls(self):
        s = Sample(index=0, id="s0", text="some text", gold_tagged="")
        client = mock_provider(fixtures={})
        outcome = run_sample(s, config(), client)
        assert outcome.status == OutcomeStatus.SKIPPED_EMPTY_GOLD
        assert client.transport.call_count == 0

    def test_attempt_sink_sees_each_role(self):
        s = self.sample()
        ann = AnnotatorResponse("because", s.gold_tagged)
        review_bundle = build_reviewer_prompt(s.text, ann, ZeroShot(), "Metaphor")
        annotator = mock_provider(fixtures={s.text: annotator_body(s.gold_tagged)})
        reviewer = mock_provider(
            fixtures={review_bundle.user_message: reviewer_body(s.gold_tagged)}
        )
        seen = []
        run_sample(
            s,
            config(reviewer=MOCK_SPEC, reviewer_mode=True),
            annotator,
            reviewer,
            on_attempt=lambda role, rec: seen.append((role, rec.attempt)),
        )
        assert seen == [(AgentRole.ANNOTATOR, 1), (AgentRole.REVIEWER, 1)]

    def test_config_requires_reviewer_spec(self):
        with pytest.raises(ValueError):
            config(reviewer_mode=True)
