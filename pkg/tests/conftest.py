import json

import pytest

from annobench.agents import (
    AnnotatorResponse,
    ExperimentConfig,
    Sample,
    ZeroShot,
    build_reviewer_prompt,
)
from annobench.config import RunConfig
from annobench.providers import ModelSpec, ProviderKind, RetryPolicy, mock_provider
from annobench.runner import Clients

MOCK_SPEC = ModelSpec(provider_kind=ProviderKind.MOCK, model_id="mock-model")
FAST_RETRY = RetryPolicy(max_attempts=4, base_delay_ms=1)


def annotator_body(tagged: str, reasoning: str = "scripted") -> str:
    return json.dumps({"reasoning": reasoning, "annotated_text": tagged})


def reviewer_body(revised: str, critique: str = "scripted") -> str:
    return json.dumps({"critique": critique, "revised_text": revised})


def make_corpus(n: int) -> list[Sample]:
    """Deterministic fixture corpus: one metaphor verb per sample."""
    samples = []
    for i in range(n):
        text = f"sample {i} where the argument devoured the evidence"
        gold = text.replace("devoured", "<Metaphor>devoured</Metaphor>")
        samples.append(Sample(index=i, id=f"s{i}", text=text, gold_tagged=gold))
    return samples


def build_mock_clients(
    samples,
    annotator_tagged: dict[str, str],
    reviewer_revised: dict[str, str] | None = None,
    label: str = "Metaphor",
    paradigm=ZeroShot(),
    annotator_fault=None,
) -> Clients:
    """Fixture-keyed mock clients: annotator keys are sample texts, reviewer
    keys are the exact reviewer prompts those annotations will produce."""
    ann_fixtures = {s.text: annotator_body(annotator_tagged[s.id]) for s in samples}
    annotator = mock_provider(fixtures=ann_fixtures, fault=annotator_fault)
    reviewer = None
    if reviewer_revised is not None:
        rev_fixtures = {}
        for s in samples:
            ann = AnnotatorResponse("scripted", annotator_tagged[s.id])
            bundle = build_reviewer_prompt(s.text, ann, paradigm, label)
            rev_fixtures[bundle.user_message] = reviewer_body(reviewer_revised[s.id])
        reviewer = mock_provider(fixtures=rev_fixtures)
    return Clients(annotator=annotator, reviewer=reviewer)


def make_run_config(
    tmp_path, run_id="test-run", workers=1, reviewer_mode=False, retry=FAST_RETRY
) -> RunConfig:
    experiment = ExperimentConfig(
        paradigm=ZeroShot(),
        label="Metaphor",
        annotator=MOCK_SPEC,
        reviewer=MOCK_SPEC if reviewer_mode else None,
        reviewer_mode=reviewer_mode,
        retry=retry,
    )
    return RunConfig(
        experiment=experiment, output_dir=str(tmp_path), run_id=run_id, workers=workers
    )


@pytest.fixture
def corpus20():
    return make_corpus(20)
