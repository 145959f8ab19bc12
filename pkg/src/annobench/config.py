"""JSON (de)serialization for run configuration.

The same document format backs the CLI config file and the service's run
request, so an experiment started from either surface is reproducible from
one artifact.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .agents import (
    ExamplePair,
    ExperimentConfig,
    FewShot,
    FineTuned,
    FullContextCodebook,
    Paradigm,
    ZeroShot,
)
from .providers import ModelSpec, ProviderKind, RetryPolicy
from .templates import TemplateSet


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentConfig
    output_dir: str
    run_id: str
    workers: int = 4
    baseline_f1: float = 0.5

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if not (0.0 <= self.baseline_f1 <= 1.0):
            raise ConfigError("baseline_f1 must be in [0, 1]")
        if not self.run_id:
            raise ConfigError("run_id must be nonempty")


def _require(data: dict, key: str, ctx: str):
    if key not in data:
        raise ConfigError(f"{ctx}: missing required key {key!r}")
    return data[key]


def model_spec_from_dict(data: dict, ctx: str = "model") -> ModelSpec:
    try:
        return ModelSpec(
            provider_kind=ProviderKind(_require(data, "provider_kind", ctx)),
            model_id=_require(data, "model_id", ctx),
            base_url=data.get("base_url", ""),
            api_key_ref=data.get("api_key_ref", ""),
            temperature=float(data.get("temperature", 0.0)),
            max_output_tokens=int(data.get("max_output_tokens", 2048)),
            timeout_ms=int(data.get("timeout_ms", 60_000)),
            json_mode=bool(data.get("json_mode", True)),
            max_concurrency=int(data.get("max_concurrency", 4)),
        )
    except ValueError as exc:
        raise ConfigError(f"{ctx}: {exc}") from exc


def model_spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "provider_kind": spec.provider_kind.value,
        "model_id": spec.model_id,
        "base_url": spec.base_url,
        "api_key_ref": spec.api_key_ref,
        "temperature": spec.temperature,
        "max_output_tokens": spec.max_output_tokens,
        "timeout_ms": spec.timeout_ms,
        "json_mode": spec.json_mode,
        "max_concurrency": spec.max_concurrency,
    }


def retry_policy_from_dict(data: dict) -> RetryPolicy:
    try:
        return RetryPolicy(
            max_attempts=int(data.get("max_attempts", 4)),
            base_delay_ms=int(data.get("base_delay_ms", 500)),
            backoff_factor=float(data.get("backoff_factor", 2.0)),
            jitter_fraction=float(data.get("jitter_fraction", 0.2)),
        )
    except ValueError as exc:
        raise ConfigError(f"retry: {exc}") from exc


def retry_policy_to_dict(policy: RetryPolicy) -> dict:
    return {
        "max_attempts": policy.max_attempts,
        "base_delay_ms": policy.base_delay_ms,
        "backoff_factor": policy.backoff_factor,
        "jitter_fraction": policy.jitter_fraction,
    }


def paradigm_from_dict(data: dict) -> Paradigm:
    kind = _require(data, "kind", "paradigm")
    try:
        if kind == "zero_shot":
            return ZeroShot()
        if kind == "few_shot":
            examples = tuple(
                ExamplePair(_require(e, "text", "example"), _require(e, "gold", "example"))
                for e in _require(data, "examples", "paradigm")
            )
            return FewShot(examples)
        if kind == "full_context_codebook":
            return FullContextCodebook(_require(data, "codebook_text", "paradigm"))
        if kind == "fine_tuned":
            base = data.get("base_style")
            return FineTuned(
                tuned_model_id=_require(data, "tuned_model_id", "paradigm"),
                base_style=paradigm_from_dict(base) if base else ZeroShot(),
            )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"paradigm: {exc}") from exc
    raise ConfigError(f"paradigm: unknown kind {kind!r}")


def paradigm_to_dict(paradigm: Paradigm) -> dict:
    if isinstance(paradigm, ZeroShot):
        return {"kind": "zero_shot"}
    if isinstance(paradigm, FewShot):
        return {
            "kind": "few_shot",
            "examples": [
                {"text": e.source_text, "gold": e.gold_tagged} for e in paradigm.examples
            ],
        }
    if isinstance(paradigm, FullContextCodebook):
        return {"kind": "full_context_codebook", "codebook_text": paradigm.codebook_text}
    return {
        "kind": "fine_tuned",
        "tuned_model_id": paradigm.tuned_model_id,
        "base_style": paradigm_to_dict(paradigm.base_style),
    }


def _inject_content(
    paradigm_data: dict, codebook_text: Optional[str], examples: Optional[list[dict]]
) -> dict:
    """Fill codebook/examples supplied as separate files into the paradigm."""
    data = dict(paradigm_data)
    if data.get("kind") == "full_context_codebook" and codebook_text is not None:
        data["codebook_text"] = codebook_text
    if data.get("kind") == "few_shot" and examples is not None:
        data["examples"] = examples
    if data.get("kind") == "fine_tuned" and isinstance(data.get("base_style"), dict):
        data["base_style"] = _inject_content(data["base_style"], codebook_text, examples)
    return data


def experiment_from_dict(
    data: dict,
    codebook_text: Optional[str] = None,
    examples: Optional[list[dict]] = None,
) -> ExperimentConfig:
    paradigm = paradigm_from_dict(
        _inject_content(_require(data, "paradigm", "experiment"), codebook_text, examples)
    )
    reviewer_data = data.get("reviewer")
    template_data = data.get("templates") or {}
    unknown = set(template_data) - {
        "annotator_system",
        "annotator_user",
        "reviewer_system",
        "reviewer_user",
    }
    if unknown:
        raise ConfigError(f"templates: unknown names {sorted(unknown)}")
    try:
        return ExperimentConfig(
            paradigm=paradigm,
            label=data.get("label", "Metaphor"),
            annotator=model_spec_from_dict(_require(data, "annotator", "experiment"), "annotator"),
            reviewer=model_spec_from_dict(reviewer_data, "reviewer") if reviewer_data else None,
            reviewer_mode=bool(data.get("reviewer_mode", False)),
            retry=retry_policy_from_dict(data.get("retry") or {}),
            include_annotator_reasoning=bool(data.get("include_annotator_reasoning", True)),
            templates=TemplateSet(**template_data),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"experiment: {exc}") from exc


def experiment_to_dict(config: ExperimentConfig) -> dict:
    data = {
        "paradigm": paradigm_to_dict(config.paradigm),
        "label": config.label,
        "annotator": model_spec_to_dict(config.annotator),
        "reviewer": model_spec_to_dict(config.reviewer) if config.reviewer else None,
        "reviewer_mode": config.reviewer_mode,
        "retry": retry_policy_to_dict(config.retry),
        "include_annotator_reasoning": config.include_annotator_reasoning,
    }
    defaults = TemplateSet()
    overrides = {
        name: getattr(config.templates, name)
        for name in ("annotator_system", "annotator_user", "reviewer_system", "reviewer_user")
        if getattr(config.templates, name) != getattr(defaults, name)
    }
    if overrides:
        data["templates"] = overrides
    return data


def run_config_from_dict(
    data: dict,
    *,
    output_dir: Optional[str] = None,
    run_id: Optional[str] = None,
    workers: Optional[int] = None,
    codebook_text: Optional[str] = None,
    examples: Optional[list[dict]] = None,
) -> RunConfig:
    """Build a run configuration from its JSON document, with override hooks
    for values that arrive out of band (CLI flags, uploaded content ids)."""
    experiment = experiment_from_dict(
        _require(data, "experiment", "config"), codebook_text, examples
    )
    return RunConfig(
        experiment=experiment,
        output_dir=str(output_dir if output_dir is not None else data.get("output_dir", "runs")),
        run_id=str(run_id if run_id is not None else data.get("run_id", "")),
        workers=int(workers if workers is not None else data.get("workers", 4)),
        baseline_f1=float(data.get("baseline_f1", 0.5)),
    )


def run_config_to_dict(config: RunConfig) -> dict:
    return {
        "experiment": experiment_to_dict(config.experiment),
        "output_dir": config.output_dir,
        "run_id": config.run_id,
        "workers": config.workers,
        "baseline_f1": config.baseline_f1,
    }


def effective_annotator_spec(config: ExperimentConfig) -> ModelSpec:
    """A fine-tuned paradigm carries the model that actually annotates."""
    if isinstance(config.paradigm, FineTuned):
        return replace(config.annotator, model_id=config.paradigm.tuned_model_id)
    return config.annotator
