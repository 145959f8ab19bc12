"""Default prompt templates and placeholder substitution.

Templates use ``{{NAME}}`` placeholders. Supported names: TEXT, LABEL,
CODEBOOK, EXAMPLES, ANNOTATED, REASONING. Unknown placeholders are left
untouched so a custom template degrades visibly instead of silently.
Any template can be overridden from a file; the defaults below ship with
the package.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

DEFAULT_ANNOTATOR_SYSTEM = """\
You are an expert linguistic annotator. Your task is to find every {{LABEL}} \
expression in the text you are given and wrap it in <{{LABEL}}>...</{{LABEL}}> tags.

Rules:
- Reproduce the input text exactly, character for character, changing nothing except inserting tags.
- Tag every expression that qualifies as {{LABEL}}; leave everything else untagged.
- Do not nest tags and do not add attributes to them.
{{CODEBOOK}}{{EXAMPLES}}
Respond with a single JSON object containing exactly these string fields:
  "reasoning": a brief justification of your tagging decisions
  "annotated_text": the full input text with tags inserted

Return only the JSON object, nothing else.
"""

DEFAULT_ANNOTATOR_USER = "{{TEXT}}"

DEFAULT_REVIEWER_SYSTEM = """\
You are a senior annotation reviewer. You will receive a source text and a \
first-pass annotation in which {{LABEL}} expressions are wrapped in \
<{{LABEL}}>...</{{LABEL}}> tags. Evaluate every tag against the annotation \
rules, looking for false positives and for missed {{LABEL}} expressions.
{{CODEBOOK}}
Respond with a single JSON object containing exactly these string fields:
  "critique": your assessment of the first-pass annotation
  "revised_text": the full source text with corrected tags; always return the
  complete text, even when you change nothing

Return only the JSON object, nothing else.
"""

DEFAULT_REVIEWER_USER = """\
Source text:
{{TEXT}}

First-pass annotation:
{{ANNOTATED}}
{{REASONING}}"""

CODEBOOK_BLOCK = """

Apply the following codebook when deciding what qualifies:
---
{{CODEBOOK}}
---
"""

EXAMPLES_HEADER = "\n\nExamples of correctly annotated texts:\n"

REASONING_BLOCK = """
Annotator's reasoning:
{{REASONING}}
"""


_PLACEHOLDER_RE = re.compile(r"\{\{([A-Z_]+)\}\}")


def render(template: str, values: dict[str, str]) -> str:
    # single pass over the template only: substituted values are never
    # rescanned, so placeholder-shaped text inside a codebook or a model
    # response cannot trigger a second substitution
    return _PLACEHOLDER_RE.sub(lambda m: values.get(m.group(1), m.group(0)), template)


@dataclass(frozen=True)
class TemplateSet:
    annotator_system: str = DEFAULT_ANNOTATOR_SYSTEM
    annotator_user: str = DEFAULT_ANNOTATOR_USER
    reviewer_system: str = DEFAULT_REVIEWER_SYSTEM
    reviewer_user: str = DEFAULT_REVIEWER_USER


TEMPLATE_FILE_NAMES = (
    "annotator_system",
    "annotator_user",
    "reviewer_system",
    "reviewer_user",
)


def load_template_dir(path: str | Path) -> TemplateSet:
    """Override defaults with ``<name>.txt`` files found in a directory."""
    directory = Path(path)
    overrides = {}
    for name in TEMPLATE_FILE_NAMES:
        candidate = directory / f"{name}.txt"
        if candidate.is_file():
            overrides[name] = candidate.read_text(encoding="utf-8")
    return TemplateSet(**overrides)
