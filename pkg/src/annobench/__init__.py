"""Reflective dual-agent annotation workbench with token-level evaluation."""

__version__ = "0.1.0"

from .evaluator import evaluate_pair, macro_average, metrics, tokenize
from .tagspan import SpanDoc, parse_tagged, render_tagged, strip_tags

__all__ = [
    "__version__",
    "SpanDoc",
    "parse_tagged",
    "render_tagged",
    "strip_tags",
    "tokenize",
    "metrics",
    "evaluate_pair",
    "macro_average",
]
