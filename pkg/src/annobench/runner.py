"""Batch orchestration: dataset ingestion, concurrent sample execution with
live events, an append-only interaction log, and CSV export."""

from __future__ import annotations

import csv
import io
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Union

from .agents import (
    AgentRole,
    AnnotatorResponse,
    ExamplePair,
    OutcomeStatus,
    ReviewerResponse,
    Sample,
    SampleOutcome,
    run_sample,
)
from .config import RunConfig, effective_annotator_spec, run_config_from_dict, run_config_to_dict
from .evaluator import (
    ConfusionCounts,
    MetricFlag,
    NoEvaluableSamplesError,
    SampleMetrics,
    macro_average,
    micro_average,
)
from .providers import AttemptRecord, ChatClient

DATASET_HEADER = ["id", "text", "gold"]
EXAMPLES_HEADER = ["text", "gold"]

EXPORT_HEADER = [
    "id",
    "text",
    "gold",
    "annotator_text",
    "annotator_reasoning",
    "reviewer_critique",
    "final_text",
    "p_pre",
    "r_pre",
    "f1_pre",
    "p_post",
    "r_post",
    "f1_post",
    "status",
]


class DatasetError(ValueError):
    pass


class MissingHeaderError(DatasetError):
    pass


class DuplicateIdError(DatasetError):
    pass


class RowFieldCountError(DatasetError):
    pass


class LogReadError(ValueError):
    pass


# --- ingestion ---------------------------------------------------------------


def _check_header(got: Optional[list[str]], want: list[str], what: str) -> None:
    if got is None:
        raise MissingHeaderError(f"{what} is empty; expected header {','.join(want)!r}")
    if got != want:
        missing = [c for c in want if c not in got]
        if missing:
            raise MissingHeaderError(f"{what} header is missing column {missing[0]!r}")
        raise MissingHeaderError(
            f"{what} header must be exactly {','.join(want)!r}, got {','.join(got)!r}"
        )


def parse_dataset_csv(text: str) -> list[Sample]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    _check_header(header, DATASET_HEADER, "dataset")
    samples: list[Sample] = []
    seen: set[str] = set()
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(DATASET_HEADER):
            raise RowFieldCountError(
                f"dataset line {line}: expected {len(DATASET_HEADER)} fields, got {len(row)}"
            )
        sample_id, sample_text, gold = row
        if sample_id in seen:
            raise DuplicateIdError(f"dataset line {line}: duplicate id {sample_id!r}")
        seen.add(sample_id)
        samples.append(Sample(index=len(samples), id=sample_id, text=sample_text, gold_tagged=gold))
    return samples


def load_dataset_csv(path: Union[str, Path]) -> list[Sample]:
    return parse_dataset_csv(Path(path).read_text(encoding="utf-8"))


def parse_examples_csv(text: str) -> tuple[ExamplePair, ...]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    _check_header(header, EXAMPLES_HEADER, "examples file")
    pairs = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise RowFieldCountError(f"examples line {line}: expected 2 fields, got {len(row)}")
        pairs.append(ExamplePair(source_text=row[0], gold_tagged=row[1]))
    return tuple(pairs)


def load_examples_csv(path: Union[str, Path]) -> tuple[ExamplePair, ...]:
    return parse_examples_csv(Path(path).read_text(encoding="utf-8"))


# --- session log ---------------------------------------------------------------


@dataclass(frozen=True)
class LogEntry:
    timestamp: str
    run_id: str
    sample_id: str
    agent_role: str
    attempt: int
    request_system: str
    request_user: str
    raw_response: str
    error_class: Optional[str] = None
    http_status: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "run_id": self.run_id,
            "sample_id": self.sample_id,
            "agent_role": self.agent_role,
            "attempt": self.attempt,
            "request_system": self.request_system,
            "request_user": self.request_user,
            "raw_response": self.raw_response,
            "error_class": self.error_class,
            "http_status": self.http_status,
        }


def _utc_now_ms() -> str:
    now = datetime.now(timezone.utc)
    return f"{now:%Y-%m-%dT%H:%M:%S}.{now.microsecond // 1000:03d}Z"


class LogWriter:
    """Serialized JSON-lines writer; timestamps never decrease within a file."""

    def __init__(self, path: Union[str, Path], run_id: str):
        self.path = Path(path)
        self.run_id = run_id
        self._lock = threading.Lock()
        self._last_ts = ""
        self._fh = open(self.path, "a", encoding="utf-8")

    def record(self, sample_id: str, role: AgentRole, rec: AttemptRecord) -> None:
        with self._lock:
            ts = max(_utc_now_ms(), self._last_ts)
            self._last_ts = ts
            entry = LogEntry(
                timestamp=ts,
                run_id=self.run_id,
                sample_id=sample_id,
                agent_role=role.value,
                attempt=rec.attempt,
                request_system=rec.request.system,
                request_user=rec.request.user,
                raw_response=rec.response.body_text if rec.response else "",
                error_class=rec.error.error_class.value if rec.error else None,
                http_status=rec.response.http_status if rec.response else None,
            )
            self._fh.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")
            self._fh.flush()

    def close(self) -> None:
        with self._lock:
            self._fh.close()


def log_path(output_dir: Union[str, Path], run_id: str) -> Path:
    return Path(output_dir) / run_id / "session.jsonl"


def read_log(path: Union[str, Path]) -> tuple[list[LogEntry], list[str]]:
    """Load a session log, dropping a truncated final line with a warning.

    A malformed line anywhere else means real corruption and raises.
    """
    raw = Path(path).read_text(encoding="utf-8")
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    entries: list[LogEntry] = []
    warnings: list[str] = []
    for i, line in enumerate(lines):
        try:
            data = json.loads(line)
            entries.append(LogEntry(**data))
        except (json.JSONDecodeError, TypeError) as exc:
            if i == len(lines) - 1:
                warnings.append("TruncatedTail: dropped incomplete final log line")
            else:
                raise LogReadError(f"corrupt log line {i + 1}: {exc}") from exc
    return entries, warnings


# --- events --------------------------------------------------------------------


@dataclass(frozen=True)
class SampleEvent:
    index: int
    id: str
    f1_pre: Optional[float]
    f1_post: Optional[float]
    status: str
    completed: int
    total: int
    macro_f1_pre: Optional[float]
    macro_f1_post: Optional[float]

    def to_dict(self) -> dict:
        return {
            "type": "sample",
            "index": self.index,
            "id": self.id,
            "f1_pre": self.f1_pre,
            "f1_post": self.f1_post,
            "status": self.status,
            "completed": self.completed,
            "total": self.total,
            "progress": self.completed / self.total if self.total else 0.0,
            "macro_f1_pre": self.macro_f1_pre,
            "macro_f1_post": self.macro_f1_post,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


@dataclass(frozen=True)
class SummaryEvent:
    run_id: str
    total: int
    status_counts: dict[str, int]
    macro_pre: Optional[tuple[float, float, float]]
    macro_post: Optional[tuple[float, float, float]]
    micro_pre: Optional[tuple[float, float, float]]
    micro_post: Optional[tuple[float, float, float]]

    def to_dict(self) -> dict:
        return {
            "type": "summary",
            "run_id": self.run_id,
            "total": self.total,
            "status_counts": self.status_counts,
            "macro_pre": _triple_dict(self.macro_pre),
            "macro_post": _triple_dict(self.macro_post),
            "micro_pre": _triple_dict(self.micro_pre),
            "micro_post": _triple_dict(self.micro_post),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


Event = Union[SampleEvent, SummaryEvent]
EventSink = Callable[[Event], None]


def _triple_dict(t: Optional[tuple[float, float, float]]) -> Optional[dict]:
    if t is None:
        return None
    return {"precision": t[0], "recall": t[1], "f1": t[2]}


def _triple_from_dict(d: Optional[dict]) -> Optional[tuple[float, float, float]]:
    if d is None:
        return None
    return (d["precision"], d["recall"], d["f1"])


# --- summary -------------------------------------------------------------------


@dataclass
class RunSummary:
    run_id: str
    config: RunConfig
    outcomes: list[SampleOutcome]
    macro_pre: Optional[tuple[float, float, float]]
    macro_post: Optional[tuple[float, float, float]]
    micro_pre: Optional[tuple[float, float, float]]
    micro_post: Optional[tuple[float, float, float]]
    status_counts: dict[str, int]
    started_at: str
    finished_at: str
    completed: bool

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "completed": self.completed,
            "config": run_config_to_dict(self.config),
            "status_counts": self.status_counts,
            "macro_pre": _triple_dict(self.macro_pre),
            "macro_post": _triple_dict(self.macro_post),
            "micro_pre": _triple_dict(self.micro_pre),
            "micro_post": _triple_dict(self.micro_post),
            "outcomes": [_outcome_to_dict(o) for o in self.outcomes],
        }

    def to_summary_event(self) -> SummaryEvent:
        return SummaryEvent(
            run_id=self.run_id,
            total=len(self.outcomes),
            status_counts=self.status_counts,
            macro_pre=self.macro_pre,
            macro_post=self.macro_post,
            micro_pre=self.micro_pre,
            micro_post=self.micro_post,
        )


def metrics_to_dict(m: Optional[SampleMetrics]) -> Optional[dict]:
    if m is None:
        return None
    return {
        "precision": m.precision,
        "recall": m.recall,
        "f1": m.f1,
        "tp": m.counts.tp,
        "fp": m.counts.fp,
        "fn": m.counts.fn,
        "tn": m.counts.tn,
        "alignment_coverage": m.alignment_coverage,
        "flags": sorted(f.value for f in m.flags),
    }


def metrics_from_dict(d: Optional[dict]) -> Optional[SampleMetrics]:
    if d is None:
        return None
    return SampleMetrics(
        precision=d["precision"],
        recall=d["recall"],
        f1=d["f1"],
        counts=ConfusionCounts(d["tp"], d["fp"], d["fn"], d["tn"]),
        alignment_coverage=d["alignment_coverage"],
        flags=frozenset(MetricFlag(f) for f in d["flags"]),
    )


def _outcome_to_dict(o: SampleOutcome) -> dict:
    return {
        "index": o.sample.index,
        "id": o.sample.id,
        "text": o.sample.text,
        "gold": o.sample.gold_tagged,
        "annotator": (
            {"reasoning": o.annotator_response.reasoning, "annotated_text": o.annotator_response.annotated_text}
            if o.annotator_response
            else None
        ),
        "reviewer": (
            {"critique": o.reviewer_response.critique, "revised_text": o.reviewer_response.revised_text}
            if o.reviewer_response
            else None
        ),
        "metrics_pre": metrics_to_dict(o.metrics_pre),
        "metrics_post": metrics_to_dict(o.metrics_post),
        "status": o.status.value,
        "error_class": o.error_class,
    }


def _outcome_from_dict(d: dict) -> SampleOutcome:
    sample = Sample(index=d["index"], id=d["id"], text=d["text"], gold_tagged=d["gold"])
    annotator = (
        AnnotatorResponse(d["annotator"]["reasoning"], d["annotator"]["annotated_text"])
        if d.get("annotator")
        else None
    )
    reviewer = (
        ReviewerResponse(d["reviewer"]["critique"], d["reviewer"]["revised_text"])
        if d.get("reviewer")
        else None
    )
    return SampleOutcome(
        sample=sample,
        annotator_response=annotator,
        reviewer_response=reviewer,
        metrics_pre=metrics_from_dict(d.get("metrics_pre")),
        metrics_post=metrics_from_dict(d.get("metrics_post")),
        status=OutcomeStatus(d["status"]),
        error_class=d.get("error_class"),
    )


def summary_from_dict(data: dict) -> RunSummary:
    return RunSummary(
        run_id=data["run_id"],
        config=run_config_from_dict(data["config"]),
        outcomes=[_outcome_from_dict(o) for o in data["outcomes"]],
        macro_pre=_triple_from_dict(data.get("macro_pre")),
        macro_post=_triple_from_dict(data.get("macro_post")),
        micro_pre=_triple_from_dict(data.get("micro_pre")),
        micro_post=_triple_from_dict(data.get("micro_post")),
        status_counts=data["status_counts"],
        started_at=data["started_at"],
        finished_at=data["finished_at"],
        completed=data["completed"],
    )


def summary_path(output_dir: Union[str, Path], run_id: str) -> Path:
    return Path(output_dir) / run_id / "summary.json"


def load_summary(path: Union[str, Path]) -> RunSummary:
    with open(path, encoding="utf-8") as fh:
        return summary_from_dict(json.load(fh))


# --- batch execution -----------------------------------------------------------


@dataclass
class Clients:
    annotator: ChatClient
    reviewer: Optional[ChatClient] = None


def build_clients(config: RunConfig) -> Clients:
    annotator = ChatClient(effective_annotator_spec(config.experiment))
    reviewer = ChatClient(config.experiment.reviewer) if config.experiment.reviewer else None
    return Clients(annotator=annotator, reviewer=reviewer)


def _evaluable_metrics(outcomes, attr) -> list[SampleMetrics]:
    return [
        getattr(o, attr)
        for o in outcomes
        if getattr(o, attr) is not None
        and MetricFlag.EMPTY_GOLD not in getattr(o, attr).flags
    ]


def _safe_macro(metrics_list) -> Optional[tuple[float, float, float]]:
    try:
        return macro_average(metrics_list)
    except NoEvaluableSamplesError:
        return None


def _safe_micro(metrics_list) -> Optional[tuple[float, float, float]]:
    try:
        return micro_average(metrics_list)
    except NoEvaluableSamplesError:
        return None


def run_batch(
    config: RunConfig,
    dataset: list[Sample],
    clients: Clients,
    event_sink: Optional[EventSink] = None,
    *,
    cancel_event: Optional[threading.Event] = None,
    outcome_sink: Optional[Callable[[SampleOutcome], None]] = None,
) -> RunSummary:
    """Run every sample through the agent workflow with bounded concurrency.

    Per-sample failures are recorded, never fatal. One SampleEvent is emitted
    per completed sample and one SummaryEvent at the end; outcome order in the
    returned summary follows the dataset regardless of completion timing.
    """
    if not dataset:
        raise DatasetError("dataset is empty")
    run_dir = Path(config.output_dir) / config.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    writer = LogWriter(run_dir / "session.jsonl", config.run_id)
    started_at = _utc_now_ms()

    outcomes: dict[int, SampleOutcome] = {}
    emit_lock = threading.Lock()
    total = len(dataset)

    def work(sample: Sample) -> None:
        if cancel_event is not None and cancel_event.is_set():
            return
        outcome = run_sample(
            sample,
            config.experiment,
            clients.annotator,
            clients.reviewer,
            on_attempt=lambda role, rec: writer.record(sample.id, role, rec),
        )
        with emit_lock:
            outcomes[sample.index] = outcome
            if outcome_sink is not None:
                outcome_sink(outcome)
            if event_sink is not None:
                pre = _evaluable_metrics(outcomes.values(), "metrics_pre")
                post = _evaluable_metrics(outcomes.values(), "metrics_post")
                macro_pre = _safe_macro(pre)
                macro_post = _safe_macro(post)
                event_sink(
                    SampleEvent(
                        index=sample.index,
                        id=sample.id,
                        f1_pre=outcome.metrics_pre.f1 if outcome.metrics_pre else None,
                        f1_post=outcome.metrics_post.f1 if outcome.metrics_post else None,
                        status=outcome.status.value,
                        completed=len(outcomes),
                        total=total,
                        macro_f1_pre=macro_pre[2] if macro_pre else None,
                        macro_f1_post=macro_post[2] if macro_post else None,
                    )
                )

    try:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            list(pool.map(work, dataset))
    finally:
        writer.close()

    ordered = [outcomes[i] for i in sorted(outcomes)]
    status_counts = {status.value: 0 for status in OutcomeStatus}
    for o in ordered:
        status_counts[o.status.value] += 1
    pre = _evaluable_metrics(ordered, "metrics_pre")
    post = _evaluable_metrics(ordered, "metrics_post")
    summary = RunSummary(
        run_id=config.run_id,
        config=config,
        outcomes=ordered,
        macro_pre=_safe_macro(pre),
        macro_post=_safe_macro(post),
        micro_pre=_safe_micro(pre),
        micro_post=_safe_micro(post),
        status_counts=status_counts,
        started_at=started_at,
        finished_at=_utc_now_ms(),
        completed=len(ordered) == total,
    )
    with open(summary_path(config.output_dir, config.run_id), "w", encoding="utf-8") as fh:
        json.dump(summary.to_dict(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    if event_sink is not None:
        event_sink(summary.to_summary_event())
    return summary


# --- export --------------------------------------------------------------------


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.4f}"


def export_csv(summary: RunSummary) -> bytes:
    """Frozen-schema CSV of every outcome; metrics to 4 decimals, LF endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EXPORT_HEADER)
    for o in summary.outcomes:
        pre, post = o.metrics_pre, o.metrics_post
        writer.writerow(
            [
                o.sample.id,
                o.sample.text,
                o.sample.gold_tagged,
                o.annotator_response.annotated_text if o.annotator_response else "",
                o.annotator_response.reasoning if o.annotator_response else "",
                o.reviewer_response.critique if o.reviewer_response else "",
                o.final_text or "",
                _fmt(pre.precision if pre else None),
                _fmt(pre.recall if pre else None),
                _fmt(pre.f1 if pre else None),
                _fmt(post.precision if post else None),
                _fmt(post.recall if post else None),
                _fmt(post.f1 if post else None),
                o.status.value,
            ]
        )
    return buf.getvalue().encode("utf-8")
