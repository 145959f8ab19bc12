"""HTTP facade over the runner: upload inputs, launch runs, stream live
events with full replay, and fetch logs, summaries, and exports."""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response, StreamingResponse

from . import __version__
from .agents import ExamplePair, Sample, SampleOutcome
from .config import ConfigError, RunConfig, run_config_from_dict
from .runner import (
    DatasetError,
    RunSummary,
    build_clients,
    export_csv,
    log_path,
    metrics_to_dict,
    parse_dataset_csv,
    parse_examples_csv,
    read_log,
    run_batch,
)
from .tagspan import parse_tagged


class RunState(str, Enum):
    PENDING = "Pending"
    RUNNING = "Running"
    DONE = "Done"
    FAILED = "Failed"
    CANCELLED = "Cancelled"

TERMINAL_STATES = {RunState.DONE, RunState.FAILED, RunState.CANCELLED}


@dataclass
class RunRecord:
    run_id: str
    config: RunConfig
    dataset: list[Sample]
    created_at: str
    state: RunState = RunState.PENDING
    events: list[str] = field(default_factory=list)
    outcomes: dict[int, SampleOutcome] = field(default_factory=dict)
    summary: Optional[RunSummary] = None
    error: Optional[str] = None
    finished: bool = False
    cond: threading.Condition = field(default_factory=threading.Condition)
    cancel: threading.Event = field(default_factory=threading.Event)


class ServiceState:
    def __init__(self, output_dir: Path):
        self.output_dir = output_dir
        self.datasets: dict[str, list[Sample]] = {}
        self.codebooks: dict[str, str] = {}
        self.examples: dict[str, tuple[ExamplePair, ...]] = {}
        self.runs: dict[str, RunRecord] = {}
        self.lock = threading.Lock()

    def run_or_404(self, run_id: str) -> RunRecord:
        with self.lock:
            record = self.runs.get(run_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown run id {run_id!r}")
        return record


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def _new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


def _execute_run(record: RunRecord) -> None:
    with record.cond:
        if record.state == RunState.PENDING:
            record.state = RunState.RUNNING

    def push(event) -> None:
        with record.cond:
            record.events.append(event.to_json())
            record.cond.notify_all()

    def keep(outcome: SampleOutcome) -> None:
        record.outcomes[outcome.sample.index] = outcome

    final = RunState.DONE
    try:
        record.summary = run_batch(
            record.config,
            record.dataset,
            build_clients(record.config),
            event_sink=push,
            cancel_event=record.cancel,
            outcome_sink=keep,
        )
        if record.cancel.is_set():
            final = RunState.CANCELLED
    except Exception as exc:  # surfaced via run state, never a crashed thread
        record.error = str(exc)
        final = RunState.FAILED
    with record.cond:
        if record.state not in TERMINAL_STATES:
            record.state = final
        record.finished = True
        record.cond.notify_all()


def _doc_dict(tagged: Optional[str], label: str) -> Optional[dict]:
    if tagged is None:
        return None
    doc = parse_tagged(tagged, {label})
    return {
        "plain_text": doc.plain_text,
        "spans": [
            {"label": s.label, "start_char": s.start_char, "end_char": s.end_char}
            for s in doc.spans
        ],
    }


def create_app(
    output_dir: str | Path = "runs",
    cors_origins: tuple[str, ...] = ("*",),
    ui_dir: Optional[str] = None,
) -> FastAPI:
    output = Path(output_dir)
    output.mkdir(parents=True, exist_ok=True)
    state = ServiceState(output)
    app = FastAPI(title="annobench", version=__version__)
    app.state.service = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/api/datasets")
    async def upload_dataset(request: Request):
        body = (await request.body()).decode("utf-8", errors="replace")
        try:
            samples = parse_dataset_csv(body)
        except DatasetError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        dataset_id = _new_id("ds")
        with state.lock:
            state.datasets[dataset_id] = samples
        return {"dataset_id": dataset_id, "sample_count": len(samples)}

    @app.post("/api/codebooks")
    async def upload_codebook(request: Request):
        body = (await request.body()).decode("utf-8", errors="replace")
        if not body.strip():
            raise HTTPException(status_code=400, detail="codebook body is empty")
        codebook_id = _new_id("cb")
        with state.lock:
            state.codebooks[codebook_id] = body
        return {"id": codebook_id}

    @app.post("/api/examples")
    async def upload_examples(request: Request):
        body = (await request.body()).decode("utf-8", errors="replace")
        try:
            pairs = parse_examples_csv(body)
        except DatasetError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        examples_id = _new_id("ex")
        with state.lock:
            state.examples[examples_id] = pairs
        return {"id": examples_id}

    @app.post("/api/runs")
    async def create_run(request: Request):
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="request body is not valid JSON")
        dataset_id = body.get("dataset_id")
        with state.lock:
            dataset = state.datasets.get(dataset_id)
        if dataset is None:
            raise HTTPException(status_code=404, detail=f"unknown dataset id {dataset_id!r}")
        if not dataset:
            raise HTTPException(status_code=400, detail="dataset has no samples")

        codebook_text = None
        if body.get("codebook_id") is not None:
            with state.lock:
                codebook_text = state.codebooks.get(body["codebook_id"])
            if codebook_text is None:
                raise HTTPException(
                    status_code=404, detail=f"unknown codebook id {body['codebook_id']!r}"
                )
        examples = None
        if body.get("examples_id") is not None:
            with state.lock:
                pairs = state.examples.get(body["examples_id"])
            if pairs is None:
                raise HTTPException(
                    status_code=404, detail=f"unknown examples id {body['examples_id']!r}"
                )
            examples = [{"text": p.source_text, "gold": p.gold_tagged} for p in pairs]

        run_id = _new_id("run")
        try:
            config = run_config_from_dict(
                body,
                output_dir=str(state.output_dir),
                run_id=run_id,
                codebook_text=codebook_text,
                examples=examples,
            )
        except (ConfigError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

        record = RunRecord(run_id=run_id, config=config, dataset=dataset, created_at=_now())
        with state.lock:
            state.runs[run_id] = record
        threading.Thread(target=_execute_run, args=(record,), daemon=True).start()
        return {"run_id": run_id}

    @app.get("/api/runs")
    def list_runs():
        with state.lock:
            records = list(state.runs.values())
        return {
            "runs": [
                {
                    "run_id": r.run_id,
                    "state": r.state.value,
                    "created_at": r.created_at,
                    "total_samples": len(r.dataset),
                }
                for r in sorted(records, key=lambda r: r.created_at)
            ]
        }

    @app.get("/api/runs/{run_id}")
    def run_info(run_id: str):
        record = state.run_or_404(run_id)
        return {
            "run_id": record.run_id,
            "state": record.state.value,
            "created_at": record.created_at,
            "total_samples": len(record.dataset),
            "baseline_f1": record.config.baseline_f1,
            "label": record.config.experiment.label,
            "reviewer_mode": record.config.experiment.reviewer_mode,
            "workers": record.config.workers,
            "error": record.error,
        }

    @app.get("/api/runs/{run_id}/events")
    def stream_events(run_id: str):
        record = state.run_or_404(run_id)

        def generate():
            # full replay for late subscribers, then live events, exactly once
            idx = 0
            while True:
                with record.cond:
                    while idx >= len(record.events) and not record.finished:
                        record.cond.wait(timeout=0.25)
                    batch = record.events[idx:]
                    idx += len(batch)
                    done = record.finished and idx >= len(record.events)
                for line in batch:
                    yield f"data: {line}\n\n"
                if done:
                    return

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/api/runs/{run_id}/summary")
    def run_summary(run_id: str):
        record = state.run_or_404(run_id)
        if record.summary is None:
            detail = record.error or f"run is {record.state.value}; summary not available"
            raise HTTPException(status_code=409, detail=detail)
        return record.summary.to_dict()

    @app.get("/api/runs/{run_id}/log")
    def run_log(run_id: str, offset: int = 0, limit: int = 100):
        record = state.run_or_404(run_id)
        path = log_path(record.config.output_dir, run_id)
        if not path.is_file():
            return {"entries": [], "offset": offset, "total": 0, "warnings": []}
        entries, warnings = read_log(path)
        page = entries[offset : offset + max(0, limit)]
        return {
            "entries": [e.to_dict() for e in page],
            "offset": offset,
            "total": len(entries),
            "warnings": warnings,
        }

    @app.get("/api/runs/{run_id}/export.csv")
    def run_export(run_id: str):
        record = state.run_or_404(run_id)
        if record.summary is None:
            raise HTTPException(
                status_code=409, detail=f"run is {record.state.value}; export not available"
            )
        return Response(
            content=export_csv(record.summary),
            media_type="text/csv",
            headers={"Content-Disposition": f'attachment; filename="{run_id}.csv"'},
        )

    @app.get("/api/runs/{run_id}/samples/{index}")
    def sample_detail(run_id: str, index: int):
        record = state.run_or_404(run_id)
        outcome = record.outcomes.get(index)
        if outcome is None:
            raise HTTPException(status_code=404, detail=f"no outcome for sample {index} yet")
        label = record.config.experiment.label
        annotator = outcome.annotator_response
        reviewer = outcome.reviewer_response
        return {
            "index": outcome.sample.index,
            "id": outcome.sample.id,
            "text": outcome.sample.text,
            "gold": outcome.sample.gold_tagged,
            "status": outcome.status.value,
            "error_class": outcome.error_class,
            "reasoning": annotator.reasoning if annotator else None,
            "critique": reviewer.critique if reviewer else None,
            "annotated_doc": _doc_dict(annotator.annotated_text if annotator else None, label),
            "final_doc": _doc_dict(outcome.final_text, label),
            "metrics_pre": metrics_to_dict(outcome.metrics_pre),
            "metrics_post": metrics_to_dict(outcome.metrics_post),
        }

    @app.post("/api/runs/{run_id}/cancel")
    def cancel_run(run_id: str):
        record = state.run_or_404(run_id)
        record.cancel.set()
        with record.cond:
            if record.state not in TERMINAL_STATES:
                record.state = RunState.CANCELLED
            record.cond.notify_all()
        return {"run_id": run_id, "state": record.state.value}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
