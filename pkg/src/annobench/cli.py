"""Headless command-line entry points for scripted experiments."""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click

from .agents import OutcomeStatus
from .config import ConfigError, run_config_from_dict
from .evaluator import (
    MetricFlag,
    NoEvaluableSamplesError,
    evaluate_pair,
    macro_average,
    micro_average,
)
from .runner import (
    DatasetError,
    SampleEvent,
    build_clients,
    export_csv,
    load_dataset_csv,
    load_summary,
    run_batch,
    summary_path,
)
from .templates import load_template_dir


def _fail(scope: str, message: str, code: int = 1) -> None:
    click.echo(f"error: {scope}: {message}", err=True)
    sys.exit(code)


def _fmt4(value: float | None) -> str:
    return "-" if value is None else f"{value:.4f}"


@click.group()
def main():
    """Dual-agent annotation runs, offline evaluation, and serving."""


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--codebook", "codebook_path", type=click.Path(exists=True))
@click.option("--examples", "examples_path", type=click.Path(exists=True))
@click.option("--templates", "templates_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory.")
@click.option("--run-id", default=None, help="Override the run id from the config file.")
@click.option("--workers", type=int, default=None, help="Override the worker count.")
def run(dataset_path, config_path, codebook_path, examples_path, templates_dir, out_dir, run_id, workers):
    """Execute a batch run and write export.csv, session.jsonl, summary.json."""
    try:
        dataset = load_dataset_csv(dataset_path)
    except (DatasetError, OSError) as exc:
        _fail("dataset", str(exc))
    if not dataset:
        _fail("dataset", "no samples found")

    try:
        data = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        _fail("config", str(exc))

    codebook_text = None
    if codebook_path:
        codebook_text = Path(codebook_path).read_text(encoding="utf-8")
    examples = None
    if examples_path:
        from .runner import load_examples_csv

        try:
            pairs = load_examples_csv(examples_path)
        except DatasetError as exc:
            _fail("examples", str(exc))
        examples = [{"text": p.source_text, "gold": p.gold_tagged} for p in pairs]

    if templates_dir:
        data.setdefault("experiment", {})["templates"] = {
            name: text
            for name, text in vars(load_template_dir(templates_dir)).items()
        }

    from datetime import datetime, timezone

    default_run_id = datetime.now(timezone.utc).strftime("run-%Y%m%d-%H%M%S")
    try:
        config = run_config_from_dict(
            data,
            output_dir=out_dir,
            run_id=run_id or data.get("run_id") or default_run_id,
            workers=workers,
            codebook_text=codebook_text,
            examples=examples,
        )
    except (ConfigError, ValueError) as exc:
        _fail("config", str(exc))

    def show(event):
        if isinstance(event, SampleEvent):
            click.echo(
                f"[{event.completed}/{event.total}] {event.id} "
                f"f1_pre={_fmt4(event.f1_pre)} f1_post={_fmt4(event.f1_post)} "
                f"{event.status} macro_f1_post={_fmt4(event.macro_f1_post)}"
            )

    summary = run_batch(config, dataset, build_clients(config), show)

    run_dir = Path(config.output_dir) / config.run_id
    (run_dir / "export.csv").write_bytes(export_csv(summary))

    click.echo("")
    click.echo(f"run {config.run_id}: {len(summary.outcomes)} samples")
    for name, triple in (
        ("macro_pre", summary.macro_pre),
        ("macro_post", summary.macro_post),
        ("micro_pre", summary.micro_pre),
        ("micro_post", summary.micro_post),
    ):
        if triple is None:
            click.echo(f"  {name:<11} P=-      R=-      F1=-")
        else:
            click.echo(
                f"  {name:<11} P={triple[0]:.4f} R={triple[1]:.4f} F1={triple[2]:.4f}"
            )
    for status, count in summary.status_counts.items():
        if count:
            click.echo(f"  {status}: {count}")
    click.echo(f"  export: {run_dir / 'export.csv'}")
    if summary.status_counts.get(OutcomeStatus.FAILED.value, 0):
        sys.exit(2)


@main.command()
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True))
@click.option("--pred", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--label", default="Metaphor", show_default=True)
def evaluate(gold_path, pred_path, label):
    """Score a predictions CSV (id,pred) against a gold dataset CSV, offline."""
    try:
        gold_samples = load_dataset_csv(gold_path)
    except DatasetError as exc:
        _fail("gold", str(exc))
    try:
        preds = _load_pred_csv(pred_path)
    except DatasetError as exc:
        _fail("pred", str(exc))

    missing = [s.id for s in gold_samples if s.id not in preds]
    if missing:
        _fail("pred", f"missing prediction for id {missing[0]!r}")
    extra = set(preds) - {s.id for s in gold_samples}
    if extra:
        _fail("pred", f"prediction for unknown id {sorted(extra)[0]!r}")

    per_sample = []
    for sample in gold_samples:
        m = evaluate_pair(sample.gold_tagged, preds[sample.id], {label})
        per_sample.append(m)
        note = " (empty gold, excluded)" if MetricFlag.EMPTY_GOLD in m.flags else ""
        click.echo(
            f"{sample.id}  P={m.precision:.4f} R={m.recall:.4f} F1={m.f1:.4f}{note}"
        )
    try:
        p, r, f1 = macro_average(per_sample)
        mp, mr, mf1 = micro_average(per_sample)
    except NoEvaluableSamplesError:
        _fail("evaluate", "no evaluable samples (all gold cells empty)")
    click.echo(f"macro  P={p:.4f} R={r:.4f} F1={f1:.4f}")
    click.echo(f"micro  P={mp:.4f} R={mr:.4f} F1={mf1:.4f}")


def _load_pred_csv(path) -> dict[str, str]:
    from .runner import MissingHeaderError, RowFieldCountError, DuplicateIdError

    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header != ["id", "pred"]:
        raise MissingHeaderError("predictions header must be exactly 'id,pred'")
    preds: dict[str, str] = {}
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 2:
            raise RowFieldCountError(f"pred line {line}: expected 2 fields, got {len(row)}")
        if row[0] in preds:
            raise DuplicateIdError(f"pred line {line}: duplicate id {row[0]!r}")
        preds[row[0]] = row[1]
    return preds


@main.command()
@click.option("--run-dir", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
def export(run_dir):
    """Regenerate export.csv from a persisted summary.json."""
    run_dir = Path(run_dir)
    path = run_dir / "summary.json"
    if not path.is_file():
        _fail("export", f"no summary.json in {run_dir}")
    try:
        summary = load_summary(path)
    except (ValueError, KeyError) as exc:
        _fail("export", f"unreadable summary: {exc}")
    out = run_dir / "export.csv"
    out.write_bytes(export_csv(summary))
    click.echo(f"wrote {out}")


@main.command()
@click.option("--addr", default="127.0.0.1:8000", show_default=True, help="HOST:PORT to bind.")
@click.option("--out", "out_dir", default="runs", show_default=True, type=click.Path())
@click.option("--ui-dir", default=None, type=click.Path(exists=True, file_okay=False))
@click.option("--cors-origin", "cors_origins", multiple=True, default=("*",))
def serve(addr, out_dir, ui_dir, cors_origins):
    """Start the HTTP service (binds to loopback unless told otherwise)."""
    import uvicorn

    from .service import create_app

    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        _fail("serve", f"--addr must be HOST:PORT, got {addr!r}")
    app = create_app(output_dir=out_dir, cors_origins=tuple(cors_origins), ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=int(port))


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
def validate(dataset_path):
    """Ingestion checks only; exits nonzero on the first problem."""
    try:
        samples = load_dataset_csv(dataset_path)
    except (DatasetError, OSError) as exc:
        _fail("dataset", str(exc))
    empty_gold = sum(1 for s in samples if not s.gold_tagged.strip())
    click.echo(f"ok: {len(samples)} samples, {empty_gold} with empty gold")


if __name__ == "__main__":
    main()
