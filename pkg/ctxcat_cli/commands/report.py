"""Seed aggregation of evaluation reports."""

import sys
from pathlib import Path
from typing import List, Tuple
import click
from ctxcat.evaluation import (
    REPORT_TSV,
    aggregate_seeds,
    read_report_tsv,
    render_aggregate_text,
    render_aggregate_tsv,
)
from ctxcat.exceptions import CtxcatError
from ctxcat_cli.context import CtxcatContext
from ctxcat_cli.runs import RunManifest, recorded_argv, write_run_manifest

AGGREGATE_TSV = "aggregate.tsv"
AGGREGATE_TEXT = "aggregate.txt"


def report_files(paths: Tuple[str, ...]) -> List[Path]:
    """Report files as given, or each directory's report.tsv."""
    files = []
    for raw in paths:
        path = Path(raw)
        files.append(path / REPORT_TSV if path.is_dir() else path)
    return files


def write_aggregate(files: List[Path], out: Path):
    """Aggregate seed reports into out/aggregate.{tsv,txt}."""
    tables = [read_report_tsv(path) for path in files]
    rows = aggregate_seeds(tables)
    first = tables[0].metadata
    metadata = {
        "method": first.get("method", "-"),
        "dataset": first.get("dataset", "-"),
        "seeds": ",".join(t.metadata.get("seed", "?") for t in tables),
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / AGGREGATE_TSV).write_text(render_aggregate_tsv(rows, metadata), encoding="utf-8")
    (out / AGGREGATE_TEXT).write_text(render_aggregate_text(rows), encoding="utf-8")
    return rows


@click.command(name="report")
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Directory for aggregate.tsv and aggregate.txt")
@click.pass_obj
def report_command(ctx: CtxcatContext, paths: Tuple[str, ...], out: str) -> None:
    """
    Aggregate per-seed reports into mean and standard deviation.

    PATHS are report.tsv files or the directories holding them.
    """
    args = {"paths": list(paths), "out": out}
    try:
        files = report_files(paths)
        rows = write_aggregate(files, Path(out))
        write_run_manifest(
            RunManifest(
                command="report",
                argv=recorded_argv("report", {"out": out}, flags=[str(path) for path in paths]),
                seeds=[],
                out=out,
            ),
            Path(out),
        )
        if ctx.formatter.format == "table":
            click.echo(render_aggregate_text(rows), nl=False)
        else:
            data = [
                {"context": r.context_id, "split": r.split, "mean": r.mean, "std": r.std, "n": r.n}
                for r in rows
            ]
            click.echo(ctx.formatter.format_output(data))
        ctx.formatter.print_success(f"Aggregate written to {Path(out) / AGGREGATE_TSV}")
        ctx.run_logger.log_command(command="report", args=args, result=out)
    except CtxcatError as exc:
        ctx.formatter.print_failure(exc)
        ctx.run_logger.log_command(command="report", args=args, error=str(exc), module=exc.module)
        sys.exit(1)
