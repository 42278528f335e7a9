"""Evaluation of one method across contexts."""

import sys
from typing import Optional, Tuple
import click
from ctxcat.evaluation import REPORT_TSV, SPLITS
from ctxcat.exceptions import CtxcatError
from ctxcat.methods import METHODS
from ctxcat_cli.context import CtxcatContext
from ctxcat_cli.pipeline import eval_run
from ctxcat_cli.runs import RunManifest, recorded_argv, write_run_manifest


def report_rows(report):
    rows = []
    for context_id, split, value in report.rows():
        rows.append([context_id, split, "-" if value is None else f"{100 * value:.1f}"])
    return rows


@click.command(name="eval")
@click.option("--dataset", type=click.Path(exists=True, file_okay=False), required=True, help="Dataset directory written by gen")
@click.option("--method", type=click.Choice(list(METHODS)), default="oak", show_default=True, help="Method tag")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True, help="Seed of the trained runs and of clustering")
@click.option("--context", "contexts", multiple=True, help="Contexts to evaluate (default: all)")
@click.option("--tokens", "token_files", multiple=True, type=click.Path(exists=True, dir_okay=False), help="Token files overriding the run directories")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Run config (clustering settings)")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Report directory")
@click.pass_obj
def eval_command(
    ctx: CtxcatContext,
    dataset: str,
    method: str,
    seed: int,
    contexts: Tuple[str, ...],
    token_files: Tuple[str, ...],
    config_path: Optional[str],
    out: Optional[str],
) -> None:
    """Score known/novel/overall accuracy per context plus Omni accuracy."""
    args = {
        "dataset": dataset,
        "method": method,
        "seed": seed,
        "context": list(contexts),
        "tokens": list(token_files),
        "config": config_path,
        "out": out,
    }
    try:
        target, report = eval_run(
            ctx.runtime,
            dataset,
            method,
            seed,
            contexts=contexts,
            token_files=token_files,
            config_path=config_path,
            out=out,
        )
        write_run_manifest(
            RunManifest(
                command="eval",
                argv=recorded_argv("eval", {**args, "out": str(target)}),
                config=config_path,
                dataset=dataset,
                seeds=[seed],
                out=str(target),
                method=method,
            ),
            target,
        )

        if ctx.formatter.format == "table":
            table = {}
            for context_id, split, value in report.rows():
                table.setdefault(context_id, {})[split] = "-" if value is None else f"{100 * value:.1f}"
            rows = [[context_id] + [cells[split] for split in SPLITS] for context_id, cells in table.items()]
            click.echo(ctx.formatter.format_output(rows, headers=["CONTEXT", "KNOWN", "NOVEL", "OVERALL"]))
        else:
            click.echo(ctx.formatter.format_output(report_rows(report), headers=["context", "split", "value"]))
        ctx.formatter.print_success(f"Report written to {target / REPORT_TSV}")
        ctx.run_logger.log_command(command="eval", args=args, result=str(target))
    except CtxcatError as exc:
        ctx.formatter.print_failure(exc)
        ctx.run_logger.log_command(command="eval", args=args, error=str(exc), module=exc.module)
        sys.exit(1)
