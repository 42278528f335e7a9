"""Context token training."""

import sys
from typing import Optional
import click
from ctxcat.exceptions import CtxcatError
from ctxcat.methods import METHODS
from ctxcat_cli.context import CtxcatContext
from ctxcat_cli.pipeline import train_run
from ctxcat_cli.runs import RunManifest, recorded_argv, write_run_manifest

TRAINING_METHODS = [tag for tag, flags in METHODS.items() if flags.trains]


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4f}"


@click.command(name="train")
@click.option("--dataset", type=click.Path(exists=True, file_okay=False), required=True, help="Dataset directory written by gen")
@click.option("--context", "context_id", required=True, help="Context to train tokens for")
@click.option("--method", type=click.Choice(TRAINING_METHODS), default="oak", show_default=True, help="Method tag")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True, help="Training seed")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Run config (key=value or YAML)")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Run directory (default: runs/<dataset>/<context>/<method>/seed<k>)")
@click.option("--resume", is_flag=True, help="Continue from the run directory's checkpoint")
@click.pass_obj
def train_command(
    ctx: CtxcatContext,
    dataset: str,
    context_id: str,
    method: str,
    seed: int,
    config_path: Optional[str],
    out: Optional[str],
    resume: bool,
) -> None:
    """Train one context's tokens on the frozen encoder."""
    args = {"dataset": dataset, "context": context_id, "method": method, "seed": seed, "config": config_path, "out": out}
    try:
        target, trainer = train_run(
            ctx.runtime,
            dataset,
            context_id,
            method,
            seed,
            config_path=config_path,
            out=out,
            resume=resume,
        )
        write_run_manifest(
            RunManifest(
                command="train",
                argv=recorded_argv("train", {**args, "out": str(target)}),
                config=config_path,
                dataset=dataset,
                seeds=[seed],
                out=str(target),
                method=method,
            ),
            target,
        )

        rows = [
            [r.epoch, f"{r.lr:.5f}", _fmt(r.loss), _fmt(r.gcd), _fmt(r.text), _fmt(r.silhouette), r.steps]
            for r in trainer.records
        ]
        click.echo(ctx.formatter.format_output(
            rows, headers=["EPOCH", "LR", "LOSS", "GCD", "TEXT", "SILHOUETTE", "STEPS"]
        ))
        ctx.formatter.print_success(f"Tokens for '{context_id}' written to {target}")
        ctx.run_logger.log_command(command="train", args=args, result=f"{trainer.epoch} epochs")
    except CtxcatError as exc:
        ctx.formatter.print_failure(exc)
        ctx.run_logger.log_command(command="train", args=args, error=str(exc), module=exc.module)
        sys.exit(1)
