"""Candidate-vocabulary prompt for an external language model."""

import sys
from typing import Optional
import click
from ctxcat.datamodel import load_dataset, render_vocab_prompt
from ctxcat.exceptions import ConfigError, CtxcatError
from ctxcat_cli.context import CtxcatContext


@click.command(name="prompt")
@click.option("--dataset", type=click.Path(exists=True, file_okay=False), required=True, help="Dataset directory written by gen")
@click.option("--context", "context_id", required=True, help="Context to describe")
@click.option("--novel", type=click.IntRange(min=1), default=None, help="Novel names to request (default: the context's novel class count)")
@click.pass_obj
def prompt_command(ctx: CtxcatContext, dataset: str, context_id: str, novel: Optional[int]) -> None:
    """Print the prompt that asks for novel class names in a context."""
    args = {"dataset": dataset, "context": context_id, "novel": novel}
    try:
        ds = load_dataset(dataset, load_images=False)
        if context_id not in ds.context_ids:
            raise ConfigError(f"dataset has no context '{context_id}'")
        spec = ds.spec(context_id)
        click.echo(render_vocab_prompt(spec.known_classes, novel or spec.novel_class_count))
        ctx.run_logger.log_command(command="prompt", args=args)
    except CtxcatError as exc:
        ctx.formatter.print_failure(exc)
        ctx.run_logger.log_command(command="prompt", args=args, error=str(exc), module=exc.module)
        sys.exit(1)
