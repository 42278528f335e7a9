"""Relevance heatmaps for single items."""

import sys
from pathlib import Path
from typing import Optional
import click
from ctxcat.backbone import encode_images
from ctxcat.discovery import zero_shot_classify
from ctxcat.exceptions import ConfigError, CtxcatError
from ctxcat.methods import METHODS
from ctxcat.saliency import HEATMAP_FILENAME, WEIGHTS_FILENAME, relevance_map, write_pgm, write_weights
from ctxcat_cli.context import CtxcatContext
from ctxcat_cli.pipeline import load_inputs, resolve_tokens
from ctxcat_cli.runs import RunManifest, recorded_argv, run_dir, write_run_manifest


def default_saliency_dir(runs_root: str, dataset: str, context_id: str, method: str, seed: int, item_id: str) -> Path:
    return run_dir(runs_root, dataset, context_id, method, seed) / "saliency" / item_id.replace("/", "_")


@click.command(name="saliency")
@click.option("--dataset", type=click.Path(exists=True, file_okay=False), required=True, help="Dataset directory written by gen")
@click.option("--context", "context_id", required=True, help="Context whose tokens steer the encoder")
@click.option("--item", "item_id", required=True, help="Item id from the manifest")
@click.option("--method", type=click.Choice(list(METHODS)), default="oak", show_default=True, help="Method tag")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True, help="Run seed")
@click.option("--tokens", "token_file", type=click.Path(exists=True, dir_okay=False), default=None, help="Token file (default: the run directory's)")
@click.option("--target", default=None, help="Class name to explain; empty for the class-token norm (default: the predicted name)")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory")
@click.pass_obj
def saliency_command(
    ctx: CtxcatContext,
    dataset: str,
    context_id: str,
    item_id: str,
    method: str,
    seed: int,
    token_file: Optional[str],
    target: Optional[str],
    out: Optional[str],
) -> None:
    """Write a patch-relevance heatmap for one item under a context."""
    args = {
        "dataset": dataset,
        "context": context_id,
        "item": item_id,
        "method": method,
        "seed": seed,
        "tokens": token_file,
        "target": target,
        "out": out,
    }
    try:
        ds, encoder = load_inputs(dataset)
        if context_id not in ds.context_ids:
            raise ConfigError(f"dataset has no context '{context_id}'")
        if item_id not in ds.item_ids:
            raise ConfigError(f"dataset has no item '{item_id}'")
        tokens = resolve_tokens(
            ctx.runtime, dataset, method, seed, [context_id], [token_file] if token_file else []
        ).get(context_id)

        pixels = ds.pixels([item_id])
        lexicon = encoder.lexicon.subset(ds.spec(context_id).vocabulary)
        if target is None:
            emb = encode_images(encoder, pixels, tokens, [item_id])
            target = zero_shot_classify(emb, lexicon)[item_id]
            ctx.formatter.print_info(f"Explaining predicted name '{target}'")

        relevance = relevance_map(pixels[0], tokens, target, encoder, lexicon)
        directory = Path(out) if out else default_saliency_dir(
            ctx.runtime.runs_root, dataset, context_id, method, seed, item_id
        )
        write_pgm(relevance, directory / HEATMAP_FILENAME, encoder.config.image_size)
        write_weights(relevance, directory / WEIGHTS_FILENAME)
        write_run_manifest(
            RunManifest(
                command="saliency",
                argv=recorded_argv("saliency", {**args, "target": target, "out": str(directory)}),
                dataset=dataset,
                seeds=[seed],
                out=str(directory),
                method=method,
            ),
            directory,
        )

        peak = divmod(int(relevance.weights.argmax()), relevance.grid[1])
        click.echo(
            ctx.formatter.format_output(
                [[item_id, target or "-", f"{peak[0]},{peak[1]}", f"{relevance.weights.max():.4f}"]],
                headers=["ITEM", "TARGET", "PEAK PATCH", "PEAK WEIGHT"],
            )
        )
        ctx.formatter.print_success(f"Heatmap written to {directory / HEATMAP_FILENAME}")
        ctx.run_logger.log_command(command="saliency", args=args, result=str(directory))
    except CtxcatError as exc:
        ctx.formatter.print_failure(exc)
        ctx.run_logger.log_command(command="saliency", args=args, error=str(exc), module=exc.module)
        sys.exit(1)
