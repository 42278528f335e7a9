"""Synthetic dataset generation."""

import sys
from pathlib import Path
from typing import Optional
import click
from ctxcat.exceptions import CtxcatError
from ctxcat.settings import read_config_file, validate_config
from ctxcat.synthgen import GenConfig, build_synthetic, write_bundle
from ctxcat_cli.context import CtxcatContext
from ctxcat_cli.runs import RunManifest, recorded_argv, write_run_manifest


@click.command(name="gen")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Generator config (YAML or key=value)")
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Dataset directory to write")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Override the generator seed")
@click.pass_obj
def gen_command(ctx: CtxcatContext, config_path: Optional[str], out: str, seed: Optional[int]) -> None:
    """Render a synthetic multi-context dataset with its encoder and lexicon."""
    args = {"config": config_path, "out": out, "seed": seed}
    try:
        data = read_config_file(config_path) if config_path else {}
        if seed is not None:
            data["seed"] = seed
        data.setdefault("threads", ctx.runtime.threads)
        cfg = validate_config(GenConfig, data)

        bundle = build_synthetic(cfg)
        root = write_bundle(bundle, out)
        write_run_manifest(
            RunManifest(
                command="gen",
                argv=recorded_argv("gen", args),
                config=config_path,
                dataset=str(Path(out)),
                seeds=[cfg.seed],
                out=str(root),
            ),
            root,
        )

        ds = bundle.dataset
        rows = [
            [
                spec.context_id,
                len(spec.known_classes),
                spec.novel_class_count,
                len(ds.labeled(spec.context_id)),
                len(ds.unlabeled(spec.context_id)),
                len(spec.candidate_vocab),
            ]
            for spec in ds.contexts
        ]
        click.echo(ctx.formatter.format_output(
            rows, headers=["CONTEXT", "KNOWN", "NOVEL", "LABELED", "UNLABELED", "CANDIDATES"]
        ))
        ctx.formatter.print_success(f"Wrote {len(ds.items)} images to {root}")
        ctx.run_logger.log_command(command="gen", args=args, result=f"{len(ds.items)} images")
    except CtxcatError as exc:
        ctx.formatter.print_failure(exc)
        ctx.run_logger.log_command(command="gen", args=args, error=str(exc), module=exc.module)
        sys.exit(1)
