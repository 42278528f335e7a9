"""Cluster naming for one context."""

import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional
import click
from ctxcat.discovery import save_cluster_model
from ctxcat.evaluation import naming_accuracy
from ctxcat.exceptions import ConfigError, CtxcatError
from ctxcat.methods import METHODS, predict_context
from ctxcat.training import load_train_config
from ctxcat_cli.context import CtxcatContext
from ctxcat_cli.pipeline import load_inputs, resolve_tokens
from ctxcat_cli.runs import RunManifest, recorded_argv, run_dir, write_run_manifest

CLUSTER_METHODS = [tag for tag, flags in METHODS.items() if flags.scoring == "cluster"]
NAMES_FILENAME = "names.tsv"


@click.command(name="name")
@click.option("--dataset", type=click.Path(exists=True, file_okay=False), required=True, help="Dataset directory written by gen")
@click.option("--context", "context_id", required=True, help="Context to name clusters in")
@click.option("--method", type=click.Choice(CLUSTER_METHODS), default="oak", show_default=True, help="Method tag")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True, help="Run seed")
@click.option("--tokens", "token_file", type=click.Path(exists=True, dir_okay=False), default=None, help="Token file (default: the run directory's)")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Run config (clustering settings)")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory (default: the run directory)")
@click.pass_obj
def name_command(
    ctx: CtxcatContext,
    dataset: str,
    context_id: str,
    method: str,
    seed: int,
    token_file: Optional[str],
    config_path: Optional[str],
    out: Optional[str],
) -> None:
    """Cluster a context and name every cluster from its vocabulary."""
    args = {
        "dataset": dataset,
        "context": context_id,
        "method": method,
        "seed": seed,
        "tokens": token_file,
        "config": config_path,
        "out": out,
    }
    try:
        ds, encoder = load_inputs(dataset)
        if context_id not in ds.context_ids:
            raise ConfigError(f"dataset has no context '{context_id}'")
        tokens = resolve_tokens(
            ctx.runtime, dataset, method, seed, [context_id], [token_file] if token_file else []
        ).get(context_id)
        cfg = load_train_config(config_path, seed=seed)
        prediction = predict_context(ds, context_id, encoder, method, tokens, cfg)

        target = Path(out) if out else run_dir(ctx.runtime.runs_root, dataset, context_id, method, seed)
        model = replace(prediction.model, names=dict(prediction.cluster_names))
        save_cluster_model(model, target)

        known = set(ds.spec(context_id).known_classes)
        sizes = model.cluster_sizes()
        rows = []
        for cluster in range(model.K):
            name = prediction.cluster_names.get(cluster, "-")
            kind = "known" if cluster in model.cluster_classes else "novel"
            rows.append([cluster, kind, int(sizes[cluster]), name, prediction.matched.get(cluster, "-")])
        lines = ["cluster\tkind\tsize\tname\tmatched"] + ["\t".join(str(cell) for cell in row) for row in rows]
        (target / NAMES_FILENAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
        write_run_manifest(
            RunManifest(
                command="name",
                argv=recorded_argv("name", {**args, "out": str(target)}),
                config=config_path,
                dataset=dataset,
                seeds=[seed],
                out=str(target),
                method=method,
            ),
            target,
        )

        click.echo(ctx.formatter.format_output(rows, headers=["CLUSTER", "KIND", "SIZE", "NAME", "MATCHED"]))
        novel_names = {c: n for c, n in prediction.cluster_names.items() if n not in known}
        novel_matched = {c: m for c, m in prediction.matched.items() if c in novel_names}
        score = naming_accuracy(novel_names, novel_matched)
        if score is not None:
            ctx.formatter.print_info(f"Novel clusters named as their matched class: {100 * score:.1f}%")
        ctx.formatter.print_success(f"Cluster names written to {target / NAMES_FILENAME}")
        ctx.run_logger.log_command(command="name", args=args, result=str(target))
    except CtxcatError as exc:
        ctx.formatter.print_failure(exc)
        ctx.run_logger.log_command(command="name", args=args, error=str(exc), module=exc.module)
        sys.exit(1)
