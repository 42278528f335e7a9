"""Multi-seed train + eval + aggregate."""

import sys
from pathlib import Path
from typing import Optional, Tuple
import click
from ctxcat.evaluation import REPORT_TSV
from ctxcat.exceptions import ConfigError, CtxcatError
from ctxcat.methods import METHODS, flags_for
from ctxcat_cli.commands.report import AGGREGATE_TSV, render_aggregate_text, write_aggregate
from ctxcat_cli.context import CtxcatContext
from ctxcat_cli.pipeline import eval_out_dir, eval_run, load_inputs, train_run
from ctxcat_cli.runs import RunManifest, parse_seeds, recorded_argv, write_run_manifest


@click.command(name="sweep")
@click.option("--dataset", type=click.Path(exists=True, file_okay=False), required=True, help="Dataset directory written by gen")
@click.option("--method", type=click.Choice(list(METHODS)), default="oak", show_default=True, help="Method tag")
@click.option("--seeds", "seed_text", default="0..4", show_default=True, help="Seed list such as 0..4 or 0,1,2")
@click.option("--context", "contexts", multiple=True, help="Contexts to include (default: all)")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Run config (key=value or YAML)")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Aggregate directory (default: runs/<dataset>/omni/<method>/aggregate)")
@click.pass_obj
def sweep_command(
    ctx: CtxcatContext,
    dataset: str,
    method: str,
    seed_text: str,
    contexts: Tuple[str, ...],
    config_path: Optional[str],
    out: Optional[str],
) -> None:
    """Train every context and evaluate for each seed, then aggregate."""
    args = {
        "dataset": dataset,
        "method": method,
        "seeds": seed_text,
        "context": list(contexts),
        "config": config_path,
        "out": out,
    }
    try:
        seeds = parse_seeds(seed_text)
        if len(seeds) < 2:
            raise click.BadParameter("a sweep needs at least two seeds", param_hint="--seeds")
        inputs = load_inputs(dataset)
        context_ids = list(contexts) or list(inputs[0].context_ids)
        unknown = [c for c in context_ids if c not in inputs[0].context_ids]
        if unknown:
            raise ConfigError(f"dataset has no context {', '.join(unknown)}")

        report_paths = []
        with click.progressbar(seeds, label=f"Sweeping {method}", file=sys.stderr) as progress:
            for seed in progress:
                if flags_for(method).trains:
                    for context_id in context_ids:
                        train_run(
                            ctx.runtime, dataset, context_id, method, seed,
                            config_path=config_path, inputs=inputs,
                        )
                target, _ = eval_run(
                    ctx.runtime, dataset, method, seed,
                    contexts=context_ids, config_path=config_path, inputs=inputs,
                )
                report_paths.append(target / REPORT_TSV)

        destination = Path(out) if out else eval_out_dir(ctx.runtime, dataset, method, seeds[0]).parent / "aggregate"
        rows = write_aggregate(report_paths, destination)
        write_run_manifest(
            RunManifest(
                command="sweep",
                argv=recorded_argv("sweep", {**args, "out": str(destination)}),
                config=config_path,
                dataset=dataset,
                seeds=seeds,
                out=str(destination),
                method=method,
            ),
            destination,
        )

        click.echo(render_aggregate_text(rows), nl=False)
        ctx.formatter.print_success(f"Aggregate over {len(seeds)} seeds written to {destination / AGGREGATE_TSV}")
        ctx.run_logger.log_command(command="sweep", args=args, result=str(destination))
    except CtxcatError as exc:
        ctx.formatter.print_failure(exc)
        ctx.run_logger.log_command(command="sweep", args=args, error=str(exc), module=exc.module)
        sys.exit(1)
