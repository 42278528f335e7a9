"""Re-run a command from its run manifest."""

import sys
import click
from ctxcat.exceptions import CtxcatError
from ctxcat_cli.context import CtxcatContext
from ctxcat_cli.runs import load_run_manifest


@click.command(name="replay")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True, help="run.yaml or the run directory holding it")
@click.pass_obj
def replay_command(ctx: CtxcatContext, manifest_path: str) -> None:
    """Re-run the command recorded in a run manifest with the same arguments."""
    from ctxcat_cli.cli import cli

    args = {"manifest": manifest_path}
    try:
        manifest = load_run_manifest(manifest_path)
        name, *rest = manifest.argv
        command = cli.commands.get(name)
        if command is None or name == "replay":
            raise click.UsageError(f"manifest records a command that cannot be replayed: '{name}'")
        ctx.formatter.print_info(f"Replaying: ctxcat {' '.join(manifest.argv)}")
        ctx.run_logger.log_command(command="replay", args=args, result=name)
        # runs under the current root options (runs root, threads, format)
        command.main(args=rest, prog_name=f"ctxcat {name}", standalone_mode=False, obj=ctx)
    except CtxcatError as exc:
        ctx.formatter.print_failure(exc)
        ctx.run_logger.log_command(command="replay", args=args, error=str(exc), module=exc.module)
        sys.exit(1)
