"""Root CLI group for ctxcat."""

import logging
import sys
from typing import List, Optional
import click
from ctxcat.exceptions import CtxcatError
from ctxcat.settings import apply_thread_cap, resolve_runtime_settings
from ctxcat_cli import __version__
from ctxcat_cli.context import CtxcatContext
from ctxcat_cli.config.config import ConfigManager
from ctxcat_cli.output.formatter import OutputFormatter
from ctxcat_cli.logging.audit import RunLogger
from ctxcat_cli.commands.gen import gen_command
from ctxcat_cli.commands.train import train_command
from ctxcat_cli.commands.evaluate import eval_command
from ctxcat_cli.commands.name import name_command
from ctxcat_cli.commands.saliency import saliency_command
from ctxcat_cli.commands.report import report_command
from ctxcat_cli.commands.sweep import sweep_command
from ctxcat_cli.commands.replay import replay_command
from ctxcat_cli.commands.prompt import prompt_command


def _configure_library_logging(verbose: bool) -> None:
    library = logging.getLogger("ctxcat")
    for handler in list(library.handlers):
        if getattr(handler, "_ctxcat_cli", False):
            library.removeHandler(handler)
    if not verbose:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(name)s %(message)s"))
    handler._ctxcat_cli = True
    library.addHandler(handler)
    library.setLevel(logging.DEBUG)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(version=__version__, prog_name="ctxcat")
@click.option("--settings", type=click.Path(dir_okay=False), default=None, help="CLI settings file (default ~/.ctxcat/config.yml)")
@click.option("--format", type=click.Choice(["json", "table", "csv"]), default=None, help="Output format")
@click.option("--threads", type=click.IntRange(min=1), default=None, help="Thread cap (overrides OAK_THREADS)")
@click.option("--runs-root", type=click.Path(file_okay=False), default=None, help="Root directory for run outputs")
@click.option("--verbose", is_flag=True, help="Stream library events to stderr")
@click.pass_context
def cli(
    ctx: click.Context,
    settings: Optional[str],
    format: Optional[str],
    threads: Optional[int],
    runs_root: Optional[str],
    verbose: bool,
) -> None:
    """
    ctxcat: open ad-hoc categorization with context tokens

    Train a small token matrix per context on a frozen encoder, then discover,
    score and name known and novel classes.

    \b
    Examples:
      ctxcat gen --config synth.cfg --out runs/d0
      ctxcat train --dataset runs/d0 --context color --method oak --seed 0
      ctxcat eval --dataset runs/d0 --method oak --seed 0
      ctxcat sweep --dataset runs/d0 --method oak --seeds 0..4
    """
    try:
        config_manager = ConfigManager(settings)
        cfg = config_manager.get_config()

        if format:
            cfg.output.format = format

        runtime = resolve_runtime_settings(
            threads=threads or cfg.runtime.threads,
            runs_root=runs_root or cfg.runtime.runs_root,
        )
        apply_thread_cap(runtime)
        _configure_library_logging(verbose)

        formatter = OutputFormatter(format=cfg.output.format, colors=cfg.output.colors)
        run_logger = RunLogger(cfg.logging)

        ctx.obj = CtxcatContext(
            config_manager=config_manager,
            formatter=formatter,
            run_logger=run_logger,
            runtime=runtime,
        )
    except CtxcatError as e:
        click.echo(f"error[{e.module}]: {e}", err=True)
        sys.exit(1)


cli.add_command(gen_command)
cli.add_command(train_command)
cli.add_command(eval_command)
cli.add_command(name_command)
cli.add_command(saliency_command)
cli.add_command(report_command)
cli.add_command(sweep_command)
cli.add_command(replay_command)
cli.add_command(prompt_command)


def dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Run one command and return its exit code: 0 on success, 2 on usage
    errors, 1 on library errors.
    """
    try:
        rv = cli.main(args=argv, prog_name="ctxcat", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except CtxcatError as exc:
        click.echo(f"error[{exc.module}]: {exc}", err=True)
        return 1
    except SystemExit as exc:
        if exc.code is None:
            return 0
        return exc.code if isinstance(exc.code, int) else 1
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(dispatch())
